#ifndef HMC_TARGETS_HPP
#define HMC_TARGETS_HPP

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hmc {

// A differentiable unnormalized posterior on an unconstrained parameter
// space. All energies are potentials: potential(q) is the negative log of
// the unnormalized density, with the additive constant fixed per target.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  int dimension() const noexcept { return dim_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& parameter_names() const noexcept {
    return parameter_names_;
  }

  double potential(const Eigen::VectorXd& q) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const;

 protected:
  TargetDensity(int dim, std::string name, std::vector<std::string> names);

  virtual double potential_impl(const Eigen::VectorXd& q) const = 0;
  virtual Eigen::VectorXd gradient_impl(const Eigen::VectorXd& q) const = 0;

 private:
  int dim_;
  std::string name_;
  std::vector<std::string> parameter_names_;
};

// Default symmetric-difference step for Hessian-vector products:
// cbrt(machine epsilon) * (1 + ||q||).
double default_fd_step(const Eigen::VectorXd& q);

// Symmetric-difference Hessian-vector product
//   (grad(q + h/2 v) - grad(q - h/2 v)) / h
// for a unit vector v. Throws std::domain_error when a shifted gradient is
// non-finite (the evaluation point left the support).
Eigen::VectorXd hessian_vector_product(const TargetDensity& target,
                                       const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& unit_v,
                                       double step);

// Multivariate Gaussian with fixed mean and covariance. The analytic
// Hessian (the precision matrix) is exposed as a test oracle.
class GaussianTarget final : public TargetDensity {
 public:
  GaussianTarget(Eigen::MatrixXd covariance, Eigen::VectorXd mean,
                 std::string name = "gaussian");

  static GaussianTarget standard_normal(int dim);

  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& precision() const noexcept { return precision_; }
  // Constant Hessian of the potential.
  const Eigen::MatrixXd& analytic_hessian() const noexcept {
    return precision_;
  }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd gradient_impl(const Eigen::VectorXd& q) const override;

 private:
  Eigen::MatrixXd covariance_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
};

// Linear regression y ~ N(alpha + beta x, sigma^2) with the noise scale
// parameterized as log_sigma, so all three parameters are unconstrained.
// An uncentered covariate makes slope and intercept strongly correlated.
struct RegressionData {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

class RegressionTarget final : public TargetDensity {
 public:
  RegressionTarget(RegressionData data, double intercept_scale,
                   double slope_scale, double noise_scale,
                   std::string name = "regression");

  const RegressionData& data() const noexcept { return data_; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd gradient_impl(const Eigen::VectorXd& q) const override;

 private:
  RegressionData data_;
  double intercept_scale_;
  double slope_scale_;
  double noise_scale_;
};

// Loads two-column (x, y) CSV data; a header row is required.
RegressionData load_regression_csv(const std::string& path);

// Funnel density: v ~ N(0, scale^2), x_i | v ~ N(0, exp(v)). Curvature
// depends on position, so no fixed metric matches it globally.
class FunnelTarget final : public TargetDensity {
 public:
  FunnelTarget(int dim, double scale, std::string name = "funnel");

  double scale() const noexcept { return scale_; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd gradient_impl(const Eigen::VectorXd& q) const override;

 private:
  double scale_;
};

// Per-chain instrumentation boundary: counts every potential and gradient
// evaluation that reaches the wrapped target. Not thread-safe; each chain
// owns its wrapper.
class CountingTarget final : public TargetDensity {
 public:
  explicit CountingTarget(const TargetDensity& inner);

  long gradient_evals() const noexcept { return gradient_evals_; }
  long potential_evals() const noexcept { return potential_evals_; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd gradient_impl(const Eigen::VectorXd& q) const override;

 private:
  const TargetDensity& inner_;
  mutable long gradient_evals_ = 0;
  mutable long potential_evals_ = 0;
};

}  // namespace hmc

#endif
