#include "hmc/targets.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace hmc {

TargetDensity::TargetDensity(int dim, std::string name,
                             std::vector<std::string> names)
    : dim_(dim), name_(std::move(name)), parameter_names_(std::move(names)) {
  if (dim_ < 1) throw std::invalid_argument("target dimension must be >= 1");
  if (parameter_names_.empty()) {
    parameter_names_.reserve(dim_);
    for (int i = 0; i < dim_; ++i)
      parameter_names_.push_back("q" + std::to_string(i + 1));
  }
  if (static_cast<int>(parameter_names_.size()) != dim_)
    throw std::invalid_argument("parameter name count must match dimension");
}

double TargetDensity::potential(const Eigen::VectorXd& q) const {
  if (q.size() != dim_)
    throw std::invalid_argument("potential: dimension mismatch");
  return potential_impl(q);
}

Eigen::VectorXd TargetDensity::gradient(const Eigen::VectorXd& q) const {
  if (q.size() != dim_)
    throw std::invalid_argument("gradient: dimension mismatch");
  return gradient_impl(q);
}

double default_fd_step(const Eigen::VectorXd& q) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::cbrt(eps) * (1.0 + q.norm());
}

Eigen::VectorXd hessian_vector_product(const TargetDensity& target,
                                       const Eigen::VectorXd& q,
                                       const Eigen::VectorXd& unit_v,
                                       double step) {
  if (step <= 0.0) throw std::invalid_argument("hvp: step must be positive");
  if (q.size() != unit_v.size())
    throw std::invalid_argument("hvp: dimension mismatch");
  const Eigen::VectorXd gp = target.gradient(q + (step / 2.0) * unit_v);
  const Eigen::VectorXd gm = target.gradient(q - (step / 2.0) * unit_v);
  if (!gp.allFinite() || !gm.allFinite())
    throw std::domain_error("hvp: shifted gradient left the support");
  return (gp - gm) / step;
}

GaussianTarget::GaussianTarget(Eigen::MatrixXd covariance,
                               Eigen::VectorXd mean, std::string name)
    : TargetDensity(static_cast<int>(covariance.rows()), std::move(name), {}),
      covariance_(std::move(covariance)),
      mean_(std::move(mean)) {
  if (covariance_.rows() != covariance_.cols())
    throw std::invalid_argument("gaussian: covariance must be square");
  if (mean_.size() != covariance_.rows())
    throw std::invalid_argument("gaussian: mean size mismatch");
  if (!covariance_.isApprox(covariance_.transpose()))
    throw std::invalid_argument("gaussian: covariance must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian: covariance must be positive definite");
  precision_ = llt.solve(
      Eigen::MatrixXd::Identity(covariance_.rows(), covariance_.rows()));
  precision_ = ((precision_ + precision_.transpose()) / 2.0).eval();
}

GaussianTarget GaussianTarget::standard_normal(int dim) {
  return GaussianTarget(Eigen::MatrixXd::Identity(dim, dim),
                        Eigen::VectorXd::Zero(dim), "standard-normal");
}

double GaussianTarget::potential_impl(const Eigen::VectorXd& q) const {
  const Eigen::VectorXd c = q - mean_;
  return 0.5 * c.dot(precision_ * c);
}

Eigen::VectorXd GaussianTarget::gradient_impl(const Eigen::VectorXd& q) const {
  return precision_ * (q - mean_);
}

RegressionTarget::RegressionTarget(RegressionData data, double intercept_scale,
                                   double slope_scale, double noise_scale,
                                   std::string name)
    : TargetDensity(3, std::move(name), {"intercept", "slope", "log_sigma"}),
      data_(std::move(data)),
      intercept_scale_(intercept_scale),
      slope_scale_(slope_scale),
      noise_scale_(noise_scale) {
  if (data_.x.size() != data_.y.size())
    throw std::invalid_argument("regression: x and y lengths differ");
  if (data_.x.size() < 3)
    throw std::invalid_argument("regression: need at least 3 observations");
  if (intercept_scale_ <= 0 || slope_scale_ <= 0 || noise_scale_ <= 0)
    throw std::invalid_argument("regression: prior scales must be positive");
}

double RegressionTarget::potential_impl(const Eigen::VectorXd& q) const {
  const double alpha = q[0], beta = q[1], log_sigma = q[2];
  const double inv_var = std::exp(-2.0 * log_sigma);
  const Eigen::VectorXd r = data_.y.array() - alpha - beta * data_.x.array();
  const double n = static_cast<double>(data_.x.size());
  double u = n * log_sigma + 0.5 * inv_var * r.squaredNorm();
  u += 0.5 * alpha * alpha / (intercept_scale_ * intercept_scale_);
  u += 0.5 * beta * beta / (slope_scale_ * slope_scale_);
  u += 0.5 * log_sigma * log_sigma / (noise_scale_ * noise_scale_);
  return u;
}

Eigen::VectorXd RegressionTarget::gradient_impl(
    const Eigen::VectorXd& q) const {
  const double alpha = q[0], beta = q[1], log_sigma = q[2];
  const double inv_var = std::exp(-2.0 * log_sigma);
  const Eigen::VectorXd r = data_.y.array() - alpha - beta * data_.x.array();
  const double n = static_cast<double>(data_.x.size());
  Eigen::VectorXd g(3);
  g[0] = -inv_var * r.sum() + alpha / (intercept_scale_ * intercept_scale_);
  g[1] = -inv_var * r.dot(data_.x) + beta / (slope_scale_ * slope_scale_);
  g[2] = n - inv_var * r.squaredNorm() +
         log_sigma / (noise_scale_ * noise_scale_);
  return g;
}

RegressionData load_regression_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv file is empty: " + path);
  std::vector<double> xs, ys;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b))
      throw std::runtime_error("csv row " + std::to_string(lineno) +
                               " is not two comma-separated columns");
    size_t pa = 0, pb = 0;
    double xv, yv;
    try {
      xv = std::stod(a, &pa);
      yv = std::stod(b, &pb);
    } catch (const std::exception&) {
      throw std::runtime_error("csv row " + std::to_string(lineno) +
                               " has non-numeric data");
    }
    xs.push_back(xv);
    ys.push_back(yv);
  }
  if (xs.size() < 3)
    throw std::runtime_error("csv must contain at least 3 data rows");
  RegressionData data;
  data.x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
  return data;
}

FunnelTarget::FunnelTarget(int dim, double scale, std::string name)
    : TargetDensity(dim, std::move(name),
                    [dim] {
                      std::vector<std::string> names{"v"};
                      for (int i = 1; i < dim; ++i)
                        names.push_back("x" + std::to_string(i));
                      return names;
                    }()),
      scale_(scale) {
  if (dim < 2) throw std::invalid_argument("funnel: dimension must be >= 2");
  if (scale_ <= 0) throw std::invalid_argument("funnel: scale must be positive");
}

double FunnelTarget::potential_impl(const Eigen::VectorXd& q) const {
  const double v = q[0];
  const int d = dimension();
  const double ssq = q.tail(d - 1).squaredNorm();
  return 0.5 * v * v / (scale_ * scale_) + 0.5 * (d - 1) * v +
         0.5 * std::exp(-v) * ssq;
}

Eigen::VectorXd FunnelTarget::gradient_impl(const Eigen::VectorXd& q) const {
  const double v = q[0];
  const int d = dimension();
  const double ev = std::exp(-v);
  Eigen::VectorXd g(d);
  g[0] = v / (scale_ * scale_) + 0.5 * (d - 1) -
         0.5 * ev * q.tail(d - 1).squaredNorm();
  g.tail(d - 1) = ev * q.tail(d - 1);
  return g;
}

CountingTarget::CountingTarget(const TargetDensity& inner)
    : TargetDensity(inner.dimension(), inner.name(), inner.parameter_names()),
      inner_(inner) {}

double CountingTarget::potential_impl(const Eigen::VectorXd& q) const {
  ++potential_evals_;
  return inner_.potential(q);
}

Eigen::VectorXd CountingTarget::gradient_impl(const Eigen::VectorXd& q) const {
  ++gradient_evals_;
  return inner_.gradient(q);
}

}  // namespace hmc
