#include "hmc/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "hmc/linalg.hpp"

namespace hmc {

namespace {

constexpr double kShrinkageIdentity = 1e-3;
constexpr double kShrinkagePrior = 5.0;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Metric Metric::identity(int dim) {
  return diagonal(Eigen::VectorXd::Ones(dim));
}

Metric Metric::diagonal(Eigen::VectorXd inverse_diagonal) {
  require(inverse_diagonal.size() > 0, "metric: empty diagonal");
  require((inverse_diagonal.array() > 0).all() &&
              inverse_diagonal.allFinite(),
          "metric: inverse diagonal must be positive and finite");
  Metric m;
  m.kind_ = Kind::Diagonal;
  m.dim_ = static_cast<int>(inverse_diagonal.size());
  m.inv_diag_ = std::move(inverse_diagonal);
  m.inv_diag_sqrt_ = m.inv_diag_.cwiseSqrt();
  return m;
}

Metric Metric::dense(Eigen::MatrixXd factor_lower) {
  require(factor_lower.rows() == factor_lower.cols(),
          "metric: factor must be square");
  require(factor_lower.allFinite(), "metric: factor must be finite");
  require((factor_lower.diagonal().array() > 0).all(),
          "metric: factor diagonal must be positive");
  Metric m;
  m.kind_ = Kind::Dense;
  m.dim_ = static_cast<int>(factor_lower.rows());
  m.factor_ = std::move(factor_lower);
  m.factor_.triangularView<Eigen::StrictlyUpper>().setZero();
  return m;
}

Metric Metric::low_rank(Eigen::MatrixXd basis, Eigen::VectorXd eigenvalues,
                        double tail, Eigen::VectorXd rescale) {
  const int d = static_cast<int>(basis.rows());
  const int k = static_cast<int>(basis.cols());
  require(d > 0 && k > 0 && k <= d, "metric: bad low-rank shape");
  require(eigenvalues.size() == k, "metric: eigenvalue count mismatch");
  require(rescale.size() == d, "metric: rescale size mismatch");
  require(tail > 0 && std::isfinite(tail), "metric: tail must be positive");
  require((rescale.array() > 0).all() && rescale.allFinite(),
          "metric: rescale must be positive");
  for (int i = 0; i < k; ++i) {
    require(std::isfinite(eigenvalues[i]) && eigenvalues[i] >= tail,
            "metric: eigenvalues must dominate the tail");
    if (i > 0)
      require(eigenvalues[i] <= eigenvalues[i - 1],
              "metric: eigenvalues must be non-increasing");
  }
  const Eigen::MatrixXd gram =
      basis.transpose() * basis - Eigen::MatrixXd::Identity(k, k);
  require(gram.cwiseAbs().maxCoeff() < 1e-8,
          "metric: basis columns must be orthonormal");
  Metric m;
  m.kind_ = Kind::LowRank;
  m.dim_ = d;
  m.basis_ = std::move(basis);
  m.eigenvalues_ = std::move(eigenvalues);
  m.tail_ = tail;
  m.rescale_ = std::move(rescale);
  m.rescale_sqrt_ = m.rescale_.cwiseSqrt();
  return m;
}

// LowRank factor: L = D^{1/2} A^{-1/2} with the symmetric square root
// A^{+-1/2} = U diag(lambda^{+-1/2} - tail^{+-1/2}) U^T + tail^{+-1/2} I,
// so L L^T = D^{1/2} A^{-1} D^{1/2} = M^{-1}.
namespace {

Eigen::VectorXd lowrank_apply_power(const Eigen::MatrixXd& u,
                                    const Eigen::VectorXd& lam, double tail,
                                    double power, const Eigen::VectorXd& x) {
  const Eigen::VectorXd proj = u.transpose() * x;
  const double tail_pow = std::pow(tail, power);
  Eigen::VectorXd scaled(proj.size());
  for (int i = 0; i < proj.size(); ++i)
    scaled[i] = (std::pow(lam[i], power) - tail_pow) * proj[i];
  return u * scaled + tail_pow * x;
}

}  // namespace

Eigen::VectorXd Metric::factor_multiply(const Eigen::VectorXd& x) const {
  require(x.size() == dim_, "metric: dimension mismatch");
  switch (kind_) {
    case Kind::Diagonal:
      return inv_diag_sqrt_.cwiseProduct(x);
    case Kind::Dense:
      return factor_.triangularView<Eigen::Lower>() * x;
    case Kind::LowRank:
      return rescale_sqrt_.cwiseProduct(
          lowrank_apply_power(basis_, eigenvalues_, tail_, -0.5, x));
  }
  return x;
}

Eigen::VectorXd Metric::factor_transpose_multiply(
    const Eigen::VectorXd& x) const {
  require(x.size() == dim_, "metric: dimension mismatch");
  switch (kind_) {
    case Kind::Diagonal:
      return inv_diag_sqrt_.cwiseProduct(x);
    case Kind::Dense:
      return factor_.triangularView<Eigen::Lower>().transpose() * x;
    case Kind::LowRank:
      return lowrank_apply_power(basis_, eigenvalues_, tail_, -0.5,
                                 rescale_sqrt_.cwiseProduct(x));
  }
  return x;
}

Eigen::VectorXd Metric::factor_solve(const Eigen::VectorXd& x) const {
  require(x.size() == dim_, "metric: dimension mismatch");
  switch (kind_) {
    case Kind::Diagonal:
      return x.cwiseQuotient(inv_diag_sqrt_);
    case Kind::Dense:
      return factor_.triangularView<Eigen::Lower>().solve(x);
    case Kind::LowRank:
      return lowrank_apply_power(basis_, eigenvalues_, tail_, 0.5,
                                 x.cwiseQuotient(rescale_sqrt_));
  }
  return x;
}

Eigen::VectorXd Metric::factor_transpose_solve(const Eigen::VectorXd& x) const {
  require(x.size() == dim_, "metric: dimension mismatch");
  switch (kind_) {
    case Kind::Diagonal:
      return x.cwiseQuotient(inv_diag_sqrt_);
    case Kind::Dense:
      return factor_.triangularView<Eigen::Lower>().transpose().solve(x);
    case Kind::LowRank:
      return lowrank_apply_power(basis_, eigenvalues_, tail_, 0.5, x)
          .cwiseQuotient(rescale_sqrt_);
  }
  return x;
}

Eigen::VectorXd Metric::inverse_multiply(const Eigen::VectorXd& x) const {
  if (kind_ == Kind::LowRank) {
    // M^{-1} x = D^{1/2} (U diag(1/lambda - 1/tail) U^T + I/tail) D^{1/2} x
    const Eigen::VectorXd y = rescale_sqrt_.cwiseProduct(x);
    return rescale_sqrt_.cwiseProduct(
        lowrank_apply_power(basis_, eigenvalues_, tail_, -1.0, y));
  }
  return factor_multiply(factor_transpose_multiply(x));
}

Eigen::VectorXd Metric::multiply(const Eigen::VectorXd& x) const {
  return factor_transpose_solve(factor_solve(x));
}

Eigen::VectorXd Metric::sample_momentum(Rng& rng) const {
  return factor_transpose_solve(rng.normal_vector(dim_));
}

double Metric::kinetic_energy(const Eigen::VectorXd& p) const {
  return 0.5 * p.dot(inverse_multiply(p));
}

Eigen::MatrixXd Metric::dense_inverse() const {
  Eigen::MatrixXd out(dim_, dim_);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    e[i] = 1.0;
    out.col(i) = inverse_multiply(e);
    e[i] = 0.0;
  }
  return ((out + out.transpose()) / 2.0).eval();
}

Eigen::MatrixXd Metric::dense_metric() const {
  Eigen::MatrixXd out(dim_, dim_);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    e[i] = 1.0;
    out.col(i) = multiply(e);
    e[i] = 0.0;
  }
  return ((out + out.transpose()) / 2.0).eval();
}

Eigen::VectorXd Metric::metric_diagonal() const {
  switch (kind_) {
    case Kind::Diagonal:
      return inv_diag_.cwiseInverse();
    case Kind::LowRank: {
      // M_ii = (sum_k U_ik^2 (lambda_k - tail) + tail) / D_ii
      Eigen::VectorXd diag = Eigen::VectorXd::Constant(dim_, tail_);
      for (int k = 0; k < basis_.cols(); ++k)
        diag += (eigenvalues_[k] - tail_) *
                basis_.col(k).cwiseProduct(basis_.col(k));
      return diag.cwiseQuotient(rescale_);
    }
    case Kind::Dense:
      return dense_metric().diagonal();
  }
  return Eigen::VectorXd();
}

Metric Metric::collapsed_to_diagonal() const {
  return Metric::diagonal(metric_diagonal().cwiseInverse());
}

std::string Metric::kind_name() const {
  switch (kind_) {
    case Kind::Diagonal:
      return "diagonal";
    case Kind::Dense:
      return "dense";
    case Kind::LowRank:
      return "lowrank";
  }
  return "unknown";
}

Eigen::VectorXd sample_variances(const Eigen::MatrixXd& draws) {
  const int n = static_cast<int>(draws.rows());
  require(n >= 2, "sample_variances: need at least 2 draws");
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  return (draws.rowwise() - mean).array().square().colwise().sum() / (n - 1);
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& draws) {
  const int n = static_cast<int>(draws.rows());
  require(n >= 2, "sample_covariance: need at least 2 draws");
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  return (centered.transpose() * centered) / (n - 1);
}

Metric diagonal_metric_from_draws(const Eigen::MatrixXd& draws) {
  const double n = static_cast<double>(draws.rows());
  if (draws.rows() < 2)
    throw std::invalid_argument(
        "diagonal_metric_from_draws: need at least 2 draws; use an identity "
        "metric until then");
  const Eigen::VectorXd var = sample_variances(draws);
  const Eigen::VectorXd inv_diag =
      (n / (n + kShrinkagePrior)) * var.array() +
      kShrinkageIdentity * (kShrinkagePrior / (n + kShrinkagePrior));
  return Metric::diagonal(inv_diag);
}

Metric dense_metric_from_inverse(const Eigen::MatrixXd& inverse_metric) {
  auto l = cholesky_lower(inverse_metric);
  if (!l) {
    const int d = static_cast<int>(inverse_metric.rows());
    const double bump = 1e-8 * inverse_metric.trace() / d;
    Eigen::MatrixXd repaired = inverse_metric;
    repaired.diagonal().array() += bump;
    l = cholesky_lower(repaired);
    if (!l)
      throw std::runtime_error(
          "dense metric: inverse-metric estimate is not positive definite");
  }
  return Metric::dense(*l);
}

Metric dense_metric_from_draws(const Eigen::MatrixXd& draws) {
  const double n = static_cast<double>(draws.rows());
  if (draws.rows() < 2)
    throw std::invalid_argument(
        "dense_metric_from_draws: need at least 2 draws; use an identity "
        "metric until then");
  const int d = static_cast<int>(draws.cols());
  const Eigen::MatrixXd cov = sample_covariance(draws);
  const Eigen::MatrixXd inv_metric =
      (n / (n + kShrinkagePrior)) * cov +
      kShrinkageIdentity * (kShrinkagePrior / (n + kShrinkagePrior)) *
          Eigen::MatrixXd::Identity(d, d);
  return dense_metric_from_inverse(inv_metric);
}

LowRankBuild lowrank_metric_from_hessian(const TargetDensity& target,
                                         const Eigen::VectorXd& anchor,
                                         const Eigen::VectorXd& diag_estimate,
                                         int rank, Rng& rng,
                                         const LowRankOptions& options) {
  const int d = target.dimension();
  require(anchor.size() == d, "lowrank: anchor dimension mismatch");
  require(diag_estimate.size() == d, "lowrank: diagonal estimate mismatch");
  require((diag_estimate.array() > 0).all() && diag_estimate.allFinite(),
          "lowrank: diagonal estimate must be positive");
  require(rank >= 1, "lowrank: rank must be >= 1");

  LowRankBuild build;
  const int kept = std::min(rank, d);
  const int pairs = std::min(rank + 1, d);
  const double step =
      options.fd_step > 0 ? options.fd_step : default_fd_step(anchor);
  const Eigen::VectorXd sqrt_d = diag_estimate.cwiseSqrt();

  MatVecOracle oracle{d, [&](const Eigen::VectorXd& x) {
                        const Eigen::VectorXd u = sqrt_d.cwiseProduct(x);
                        const double nu = u.norm();
                        if (nu == 0.0) return Eigen::VectorXd::Zero(d).eval();
                        const Eigen::VectorXd hv =
                            hessian_vector_product(target, anchor, u / nu, step);
                        return (nu * sqrt_d.cwiseProduct(hv)).eval();
                      }};

  EigenPairs pairs_out;
  try {
    pairs_out = lanczos_extreme_eigs(oracle, pairs, rng, options.lanczos_tol,
                                     options.max_iter);
  } catch (const std::domain_error& e) {
    build.metric = Metric::diagonal(diag_estimate);
    build.used_fallback = true;
    build.converged = false;
    build.warnings.push_back(std::string("curvature probe failed: ") +
                             e.what());
    return build;
  }

  build.converged = pairs_out.all_converged();
  Eigen::VectorXd lam = pairs_out.values.cwiseAbs();
  for (int i = 0; i < pairs_out.count(); ++i)
    if (pairs_out.values[i] < 0) ++build.negative_curvature;
  if (build.negative_curvature > 0)
    build.warnings.push_back(std::to_string(build.negative_curvature) +
                             " negative-curvature directions taken by "
                             "absolute value");

  const double tail = lam[pairs - 1];
  if (!build.converged || !(tail > 0) || !lam.allFinite()) {
    build.metric = Metric::diagonal(diag_estimate);
    build.used_fallback = true;
    build.warnings.push_back(
        "curvature spectrum unusable; fell back to the diagonal estimate");
    return build;
  }

  build.metric = Metric::low_rank(pairs_out.vectors.leftCols(kept),
                                  lam.head(kept), tail, diag_estimate);
  return build;
}

Eigen::MatrixXd wishart_blend(const Eigen::MatrixXd& sigma0,
                              const Eigen::MatrixXd& draws, double nu0) {
  const int d = static_cast<int>(sigma0.rows());
  require(sigma0.rows() == sigma0.cols(), "wishart_blend: sigma0 not square");
  const int n = static_cast<int>(draws.rows());
  if (n > 0)
    require(static_cast<int>(draws.cols()) == d,
            "wishart_blend: draw dimension mismatch");
  if (nu0 <= 0) nu0 = d + 5.0;
  require(nu0 > d + 1, "wishart_blend: nu0 must exceed d + 1");

  Eigen::MatrixXd numer = (nu0 - d - 1) * sigma0;
  if (n >= 2) numer += (n - 1) * sample_covariance(draws);
  return numer / (nu0 + n - d - 1);
}

}  // namespace hmc
