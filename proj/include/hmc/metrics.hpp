#ifndef HMC_METRICS_HPP
#define HMC_METRICS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmc/rng.hpp"
#include "hmc/targets.hpp"

namespace hmc {

// Euclidean metric M for the kinetic energy p^T M^{-1} p / 2, stored through
// a structured factorization L L^T = M^{-1}:
//   Diagonal: M^{-1} = diag(inverse_diagonal)
//   Dense:    M^{-1} = L L^T with explicit lower-triangular L
//   LowRank:  M^{-1} = D^{1/2} (U diag(1/lambda_i - 1/tail) U^T + I/tail) D^{1/2}
// where the LowRank form is the inverse of
//   M = D^{-1/2} (U diag(lambda_i - tail) U^T + tail I) D^{-1/2}.
class Metric {
 public:
  enum class Kind { Diagonal, Dense, LowRank };

  // Zero-dimensional placeholder so result aggregates can default-construct;
  // every usable metric comes from the named factories below.
  Metric() = default;

  static Metric identity(int dim);
  static Metric diagonal(Eigen::VectorXd inverse_diagonal);
  // L must be lower triangular with positive diagonal.
  static Metric dense(Eigen::MatrixXd factor_lower);
  // basis: d x k orthonormal columns; eigenvalues: k descending values with
  // eigenvalues[k-1] >= tail > 0; rescale: positive d-vector (the diagonal
  // of D).
  static Metric low_rank(Eigen::MatrixXd basis, Eigen::VectorXd eigenvalues,
                         double tail, Eigen::VectorXd rescale);

  Kind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return dim_; }
  int rank() const noexcept { return static_cast<int>(eigenvalues_.size()); }

  // y = L x
  Eigen::VectorXd factor_multiply(const Eigen::VectorXd& x) const;
  // y = L^T x
  Eigen::VectorXd factor_transpose_multiply(const Eigen::VectorXd& x) const;
  // y = L^{-1} x
  Eigen::VectorXd factor_solve(const Eigen::VectorXd& x) const;
  // y = L^{-T} x
  Eigen::VectorXd factor_transpose_solve(const Eigen::VectorXd& x) const;

  // y = M^{-1} x = L L^T x
  Eigen::VectorXd inverse_multiply(const Eigen::VectorXd& x) const;
  // y = M x
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
  // p ~ N(0, M), drawn as p = L^{-T} z with z standard normal.
  Eigen::VectorXd sample_momentum(Rng& rng) const;
  // p^T M^{-1} p / 2
  double kinetic_energy(const Eigen::VectorXd& p) const;

  Eigen::MatrixXd dense_inverse() const;  // materialize M^{-1}
  Eigen::MatrixXd dense_metric() const;   // materialize M
  Eigen::VectorXd metric_diagonal() const;
  // Diagonal metric with the same diag(M); used by the diagonal-sparsity
  // mode to strip off-diagonal structure.
  Metric collapsed_to_diagonal() const;

  const Eigen::VectorXd& inverse_diagonal() const { return inv_diag_; }
  const Eigen::MatrixXd& factor_lower() const { return factor_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double tail_eigenvalue() const { return tail_; }
  const Eigen::VectorXd& rescale_diagonal() const { return rescale_; }

  std::string kind_name() const;

 private:
  Kind kind_ = Kind::Diagonal;
  int dim_ = 0;
  Eigen::VectorXd inv_diag_;       // Diagonal
  Eigen::VectorXd inv_diag_sqrt_;  // Diagonal
  Eigen::MatrixXd factor_;         // Dense
  Eigen::MatrixXd basis_;          // LowRank
  Eigen::VectorXd eigenvalues_;    // LowRank
  double tail_ = 0.0;              // LowRank
  Eigen::VectorXd rescale_;        // LowRank
  Eigen::VectorXd rescale_sqrt_;   // LowRank
};

// Per-coordinate shrinkage estimate of the inverse metric from draws
// (rows = draws): (n / (n + 5)) var + 1e-3 (5 / (n + 5)). Requires n >= 2.
Metric diagonal_metric_from_draws(const Eigen::MatrixXd& draws);

// Dense analogue with the same shrinkage toward 1e-3 I. If the shrunk
// covariance fails to factor, one retry adds 1e-8 tr(S)/d to the diagonal.
Metric dense_metric_from_draws(const Eigen::MatrixXd& draws);

// Dense metric from an explicit inverse-metric (covariance) estimate, with
// the same single-retry regularization convention.
Metric dense_metric_from_inverse(const Eigen::MatrixXd& inverse_metric);

struct LowRankOptions {
  double fd_step = 0.0;      // <= 0 selects default_fd_step(anchor)
  double lanczos_tol = 1e-6;
  int max_iter = 0;          // <= 0 selects the Lanczos default
};

struct LowRankBuild {
  Metric metric;
  bool used_fallback = false;     // fell back to Diagonal(diag_estimate)
  bool converged = true;          // Lanczos convergence on all pairs
  int negative_curvature = 0;     // eigenvalues taken by absolute value
  std::vector<std::string> warnings;
};

// Low-rank metric from the rescaled Hessian B = D^{1/2} H(anchor) D^{1/2},
// D = diag(diag_estimate), probed matrix-free through finite-difference
// Hessian-vector products. Extracts min(rank + 1, d) extreme pairs; the
// last supplies the tail value and the leading min(rank, d) the retained
// directions. Negative eigenvalues enter by absolute value and are counted.
LowRankBuild lowrank_metric_from_hessian(const TargetDensity& target,
                                         const Eigen::VectorXd& anchor,
                                         const Eigen::VectorXd& diag_estimate,
                                         int rank, Rng& rng,
                                         const LowRankOptions& options = {});

// Inverse-Wishart posterior-mean blend of a prior covariance sigma0 (prior
// mass nu0) with the sample covariance of draws:
//   ((nu0 - d - 1) sigma0 + (n - 1) S) / (nu0 + n - d - 1).
// With n in {0, 1} the sample term vanishes. nu0 <= 0 selects d + 5.
Eigen::MatrixXd wishart_blend(const Eigen::MatrixXd& sigma0,
                              const Eigen::MatrixXd& draws, double nu0 = 0.0);

// Unbiased per-coordinate variances / covariance of draws (rows = draws).
Eigen::VectorXd sample_variances(const Eigen::MatrixXd& draws);
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& draws);

}  // namespace hmc

#endif
