#ifndef HMC_CRITERION_HPP
#define HMC_CRITERION_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmc/metrics.hpp"
#include "hmc/rng.hpp"
#include "hmc/targets.hpp"

namespace hmc {

// Largest stable leapfrog step for curvature eigenvalue lambda: 2 / sqrt(|lambda|).
double timestep_limit(double lambda_abs);

// sqrt(lambda_max / lambda_min): the step-size spread a single metric must
// bridge between the stiffest and widest directions.
double condition_criterion(double lambda_max, double lambda_min);

// Symmetric PSD operator w -> Sigma w.
struct CovarianceOp {
  int dimension = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;

  // Implicit centered sample covariance of draws (rows = draws, n >= 2).
  static CovarianceOp from_draws(const Eigen::MatrixXd& draws);
  static CovarianceOp from_matrix(const Eigen::MatrixXd& sigma);
};

struct CriterionOptions {
  double lanczos_tol = 1e-6;
  int max_iter = 0;     // <= 0 selects the Lanczos default
  double fd_step = 0.0; // <= 0 selects default_fd_step(eval_point)
};

struct CriterionValue {
  double value = 0.0;           // +inf when either factor is unusable
  double hessian_eig = 0.0;     // |lambda|_max of L^T H(q) L
  double covariance_eig = 0.0;  // lambda_max of L^{-1} Sigma L^{-T}
  bool converged = true;
};

// Metric quality at eval_point:
//   sqrt( |lambda|_max(L^T H(q) L) * lambda_max(L^{-1} Sigma L^{-T}) )
// with L L^T = M^{-1}. Both eigenvalues are estimated matrix-free: the
// Hessian side through finite-difference Hessian-vector products mapped
// through L, the covariance side through the covariance operator applied to
// L^{-T}-transformed vectors. A value of 1 means the metric matches both
// the local curvature and the spread of the draws.
CriterionValue selection_criterion(const Metric& metric,
                                   const TargetDensity& target,
                                   const Eigen::VectorXd& eval_point,
                                   const CovarianceOp& covariance, Rng& rng,
                                   const CriterionOptions& options = {});

// Convenience overload: covariance from test draws (m >= 2 rows).
double selection_criterion(const Metric& metric, const TargetDensity& target,
                           const Eigen::VectorXd& eval_point,
                           const Eigen::MatrixXd& test_draws, Rng& rng,
                           const CriterionOptions& options = {});

// Dense-eigensolver route over materialized operators; reference path for
// low dimensions.
CriterionValue selection_criterion_dense(const Metric& metric,
                                         const TargetDensity& target,
                                         const Eigen::VectorXd& eval_point,
                                         const Eigen::MatrixXd& sigma,
                                         const CriterionOptions& options = {});

struct CandidateDescriptor {
  enum class Kind { Diagonal, Dense, LowRank };
  Kind kind = Kind::Diagonal;
  int rank = 0;               // LowRank only
  bool wishart_blend = false; // LowRank only

  std::string id() const;
  // Position in the cheap-first tie-break order:
  // Diagonal < LowRank(1) < ... < LowRank(8) < Dense < blended variants.
  int cost_order() const;
  bool operator==(const CandidateDescriptor&) const = default;
};

// Switching candidates: Diagonal, Dense, LowRank(K) and LowRank(K) blended
// with the inverse-Wishart posterior mean, K in {1, 2, 4, 8}.
std::vector<CandidateDescriptor> default_candidate_set();
// Diagonal-sparsity candidates: Diagonal plus LowRank(K) without blending;
// built metrics are collapsed to their diagonal before use.
std::vector<CandidateDescriptor> diagonal_sparsity_candidate_set();

CandidateDescriptor parse_candidate(const std::string& id);

struct CandidateEvaluation {
  CandidateDescriptor descriptor;
  double criterion = 0.0;  // max over evaluation draws; +inf when infeasible
  bool feasible = true;
  std::vector<std::string> warnings;
};

struct SelectionReport {
  int window_index = 0;
  std::vector<CandidateEvaluation> candidates;
  int chosen = -1;
  std::vector<int> eval_indices;  // window-relative draw indices
  std::vector<std::string> warnings;

  double chosen_criterion() const;
  const CandidateDescriptor& chosen_descriptor() const;
};

struct SelectOptions {
  double nu0 = 0.0;            // <= 0 selects d + 5
  bool diagonal_sparsity = false;
  int window_index = 0;
  int dense_blend_limit = 2000;  // skip blends above this dimension
  CriterionOptions criterion;
};

struct SelectionOutcome {
  Metric metric;
  SelectionReport report;
};

// Builds one candidate metric from draws (and the target's curvature for
// low-rank candidates). anchor defaults to the last draw.
struct CandidateBuild {
  bool feasible = false;
  Metric metric;
  std::vector<std::string> warnings;
};
CandidateBuild build_candidate(const CandidateDescriptor& descriptor,
                               const Eigen::MatrixXd& draws,
                               const TargetDensity& target, Rng& rng,
                               const SelectOptions& options = {});

// Splits window draws 80/20 by draw order, builds every candidate from the
// training split, scores each at min(5, test size) distinct uniformly
// sampled test draws against the test-split covariance, keeps the
// smallest-criterion candidate (cost order breaks ties), and rebuilds the
// winner from all window draws. Requires n >= 10.
SelectionOutcome evaluate_and_select(
    const Eigen::MatrixXd& window_draws,
    const std::vector<CandidateDescriptor>& candidates,
    const TargetDensity& target, Rng& rng, const SelectOptions& options = {});

}  // namespace hmc

#endif
