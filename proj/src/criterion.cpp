#include "hmc/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hmc/linalg.hpp"

namespace hmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double timestep_limit(double lambda_abs) {
  if (!(lambda_abs > 0) || !std::isfinite(lambda_abs))
    throw std::invalid_argument("timestep_limit: need a positive eigenvalue");
  return 2.0 / std::sqrt(lambda_abs);
}

double condition_criterion(double lambda_max, double lambda_min) {
  if (!(lambda_min > 0) || !(lambda_max >= lambda_min))
    throw std::invalid_argument(
        "condition_criterion: need lambda_max >= lambda_min > 0");
  return std::sqrt(lambda_max / lambda_min);
}

CovarianceOp CovarianceOp::from_draws(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 2)
    throw std::invalid_argument("covariance: need at least 2 draws");
  const int d = static_cast<int>(draws.cols());
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  const double denom = static_cast<double>(draws.rows() - 1);
  return CovarianceOp{d, [centered, denom](const Eigen::VectorXd& w) {
                        return (centered.transpose() * (centered * w) / denom)
                            .eval();
                      }};
}

CovarianceOp CovarianceOp::from_matrix(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols())
    throw std::invalid_argument("covariance: matrix must be square");
  return CovarianceOp{static_cast<int>(sigma.rows()),
                      [sigma](const Eigen::VectorXd& w) {
                        return (sigma * w).eval();
                      }};
}

CriterionValue selection_criterion(const Metric& metric,
                                   const TargetDensity& target,
                                   const Eigen::VectorXd& eval_point,
                                   const CovarianceOp& covariance, Rng& rng,
                                   const CriterionOptions& options) {
  const int d = target.dimension();
  if (metric.dimension() != d || covariance.dimension != d ||
      eval_point.size() != d)
    throw std::invalid_argument("selection_criterion: dimension mismatch");

  const double step =
      options.fd_step > 0 ? options.fd_step : default_fd_step(eval_point);

  CriterionValue out;

  // |lambda|_max of L^T H(q) L through curvature probes.
  MatVecOracle hessian_side{d, [&](const Eigen::VectorXd& x) {
                              const Eigen::VectorXd u = metric.factor_multiply(x);
                              const double nu = u.norm();
                              if (nu == 0.0)
                                return Eigen::VectorXd::Zero(d).eval();
                              const Eigen::VectorXd hv = hessian_vector_product(
                                  target, eval_point, u / nu, step);
                              return (nu * metric.factor_transpose_multiply(hv))
                                  .eval();
                            }};
  try {
    const EigenPairs h = lanczos_extreme_eigs(
        hessian_side, 1, rng, options.lanczos_tol, options.max_iter);
    out.hessian_eig = std::abs(h.values[0]);
    out.converged = out.converged && h.all_converged();
  } catch (const std::domain_error&) {
    out.hessian_eig = kInf;
    out.converged = false;
  }

  // lambda_max of L^{-1} Sigma L^{-T}.
  MatVecOracle covariance_side{d, [&](const Eigen::VectorXd& x) {
                                 return metric
                                     .factor_solve(covariance.apply(
                                         metric.factor_transpose_solve(x)))
                                     .eval();
                               }};
  const EigenPairs c = lanczos_extreme_eigs(
      covariance_side, 1, rng, options.lanczos_tol, options.max_iter);
  out.covariance_eig = std::abs(c.values[0]);
  out.converged = out.converged && c.all_converged();

  const double product = out.hessian_eig * out.covariance_eig;
  out.value = std::isfinite(product) ? std::sqrt(product) : kInf;
  if (!std::isfinite(out.value)) {
    out.value = kInf;
    out.converged = false;
  }
  return out;
}

double selection_criterion(const Metric& metric, const TargetDensity& target,
                           const Eigen::VectorXd& eval_point,
                           const Eigen::MatrixXd& test_draws, Rng& rng,
                           const CriterionOptions& options) {
  if (test_draws.rows() < 2)
    throw std::invalid_argument("selection_criterion: need >= 2 test draws");
  return selection_criterion(metric, target, eval_point,
                             CovarianceOp::from_draws(test_draws), rng, options)
      .value;
}

CriterionValue selection_criterion_dense(const Metric& metric,
                                         const TargetDensity& target,
                                         const Eigen::VectorXd& eval_point,
                                         const Eigen::MatrixXd& sigma,
                                         const CriterionOptions& options) {
  const int d = target.dimension();
  if (metric.dimension() != d || sigma.rows() != d || sigma.cols() != d ||
      eval_point.size() != d)
    throw std::invalid_argument("selection_criterion_dense: dimension mismatch");
  const double step =
      options.fd_step > 0 ? options.fd_step : default_fd_step(eval_point);

  // Materialize H(q) column by column from curvature probes.
  Eigen::MatrixXd hessian(d, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    e[i] = 1.0;
    hessian.col(i) = hessian_vector_product(target, eval_point, e, step);
    e[i] = 0.0;
  }
  hessian = ((hessian + hessian.transpose()) / 2.0).eval();

  Eigen::MatrixXd lt_h_l(d, d);
  Eigen::MatrixXd linv_s_lt(d, d);
  for (int i = 0; i < d; ++i) {
    e[i] = 1.0;
    lt_h_l.col(i) = metric.factor_transpose_multiply(
        hessian * metric.factor_multiply(e));
    linv_s_lt.col(i) =
        metric.factor_solve(sigma * metric.factor_transpose_solve(e));
    e[i] = 0.0;
  }
  lt_h_l = ((lt_h_l + lt_h_l.transpose()) / 2.0).eval();
  linv_s_lt = ((linv_s_lt + linv_s_lt.transpose()) / 2.0).eval();

  CriterionValue out;
  out.hessian_eig = std::abs(dense_sym_eig(lt_h_l).values[0]);
  out.covariance_eig = std::abs(dense_sym_eig(linv_s_lt).values[0]);
  out.value = std::sqrt(out.hessian_eig * out.covariance_eig);
  return out;
}

std::string CandidateDescriptor::id() const {
  switch (kind) {
    case Kind::Diagonal:
      return "diagonal";
    case Kind::Dense:
      return "dense";
    case Kind::LowRank:
      return "lowrank-" + std::to_string(rank) +
             (wishart_blend ? "+wishart" : "");
  }
  return "unknown";
}

int CandidateDescriptor::cost_order() const {
  switch (kind) {
    case Kind::Diagonal:
      return 0;
    case Kind::LowRank:
      // Unblended ranks sit between Diagonal and Dense; blended variants
      // carry dense storage and sort after Dense.
      return wishart_blend ? 2000 + rank : 1 + rank;
    case Kind::Dense:
      return 1000;
  }
  return 1 << 30;
}

std::vector<CandidateDescriptor> default_candidate_set() {
  std::vector<CandidateDescriptor> set;
  set.push_back({CandidateDescriptor::Kind::Diagonal, 0, false});
  set.push_back({CandidateDescriptor::Kind::Dense, 0, false});
  for (int rank : {1, 2, 4, 8}) {
    set.push_back({CandidateDescriptor::Kind::LowRank, rank, false});
    set.push_back({CandidateDescriptor::Kind::LowRank, rank, true});
  }
  return set;
}

std::vector<CandidateDescriptor> diagonal_sparsity_candidate_set() {
  std::vector<CandidateDescriptor> set;
  set.push_back({CandidateDescriptor::Kind::Diagonal, 0, false});
  for (int rank : {1, 2, 4, 8})
    set.push_back({CandidateDescriptor::Kind::LowRank, rank, false});
  return set;
}

CandidateDescriptor parse_candidate(const std::string& id) {
  if (id == "diagonal") return {CandidateDescriptor::Kind::Diagonal, 0, false};
  if (id == "dense") return {CandidateDescriptor::Kind::Dense, 0, false};
  const std::string prefix = "lowrank-";
  if (id.rfind(prefix, 0) == 0) {
    std::string rest = id.substr(prefix.size());
    bool blend = false;
    const std::string suffix = "+wishart";
    if (rest.size() > suffix.size() &&
        rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
      blend = true;
      rest = rest.substr(0, rest.size() - suffix.size());
    }
    try {
      const int rank = std::stoi(rest);
      if (rank >= 1) return {CandidateDescriptor::Kind::LowRank, rank, blend};
    } catch (const std::exception&) {
    }
  }
  throw std::invalid_argument(
      "unknown candidate '" + id +
      "'; expected diagonal, dense, lowrank-K, or lowrank-K+wishart");
}

double SelectionReport::chosen_criterion() const {
  if (chosen < 0 || chosen >= static_cast<int>(candidates.size()))
    return std::numeric_limits<double>::quiet_NaN();
  return candidates[chosen].criterion;
}

const CandidateDescriptor& SelectionReport::chosen_descriptor() const {
  if (chosen < 0 || chosen >= static_cast<int>(candidates.size()))
    throw std::logic_error("selection report has no chosen candidate");
  return candidates[chosen].descriptor;
}

CandidateBuild build_candidate(const CandidateDescriptor& descriptor,
                               const Eigen::MatrixXd& draws,
                               const TargetDensity& target, Rng& rng,
                               const SelectOptions& options) {
  CandidateBuild out;
  const int d = static_cast<int>(draws.cols());
  try {
    switch (descriptor.kind) {
      case CandidateDescriptor::Kind::Diagonal:
        out.metric = diagonal_metric_from_draws(draws);
        break;
      case CandidateDescriptor::Kind::Dense:
        out.metric = dense_metric_from_draws(draws);
        break;
      case CandidateDescriptor::Kind::LowRank: {
        const Eigen::VectorXd diag_estimate =
            diagonal_metric_from_draws(draws).inverse_diagonal();
        const Eigen::VectorXd anchor = draws.row(draws.rows() - 1);
        LowRankOptions lr;
        lr.lanczos_tol = options.criterion.lanczos_tol;
        LowRankBuild lrb = lowrank_metric_from_hessian(
            target, anchor, diag_estimate, descriptor.rank, rng, lr);
        out.warnings = lrb.warnings;
        if (descriptor.wishart_blend) {
          if (d > options.dense_blend_limit) {
            out.warnings.push_back(
                "dimension exceeds the dense blend limit; candidate skipped");
            return out;
          }
          const Eigen::MatrixXd sigma0 = lrb.metric.dense_inverse();
          const Eigen::MatrixXd blended =
              wishart_blend(sigma0, draws, options.nu0);
          out.metric = dense_metric_from_inverse(blended);
        } else {
          out.metric = lrb.metric;
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    out.warnings.push_back(std::string("candidate build failed: ") + e.what());
    return out;
  }
  if (options.diagonal_sparsity &&
      out.metric.kind() != Metric::Kind::Diagonal)
    out.metric = out.metric.collapsed_to_diagonal();
  out.feasible = true;
  return out;
}

SelectionOutcome evaluate_and_select(
    const Eigen::MatrixXd& window_draws,
    const std::vector<CandidateDescriptor>& candidates,
    const TargetDensity& target, Rng& rng, const SelectOptions& options) {
  const int n = static_cast<int>(window_draws.rows());
  const int d = static_cast<int>(window_draws.cols());
  if (n < 10)
    throw std::invalid_argument(
        "evaluate_and_select: need at least 10 window draws");
  if (d != target.dimension())
    throw std::invalid_argument("evaluate_and_select: dimension mismatch");
  if (candidates.empty())
    throw std::invalid_argument("evaluate_and_select: empty candidate set");
  for (size_t i = 0; i < candidates.size(); ++i)
    for (size_t j = i + 1; j < candidates.size(); ++j)
      if (candidates[i] == candidates[j])
        throw std::invalid_argument(
            "evaluate_and_select: duplicate candidate " + candidates[i].id());

  const int n_train = (4 * n) / 5;
  const int n_test = n - n_train;
  const Eigen::MatrixXd train = window_draws.topRows(n_train);
  const Eigen::MatrixXd test = window_draws.bottomRows(n_test);

  SelectionReport report;
  report.window_index = options.window_index;

  // Shared evaluation points: min(5, test size) distinct test draws.
  const int n_eval = std::min(5, n_test);
  std::vector<int> pool(n_test);
  for (int i = 0; i < n_test; ++i) pool[i] = i;
  for (int i = 0; i < n_eval; ++i) {
    const int j =
        i + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n_test - i)));
    std::swap(pool[i], pool[j]);
  }
  report.eval_indices.assign(pool.begin(), pool.begin() + n_eval);
  for (int& idx : report.eval_indices) idx += n_train;

  const CovarianceOp test_cov = CovarianceOp::from_draws(test);

  report.candidates.reserve(candidates.size());
  for (const CandidateDescriptor& desc : candidates) {
    CandidateEvaluation eval;
    eval.descriptor = desc;
    CandidateBuild build = build_candidate(desc, train, target, rng, options);
    eval.warnings = build.warnings;
    if (!build.feasible) {
      eval.feasible = false;
      eval.criterion = kInf;
      report.candidates.push_back(std::move(eval));
      continue;
    }
    double worst = 0.0;
    for (int idx : report.eval_indices) {
      const Eigen::VectorXd point = window_draws.row(idx);
      const CriterionValue cv = selection_criterion(
          build.metric, target, point, test_cov, rng, options.criterion);
      if (!cv.converged)
        eval.warnings.push_back("criterion estimate did not fully converge");
      worst = std::max(worst, cv.value);
      if (!std::isfinite(worst)) break;
    }
    eval.criterion = worst;
    eval.feasible = std::isfinite(worst);
    report.candidates.push_back(std::move(eval));
  }

  int best = -1;
  for (int i = 0; i < static_cast<int>(report.candidates.size()); ++i) {
    const CandidateEvaluation& e = report.candidates[i];
    if (!e.feasible) continue;
    if (best < 0 || e.criterion < report.candidates[best].criterion ||
        (e.criterion == report.candidates[best].criterion &&
         e.descriptor.cost_order() <
             report.candidates[best].descriptor.cost_order()))
      best = i;
  }

  SelectionOutcome outcome;
  if (best < 0) {
    report.warnings.push_back(
        "no candidate was feasible; falling back to the diagonal estimate");
    outcome.metric = diagonal_metric_from_draws(window_draws);
    report.chosen = -1;
    outcome.report = std::move(report);
    return outcome;
  }

  report.chosen = best;
  CandidateBuild final_build = build_candidate(
      report.candidates[best].descriptor, window_draws, target, rng, options);
  if (!final_build.feasible) {
    report.warnings.push_back(
        "winner rebuild on the full window failed; keeping the training fit");
    final_build =
        build_candidate(report.candidates[best].descriptor, train, target,
                        rng, options);
  }
  if (!final_build.feasible) {
    report.warnings.push_back(
        "winner could not be rebuilt; falling back to the diagonal estimate");
    outcome.metric = diagonal_metric_from_draws(window_draws);
  } else {
    outcome.metric = final_build.metric;
  }
  outcome.report = std::move(report);
  return outcome;
}

}  // namespace hmc
