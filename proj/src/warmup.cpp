#include "hmc/warmup.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace hmc {

int WarmupSchedule::total() const {
  int t = init_draws + final_draws;
  for (int w : window_sizes) t += w;
  return t;
}

WarmupSchedule WarmupSchedule::default_schedule() { return WarmupSchedule{}; }

WarmupSchedule WarmupSchedule::short_schedule(int window_size) {
  WarmupSchedule s;
  s.window_sizes = {window_size};
  return s;
}

void AdaptationConfig::validate() const {
  if (schedule.init_draws < 1 || schedule.final_draws < 1)
    throw std::invalid_argument("warmup: init and final phases need >= 1 draw");
  for (int w : schedule.window_sizes) {
    if (w < 2)
      throw std::invalid_argument("warmup: window sizes must be >= 2");
    if (mode == AdaptationMode::Switching && w < 10)
      throw std::invalid_argument(
          "warmup: switching selection needs window sizes >= 10");
  }
  if (candidates.empty())
    throw std::invalid_argument("warmup: candidate list is empty");
  if (max_depth < 1)
    throw std::invalid_argument("warmup: max_depth must be >= 1");
  if (!(target_accept > 0) || !(target_accept < 1))
    throw std::invalid_argument("warmup: target accept must be in (0,1)");
}

double WarmupResult::final_criterion() const {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  return windows.back().selection.chosen_criterion();
}

double ChainResult::final_criterion() const {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  return windows.back().selection.chosen_criterion();
}

namespace {

struct PhaseRun {
  int transitions = 0;
  long grad_evals = 0;
  int divergences = 0;
  bool finite = true;
};

// Runs `count` adapting transitions, appending draws to `draws` starting at
// row `offset`.
PhaseRun run_phase(const CountingTarget& target, const Metric& metric,
                   StepSizeAdapter& adapter, Eigen::VectorXd& q,
                   Eigen::MatrixXd& draws, int offset, int count,
                   int max_depth, Rng& rng) {
  PhaseRun out;
  const long grad_before = target.gradient_evals();
  for (int i = 0; i < count; ++i) {
    Transition t = hmc_transition(target, metric, q, adapter.step(), max_depth,
                                  rng);
    adapter.update(t.stats.accept_stat);
    q = t.q;
    if (!q.allFinite()) {
      out.finite = false;
      break;
    }
    draws.row(offset + i) = q.transpose();
    out.transitions += 1;
    out.divergences += t.stats.divergent ? 1 : 0;
  }
  out.grad_evals = target.gradient_evals() - grad_before;
  return out;
}

}  // namespace

WarmupResult run_warmup(const TargetDensity& raw_target,
                        const AdaptationConfig& config,
                        const Eigen::VectorXd& q_init, Rng& rng) {
  config.validate();
  const CountingTarget target(raw_target);
  const int d = target.dimension();
  if (q_init.size() != d)
    throw std::invalid_argument("run_warmup: q_init dimension mismatch");

  WarmupResult result;
  result.draws.resize(config.schedule.total(), d);

  Metric metric = Metric::identity(d);
  StepSizeAdapter adapter(config.target_accept);
  Eigen::VectorXd q = q_init;

  // Phase 1: settle under the identity metric; retry from jittered starts
  // when the trajectory goes non-finite.
  constexpr int kMaxStartAttempts = 10;
  bool settled = false;
  PhaseRun init_run;
  long init_adapt_grads = 0;
  for (int attempt = 0; attempt <= kMaxStartAttempts; ++attempt) {
    result.start_retries = attempt;
    q = q_init;
    if (attempt > 0)
      for (int i = 0; i < d; ++i) q[i] += rng.uniform(-2.0, 2.0);
    const long grad_before = target.gradient_evals();
    try {
      if (!std::isfinite(target.potential(q)) ||
          !target.gradient(q).allFinite()) {
        init_adapt_grads += target.gradient_evals() - grad_before;
        continue;
      }
      adapter.restart(find_initial_stepsize(target, metric, q, rng));
    } catch (const std::exception&) {
      init_adapt_grads += target.gradient_evals() - grad_before;
      continue;
    }
    init_adapt_grads += target.gradient_evals() - grad_before;
    try {
      init_run = run_phase(target, metric, adapter, q, result.draws, 0,
                           config.schedule.init_draws, config.max_depth, rng);
    } catch (const std::domain_error&) {
      init_run = PhaseRun{};
      init_run.finite = false;
    }
    if (init_run.finite && init_run.transitions == config.schedule.init_draws) {
      settled = true;
      break;
    }
    // Failed attempt: its transition work is adaptation overhead.
    init_adapt_grads += init_run.grad_evals;
    init_run = PhaseRun{};
  }
  if (!settled)
    throw ChainAbort(
        "warmup could not settle: trajectories stayed non-finite after " +
        std::to_string(kMaxStartAttempts) + " jittered restarts");
  result.ledger.push_back({"init", init_run.transitions, init_run.grad_evals,
                           init_adapt_grads, init_run.divergences});
  result.divergences += init_run.divergences;

  // Adaptation windows.
  int offset = config.schedule.init_draws;
  for (size_t w = 0; w < config.schedule.window_sizes.size(); ++w) {
    const int size = config.schedule.window_sizes[w];
    PhaseRun run = run_phase(target, metric, adapter, q, result.draws, offset,
                             size, config.max_depth, rng);
    if (!run.finite)
      throw ChainAbort("warmup window " + std::to_string(w + 1) +
                       " produced a non-finite trajectory");
    const Eigen::MatrixXd window_draws = result.draws.middleRows(offset, size);
    offset += size;
    result.divergences += run.divergences;

    const long adapt_before = target.gradient_evals();
    WindowRecord record;
    record.metric_during = metric;

    SelectOptions opts;
    opts.nu0 = config.nu0;
    opts.diagonal_sparsity = config.diagonal_sparsity;
    opts.window_index = static_cast<int>(w);
    opts.criterion = config.criterion;

    if (config.mode == AdaptationMode::Switching) {
      SelectionOutcome outcome = evaluate_and_select(
          window_draws, config.candidates, target, rng, opts);
      metric = outcome.metric;
      record.selection = std::move(outcome.report);
    } else {
      const CandidateDescriptor& desc = config.candidates.front();
      if (size >= 10) {
        SelectionOutcome outcome =
            evaluate_and_select(window_draws, {desc}, target, rng, opts);
        metric = outcome.metric;
        record.selection = std::move(outcome.report);
      } else {
        // Window too small to score the candidate; rebuild directly.
        CandidateBuild build =
            build_candidate(desc, window_draws, target, rng, opts);
        record.selection.window_index = static_cast<int>(w);
        record.selection.warnings.push_back(
            "window too small for criterion evaluation");
        CandidateEvaluation eval;
        eval.descriptor = desc;
        eval.criterion = std::numeric_limits<double>::quiet_NaN();
        eval.feasible = build.feasible;
        eval.warnings = build.warnings;
        record.selection.candidates.push_back(std::move(eval));
        record.selection.chosen = build.feasible ? 0 : -1;
        metric = build.feasible ? build.metric
                                : diagonal_metric_from_draws(window_draws);
      }
    }

    // Step size restarts from a fresh search against the new metric.
    adapter.restart(find_initial_stepsize(target, metric, q, rng));
    record.metric_after = metric;
    record.step_after = adapter.step();
    record.selection.window_index = static_cast<int>(w);

    const long adapt_grads = target.gradient_evals() - adapt_before;
    result.ledger.push_back({"window-" + std::to_string(w + 1),
                             run.transitions, run.grad_evals, adapt_grads,
                             run.divergences});
    result.windows.push_back(std::move(record));
  }

  // Final phase: step-size polish only.
  PhaseRun final_run =
      run_phase(target, metric, adapter, q, result.draws, offset,
                config.schedule.final_draws, config.max_depth, rng);
  if (!final_run.finite)
    throw ChainAbort("warmup final phase produced a non-finite trajectory");
  result.ledger.push_back({"final", final_run.transitions,
                           final_run.grad_evals, 0, final_run.divergences});
  result.divergences += final_run.divergences;

  result.metric = metric;
  result.step = adapter.averaged_step();
  result.grad_evals = target.gradient_evals();
  return result;
}

ChainResult run_chain(const TargetDensity& target,
                      const AdaptationConfig& config, int sampling_draws,
                      const Eigen::VectorXd& q_init, Rng& rng) {
  if (sampling_draws < 1)
    throw std::invalid_argument("run_chain: need at least 1 sampling draw");

  WarmupResult warm = run_warmup(target, config, q_init, rng);

  ChainResult chain;
  chain.metric = warm.metric;
  chain.step = warm.step;
  chain.warmup_grad_evals = warm.grad_evals;
  chain.warmup_divergences = warm.divergences;
  chain.windows = std::move(warm.windows);
  chain.warmup_ledger = std::move(warm.ledger);
  chain.start_retries = warm.start_retries;

  const CountingTarget counting(target);
  const int d = target.dimension();
  chain.draws.resize(sampling_draws, d);
  chain.stats.reserve(sampling_draws);
  Eigen::VectorXd q = warm.draws.row(warm.draws.rows() - 1).transpose();

  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < sampling_draws; ++i) {
    Transition t = hmc_transition(counting, chain.metric, q, chain.step,
                                  config.max_depth, rng);
    q = t.q;
    chain.draws.row(i) = q.transpose();
    chain.divergences += t.stats.divergent ? 1 : 0;
    chain.stats.push_back(t.stats);
  }
  const auto t1 = std::chrono::steady_clock::now();
  chain.sampling_seconds = std::chrono::duration<double>(t1 - t0).count();
  chain.sampling_grad_evals = counting.gradient_evals();
  return chain;
}

}  // namespace hmc
