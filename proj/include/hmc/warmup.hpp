#ifndef HMC_WARMUP_HPP
#define HMC_WARMUP_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hmc/criterion.hpp"
#include "hmc/metrics.hpp"
#include "hmc/rng.hpp"
#include "hmc/sampler.hpp"
#include "hmc/targets.hpp"

namespace hmc {

// Staged warmup: an identity-metric settling phase, a sequence of growing
// adaptation windows that each end in a metric rebuild, and a final phase
// that only polishes the step size.
struct WarmupSchedule {
  int init_draws = 75;
  std::vector<int> window_sizes = {25, 50, 100, 200, 500};
  int final_draws = 50;

  int total() const;
  static WarmupSchedule default_schedule();
  // Single adaptation window (default 100 draws): init + window + final.
  static WarmupSchedule short_schedule(int window_size = 100);
};

enum class AdaptationMode { FixedCandidate, Switching };

struct AdaptationConfig {
  WarmupSchedule schedule;
  AdaptationMode mode = AdaptationMode::Switching;
  // Switching: the candidates compared each window. FixedCandidate: only
  // the first entry is used.
  std::vector<CandidateDescriptor> candidates = default_candidate_set();
  bool diagonal_sparsity = false;
  double nu0 = 0.0;  // <= 0 selects d + 5
  int max_depth = 10;
  double target_accept = 0.8;
  CriterionOptions criterion;

  void validate() const;
};

// A chain abandoned warmup (non-finite start that jittering never fixed, or
// an unusable step size).
class ChainAbort : public std::runtime_error {
 public:
  explicit ChainAbort(const std::string& what) : std::runtime_error(what) {}
};

struct PhaseLedgerEntry {
  std::string phase;
  int transitions = 0;
  long transition_grad_evals = 0;
  // Gradient work done between transitions: step-size searches, curvature
  // probes, criterion evaluations.
  long adaptation_grad_evals = 0;
  int divergences = 0;
};

struct WindowRecord {
  SelectionReport selection;
  // Metric in force while the window's draws were generated.
  Metric metric_during;
  // Winner rebuilt from all window draws; in force for the next phase.
  Metric metric_after;
  double step_after = 0.0;
};

struct WarmupResult {
  Metric metric;
  double step = 0.0;
  Eigen::MatrixXd draws;  // schedule.total() rows
  std::vector<WindowRecord> windows;
  std::vector<PhaseLedgerEntry> ledger;
  long grad_evals = 0;  // boundary-exact total across warmup
  int divergences = 0;
  int start_retries = 0;

  double final_criterion() const;
};

// Runs the full warmup protocol. Phase 1 starts from q_init under an
// identity metric and retries from a jittered start (up to 10 times) when
// the trajectory goes non-finite; each window ends with a metric rebuild
// (selection in Switching mode) followed by a step-size re-initialization.
// The returned step is the dual-averaged step from the final phase.
WarmupResult run_warmup(const TargetDensity& target,
                        const AdaptationConfig& config,
                        const Eigen::VectorXd& q_init, Rng& rng);

struct ChainResult {
  Eigen::MatrixXd draws;  // post-warmup draws only
  std::vector<TransitionStats> stats;
  Metric metric;
  double step = 0.0;
  long warmup_grad_evals = 0;
  long sampling_grad_evals = 0;
  int warmup_divergences = 0;
  int divergences = 0;
  double sampling_seconds = 0.0;
  std::vector<WindowRecord> windows;
  std::vector<PhaseLedgerEntry> warmup_ledger;
  int start_retries = 0;

  double final_criterion() const;
};

// Warmup followed by sampling_draws frozen-configuration draws. Only the
// sampling phase is timed.
ChainResult run_chain(const TargetDensity& target,
                      const AdaptationConfig& config, int sampling_draws,
                      const Eigen::VectorXd& q_init, Rng& rng);

}  // namespace hmc

#endif
