#ifndef HMC_SAMPLER_HPP
#define HMC_SAMPLER_HPP

#include <Eigen/Dense>

#include "hmc/metrics.hpp"
#include "hmc/rng.hpp"
#include "hmc/targets.hpp"

namespace hmc {

// Position, momentum, and cached potential/gradient at the position.
struct PhaseState {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double potential = 0.0;
};

// Builds a phase state at q (momentum zeroed), evaluating the potential and
// gradient once.
PhaseState make_phase_state(const TargetDensity& target,
                            const Eigen::VectorXd& q);

// One leapfrog step (half kick, drift, half kick) in place. Uses the cached
// gradient for the first half kick and evaluates exactly one new gradient.
void leapfrog_step(const TargetDensity& target, const Metric& metric,
                   PhaseState& state, double step);

struct TransitionStats {
  double accept_stat = 0.0;  // mean Metropolis statistic over visited states
  bool divergent = false;
  int depth = 0;             // completed trajectory doublings
  double energy_error = 0.0; // H(selected) - H(initial)
  long grad_evals = 0;
};

struct Transition {
  Eigen::VectorXd q;
  TransitionStats stats;
};

// Energy error above which a trajectory is declared divergent.
inline constexpr double kDivergenceThreshold = 1000.0;

// One dynamic trajectory: doubling binary expansion with multinomial state
// selection biased toward the newer subtree, stopped by the generalized
// U-turn test (end-to-end position difference against the M^{-1}-mapped
// momenta at both ends) or by divergence.
Transition hmc_transition(const TargetDensity& target, const Metric& metric,
                          const Eigen::VectorXd& q0, double step,
                          int max_depth, Rng& rng);

// Nesterov dual averaging on log step size toward a target accept statistic.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double target_accept = 0.8);

  // Re-anchors the adapter at a fresh initial step (shrinkage toward
  // 10 * step_init) and clears the averaging state.
  void restart(double step_init);
  void update(double accept_stat);

  double step() const { return std::exp(log_step_); }
  double averaged_step() const {
    return count_ > 0 ? std::exp(log_step_avg_) : std::exp(log_step_);
  }
  double target_accept() const { return target_; }

 private:
  double target_;
  double mu_ = 0.0;
  double log_step_ = 0.0;
  double log_step_avg_ = 0.0;
  double h_bar_ = 0.0;
  long count_ = 0;
};

// Doubles or halves the step from 1 until a single leapfrog step from q
// crosses an accept probability of 0.5 (fresh momentum per probe).
double find_initial_stepsize(const TargetDensity& target, const Metric& metric,
                             const Eigen::VectorXd& q, Rng& rng);

}  // namespace hmc

#endif
