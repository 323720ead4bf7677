#include "hmc/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double hamiltonian(const Metric& metric, const PhaseState& z) {
  return z.potential + metric.kinetic_energy(z.p);
}

// Trajectory endpoint snapshot: position and velocity M^{-1} p.
struct TreeEnd {
  Eigen::VectorXd q;
  Eigen::VectorXd v;
};

struct TreeAccumulator {
  double sum_metro = 0.0;
  long states = 0;
};

struct Subtree {
  bool valid = false;
  bool divergent = false;
  double log_sum_weight = kNegInf;
  Eigen::VectorXd proposal_q;
  double proposal_h = 0.0;
  TreeEnd back;   // state adjacent to the existing trajectory
  TreeEnd front;  // far end in the build direction
};

// Builds a subtree of 2^depth states extending z in the direction of
// signed_step, accumulating the Metropolis statistic for every state
// computed (including those in rejected subtrees).
Subtree build_tree(const TargetDensity& target, const Metric& metric,
                   PhaseState& z, double signed_step, int depth, double h0,
                   Rng& rng, TreeAccumulator& accum) {
  if (depth == 0) {
    leapfrog_step(target, metric, z, signed_step);
    Subtree leaf;
    const double h = hamiltonian(metric, z);
    const double delta = h - h0;
    accum.states += 1;
    accum.sum_metro += std::isfinite(delta) ? std::min(1.0, std::exp(-delta)) : 0.0;
    leaf.back = leaf.front = TreeEnd{z.q, metric.inverse_multiply(z.p)};
    leaf.proposal_q = z.q;
    leaf.proposal_h = h;
    if (!std::isfinite(delta) || delta > kDivergenceThreshold) {
      leaf.divergent = true;
      return leaf;
    }
    leaf.valid = true;
    leaf.log_sum_weight = -delta;
    return leaf;
  }

  Subtree first =
      build_tree(target, metric, z, signed_step, depth - 1, h0, rng, accum);
  if (!first.valid) return first;
  Subtree second =
      build_tree(target, metric, z, signed_step, depth - 1, h0, rng, accum);

  Subtree combined;
  combined.divergent = second.divergent;
  combined.back = first.back;
  combined.front = second.front;
  combined.log_sum_weight =
      log_sum_exp(first.log_sum_weight, second.log_sum_weight);
  if (!second.valid) return combined;

  // Uniform multinomial choice between the two halves.
  const double accept_second =
      std::exp(second.log_sum_weight - combined.log_sum_weight);
  if (rng.uniform() < accept_second) {
    combined.proposal_q = second.proposal_q;
    combined.proposal_h = second.proposal_h;
  } else {
    combined.proposal_q = first.proposal_q;
    combined.proposal_h = first.proposal_h;
  }

  // Sub-trajectory U-turn test in time order.
  const double dir = signed_step > 0 ? 1.0 : -1.0;
  const Eigen::VectorXd dq = dir * (combined.front.q - combined.back.q);
  combined.valid =
      dq.dot(combined.back.v) > 0 && dq.dot(combined.front.v) > 0;
  return combined;
}

}  // namespace

PhaseState make_phase_state(const TargetDensity& target,
                            const Eigen::VectorXd& q) {
  PhaseState z;
  z.q = q;
  z.p = Eigen::VectorXd::Zero(q.size());
  z.grad = target.gradient(q);
  z.potential = target.potential(q);
  return z;
}

void leapfrog_step(const TargetDensity& target, const Metric& metric,
                   PhaseState& state, double step) {
  state.p -= (step / 2.0) * state.grad;
  state.q += step * metric.inverse_multiply(state.p);
  state.grad = target.gradient(state.q);
  state.potential = target.potential(state.q);
  state.p -= (step / 2.0) * state.grad;
}

Transition hmc_transition(const TargetDensity& target, const Metric& metric,
                          const Eigen::VectorXd& q0, double step,
                          int max_depth, Rng& rng) {
  if (!(step > 0) || !std::isfinite(step))
    throw std::invalid_argument("hmc_transition: step must be positive");
  if (max_depth < 1)
    throw std::invalid_argument("hmc_transition: max_depth must be >= 1");

  PhaseState z = make_phase_state(target, q0);
  z.p = metric.sample_momentum(rng);
  const double h0 = hamiltonian(metric, z);
  if (!std::isfinite(h0))
    throw std::domain_error("hmc_transition: non-finite energy at the start");

  PhaseState z_minus = z;
  PhaseState z_plus = z;
  TreeEnd end_minus{z.q, metric.inverse_multiply(z.p)};
  TreeEnd end_plus = end_minus;

  Eigen::VectorXd sample_q = z.q;
  double sample_h = h0;
  double log_sum_weight = 0.0;
  TreeAccumulator accum;
  TransitionStats stats;

  for (int doubling = 0; doubling < max_depth; ++doubling) {
    const bool forward = rng.uniform() < 0.5;
    PhaseState& z_end = forward ? z_plus : z_minus;
    const double signed_step = forward ? step : -step;

    Subtree subtree = build_tree(target, metric, z_end, signed_step, doubling,
                                 h0, rng, accum);
    if (forward)
      end_plus = subtree.front;
    else
      end_minus = subtree.front;

    if (subtree.divergent) {
      stats.divergent = true;
      break;
    }
    if (!subtree.valid) break;

    // Biased progressive selection toward the newer subtree.
    const double accept_new =
        std::exp(subtree.log_sum_weight - log_sum_weight);
    if (rng.uniform() < accept_new) {
      sample_q = subtree.proposal_q;
      sample_h = subtree.proposal_h;
    }
    log_sum_weight = log_sum_exp(log_sum_weight, subtree.log_sum_weight);
    stats.depth = doubling + 1;

    // Whole-trajectory U-turn test.
    const Eigen::VectorXd dq = end_plus.q - end_minus.q;
    if (!(dq.dot(end_minus.v) > 0 && dq.dot(end_plus.v) > 0)) break;
  }

  stats.accept_stat =
      accum.states > 0 ? accum.sum_metro / static_cast<double>(accum.states)
                       : 0.0;
  stats.energy_error = sample_h - h0;
  stats.grad_evals = accum.states + 1;
  return Transition{std::move(sample_q), stats};
}

StepSizeAdapter::StepSizeAdapter(double target_accept) : target_(target_accept) {
  if (!(target_accept > 0) || !(target_accept < 1))
    throw std::invalid_argument("step adapter: target accept must be in (0,1)");
  restart(1.0);
}

void StepSizeAdapter::restart(double step_init) {
  if (!(step_init > 0) || !std::isfinite(step_init))
    throw std::invalid_argument("step adapter: initial step must be positive");
  mu_ = std::log(10.0 * step_init);
  log_step_ = std::log(step_init);
  log_step_avg_ = 0.0;
  h_bar_ = 0.0;
  count_ = 0;
}

void StepSizeAdapter::update(double accept_stat) {
  constexpr double kGamma = 0.05;
  constexpr double kT0 = 10.0;
  constexpr double kKappa = 0.75;
  accept_stat = std::min(1.0, std::max(0.0, accept_stat));
  ++count_;
  const double eta = 1.0 / (static_cast<double>(count_) + kT0);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_stat);
  log_step_ = mu_ - std::sqrt(static_cast<double>(count_)) / kGamma * h_bar_;
  const double w = std::pow(static_cast<double>(count_), -kKappa);
  log_step_avg_ = w * log_step_ + (1.0 - w) * log_step_avg_;
}

double find_initial_stepsize(const TargetDensity& target, const Metric& metric,
                             const Eigen::VectorXd& q, Rng& rng) {
  double step = 1.0;
  PhaseState z0 = make_phase_state(target, q);
  if (!std::isfinite(z0.potential) || !z0.grad.allFinite())
    throw std::domain_error("initial stepsize: non-finite start point");

  // Accept probability of a single leapfrog step, fresh momentum per probe.
  auto probe = [&](double candidate) {
    PhaseState z = z0;
    z.p = metric.sample_momentum(rng);
    const double h0 = hamiltonian(metric, z);
    leapfrog_step(target, metric, z, candidate);
    const double h1 = hamiltonian(metric, z);
    return std::isfinite(h1) ? std::exp(h0 - h1) : 0.0;
  };

  double ratio = probe(step);
  const int direction = ratio > 0.5 ? 1 : -1;
  for (int i = 0; i < 200; ++i) {
    // Grow until the accept probability first drops through 0.5, or shrink
    // until it first recovers above it.
    if (direction > 0 && !(ratio > 0.5)) return step;
    if (direction < 0 && ratio >= 0.5) return step;
    step = direction > 0 ? step * 2.0 : step / 2.0;
    if (step > 1e16)
      throw std::runtime_error(
          "initial stepsize: step grew without bound; the density looks flat");
    if (step < 1e-16)
      throw std::runtime_error(
          "initial stepsize: no stable step found; the density looks singular");
    ratio = probe(step);
  }
  return step;
}

}  // namespace hmc
