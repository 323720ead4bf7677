#include "hmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rational(double r, const double* num, const double* den) {
  double p = num[7];
  for (int i = 6; i >= 0; --i) p = p * r + num[i];
  double q = den[7];
  for (int i = 6; i >= 0; --i) q = q * r + den[i];
  return p / q;
}

}  // namespace

double standard_normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw std::invalid_argument("standard_normal_quantile: p must be in (0,1)");

  // PPND16 coefficients (central region, then two tail regions).
  static const double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e+2,
      1.9715909503065514427e+3, 1.3731693765509461125e+4,
      4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static const double b[8] = {
      1.0,                      4.2313330701600911252e+1,
      6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4,
      2.8729085735721942674e+4, 5.2264952788528545610e+3};
  static const double c[8] = {
      1.42343711074968357734e0,  4.63033784615654529590e0,
      5.76949722146069140550e0,  3.64784832476320460504e0,
      1.27045825245236838258e0,  2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static const double d[8] = {
      1.0,                       2.05319162663775882187e0,
      1.67638483018380384940e0,  6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static const double e[8] = {
      6.65790464350110377720e0,  5.46378491116411436990e0,
      1.78482653991729133580e0,  2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static const double f[8] = {
      1.0,                       5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-6,
      1.42151175831644588870e-9, 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * rational(r, a, b);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    value = rational(r - 1.6, c, d);
  } else {
    value = rational(r - 5.0, e, f);
  }
  return q < 0.0 ? -value : value;
}

Eigen::VectorXd fractional_ranks(const Eigen::VectorXd& values) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return values[i] < values[j];
  });

  Eigen::VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // 1-based ranks i+1 .. j+1 averaged over the tie run.
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

Eigen::MatrixXd rank_normalized(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows();
  const Eigen::Index c = chains.cols();
  Eigen::VectorXd pooled(n * c);
  for (Eigen::Index j = 0; j < c; ++j) pooled.segment(j * n, n) = chains.col(j);

  const Eigen::VectorXd ranks = fractional_ranks(pooled);
  const double total = static_cast<double>(n * c);
  Eigen::MatrixXd z(n, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      z(i, j) =
          standard_normal_quantile((ranks[j * n + i] - 0.375) / (total + 0.25));
  return z;
}

Eigen::MatrixXd split_halves(const Eigen::MatrixXd& chains) {
  const Eigen::Index half = chains.rows() / 2;
  if (half < 1)
    throw std::invalid_argument("split_halves: need at least 2 draws");
  Eigen::MatrixXd out(half, 2 * chains.cols());
  for (Eigen::Index j = 0; j < chains.cols(); ++j) {
    out.col(2 * j) = chains.col(j).head(half);
    // For odd lengths the middle draw belongs to neither half.
    out.col(2 * j + 1) = chains.col(j).tail(half);
  }
  return out;
}

namespace {

// Per-lag mean autocovariance across chains, computed on demand. Each chain
// is centered at its own mean; lags use the biased 1/n normalization.
class LaggedAutocovariance {
 public:
  explicit LaggedAutocovariance(const Eigen::MatrixXd& chains)
      : centered_(chains), n_(chains.rows()) {
    centered_.rowwise() -= chains.colwise().mean();
  }

  double mean_acov(Eigen::Index lag) {
    if (lag >= static_cast<Eigen::Index>(cache_.size()))
      cache_.resize(static_cast<size_t>(lag) + 1, kNaN);
    double& slot = cache_[static_cast<size_t>(lag)];
    if (std::isnan(slot)) {
      double total = 0.0;
      for (Eigen::Index j = 0; j < centered_.cols(); ++j)
        total += centered_.col(j).head(n_ - lag).dot(centered_.col(j).tail(n_ - lag));
      slot = total / (static_cast<double>(n_) *
                      static_cast<double>(centered_.cols()));
    }
    return slot;
  }

 private:
  Eigen::MatrixXd centered_;
  Eigen::Index n_;
  std::vector<double> cache_;
};

}  // namespace

double geyer_ess(const Eigen::MatrixXd& chains) {
  const Eigen::Index n = chains.rows();
  const Eigen::Index m = chains.cols();
  if (m < 1 || n < 4)
    throw std::invalid_argument("geyer_ess: need >= 1 chain of >= 4 draws");

  LaggedAutocovariance acov(chains);
  const double mean_var =
      acov.mean_acov(0) * static_cast<double>(n) / static_cast<double>(n - 1);
  double var_plus =
      mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) {
    const Eigen::RowVectorXd means = chains.colwise().mean();
    var_plus += (means.array() - means.mean()).square().sum() /
                static_cast<double>(m - 1);
  }
  if (!(var_plus > 0.0)) return kNaN;

  Eigen::VectorXd rho(n);
  rho.setZero();
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - acov.mean_acov(1)) / var_plus;
  rho[1] = rho_odd;

  // Geyer initial positive sequence: keep whole lag pairs while their sum
  // stays positive.
  Eigen::Index s = 1;
  while (s < n - 4 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - acov.mean_acov(s + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - acov.mean_acov(s + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[s + 1] = rho_even;
      rho[s + 2] = rho_odd;
    }
    s += 2;
  }
  const Eigen::Index max_s = s;
  // Carrying one extra positive term reduces variance for antithetic chains.
  if (rho_even > 0.0) rho[max_s + 1] = rho_even;

  // Smooth to Geyer's initial monotone sequence.
  for (Eigen::Index i = 1; i <= max_s - 3; i += 2) {
    if (rho[i + 1] + rho[i + 2] > rho[i - 1] + rho[i]) {
      rho[i + 1] = 0.5 * (rho[i - 1] + rho[i]);
      rho[i + 2] = rho[i + 1];
    }
  }

  const double total = static_cast<double>(n) * static_cast<double>(m);
  const double tau =
      -1.0 + 2.0 * rho.head(max_s).sum() + rho[max_s + 1];
  // For strongly antithetic chains the truncated sum is near zero and can
  // go negative from noise; flooring it keeps the estimate positive and
  // bounded by total * log10(total).
  const double tau_floor = 1.0 / std::log10(total);
  return total / std::max(tau, tau_floor);
}

namespace {

bool is_constant(const Eigen::MatrixXd& chains) {
  return chains.maxCoeff() == chains.minCoeff();
}

}  // namespace

EssResult ess_bulk_detailed(const Eigen::MatrixXd& chains) {
  if (chains.cols() < 1 || chains.rows() < 8)
    throw std::invalid_argument("ess_bulk: need >= 1 chain of >= 8 draws");
  if (is_constant(chains)) return {kNaN, kNaN};

  const Eigen::MatrixXd split = split_halves(rank_normalized(chains));
  EssResult out;
  out.raw = geyer_ess(split);
  const double total =
      static_cast<double>(split.rows()) * static_cast<double>(split.cols());
  out.capped = std::isnan(out.raw) ? kNaN : std::min(out.raw, total);
  return out;
}

double ess_bulk(const Eigen::MatrixXd& chains) {
  return ess_bulk_detailed(chains).capped;
}

double split_rhat(const Eigen::MatrixXd& chains) {
  if (chains.cols() < 1 || chains.rows() < 4)
    throw std::invalid_argument("split_rhat: need >= 1 chain of >= 4 draws");
  if (is_constant(chains)) return kNaN;

  const Eigen::MatrixXd split = split_halves(rank_normalized(chains));
  const Eigen::Index n = split.rows();
  const Eigen::Index m = split.cols();

  const Eigen::RowVectorXd means = split.colwise().mean();
  Eigen::RowVectorXd vars(m);
  for (Eigen::Index j = 0; j < m; ++j)
    vars[j] = (split.col(j).array() - means[j]).square().sum() /
              static_cast<double>(n - 1);

  const double w = vars.mean();
  const double b_over_n =
      (means.array() - means.mean()).square().sum() / static_cast<double>(m - 1);
  const double var_plus =
      w * static_cast<double>(n - 1) / static_cast<double>(n) + b_over_n;
  if (w <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(var_plus / w);
}

MultiChainSummary summarize_chains(const std::vector<Eigen::MatrixXd>& chains,
                                   long grad_evals, double seconds) {
  if (chains.empty())
    throw std::invalid_argument("summarize_chains: no chains");
  const Eigen::Index n = chains.front().rows();
  const Eigen::Index d = chains.front().cols();
  for (const auto& c : chains)
    if (c.rows() != n || c.cols() != d)
      throw std::invalid_argument("summarize_chains: chain shape mismatch");

  MultiChainSummary out;
  out.parameters.resize(static_cast<size_t>(d));
  out.min_ess = kNaN;
  out.min_ess_raw = kNaN;
  out.max_rhat = kNaN;

  Eigen::MatrixXd param(n, static_cast<Eigen::Index>(chains.size()));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (size_t k = 0; k < chains.size(); ++k)
      param.col(static_cast<Eigen::Index>(k)) = chains[k].col(j);
    ParameterDiagnostics& diag = out.parameters[static_cast<size_t>(j)];
    const EssResult ess = ess_bulk_detailed(param);
    diag.ess_raw = ess.raw;
    diag.ess = ess.capped;
    diag.rhat = split_rhat(param);

    if (!std::isnan(diag.ess) &&
        (out.min_ess_index < 0 || diag.ess < out.min_ess)) {
      out.min_ess_index = static_cast<int>(j);
      out.min_ess = diag.ess;
      out.min_ess_raw = diag.ess_raw;
    }
    if (!std::isnan(diag.rhat) &&
        (std::isnan(out.max_rhat) || diag.rhat > out.max_rhat))
      out.max_rhat = diag.rhat;
  }

  out.ess_per_grad =
      grad_evals > 0 ? out.min_ess / static_cast<double>(grad_evals) : kNaN;
  out.ess_per_sec = seconds > 0 ? out.min_ess / seconds : kNaN;
  return out;
}

}  // namespace hmc
