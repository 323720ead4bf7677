#ifndef HMC_DIAGNOSTICS_HPP
#define HMC_DIAGNOSTICS_HPP

#include <vector>

#include <Eigen/Dense>

namespace hmc {

// Inverse of the standard normal CDF (Wichura's PPND16 rational
// approximations, accurate to ~1e-15). p must lie in (0, 1).
double standard_normal_quantile(double p);

// Fractional ranks of the entries of `values`, ties averaged, 1-based.
Eigen::VectorXd fractional_ranks(const Eigen::VectorXd& values);

// Rank-normalizes a chains matrix (rows = draws, columns = chains): pooled
// fractional ranks r mapped through the normal quantile at
// (r - 3/8) / (count + 1/4). Shape is preserved.
Eigen::MatrixXd rank_normalized(const Eigen::MatrixXd& chains);

// Splits each chain (column) into its first and second half, dropping the
// middle draw when the length is odd: n x c -> floor(n/2) x 2c. The first
// half of chain j lands in column 2j, the second half in column 2j+1.
Eigen::MatrixXd split_halves(const Eigen::MatrixXd& chains);

// Autocorrelation-based multi-chain effective sample size of the given
// chains matrix as-is (no rank normalization, no splitting), truncating the
// autocorrelation sum with Geyer's initial positive sequence smoothed to an
// initial monotone sequence. The truncated sum is floored at 1/log10(total
// draws), so the estimate stays positive and never exceeds
// total * log10(total); no cap at the draw count is applied here.
double geyer_ess(const Eigen::MatrixXd& chains);

struct EssResult {
  double raw = 0.0;     // uncapped autocorrelation estimate
  double capped = 0.0;  // min(raw, total retained draws)
};

// Bulk effective sample size: pooled rank normalization, then split halves,
// then the Geyer-truncated multi-chain estimate. rows = draws (>= 8),
// columns = chains (>= 1). Constant input yields NaN in both fields.
EssResult ess_bulk_detailed(const Eigen::MatrixXd& chains);
double ess_bulk(const Eigen::MatrixXd& chains);

// Rank-normalized split R-hat: pooled rank normalization, split halves,
// then sqrt(var_plus / W) with var_plus = W (m-1)/m + B/m over the split
// chains (m draws per half). rows >= 4. Constant input yields NaN.
double split_rhat(const Eigen::MatrixXd& chains);

struct ParameterDiagnostics {
  double ess_raw = 0.0;
  double ess = 0.0;  // capped at total retained draws
  double rhat = 0.0;
};

struct MultiChainSummary {
  std::vector<ParameterDiagnostics> parameters;
  int min_ess_index = -1;  // argmin of capped ESS; -1 when all undefined
  double min_ess = 0.0;
  double min_ess_raw = 0.0;
  double max_rhat = 0.0;
  double ess_per_grad = 0.0;  // min ESS / gradient evaluations
  double ess_per_sec = 0.0;   // min ESS / seconds
};

// Per-parameter diagnostics across chains (each matrix: draws x d, equal
// shapes). Efficiency ratios use the minimum capped ESS over parameters;
// parameters with undefined diagnostics (constant draws) are skipped for
// the min/max aggregates and NaN ratios result only when all are undefined
// or the denominator is not positive.
MultiChainSummary summarize_chains(const std::vector<Eigen::MatrixXd>& chains,
                                   long grad_evals, double seconds);

}  // namespace hmc

#endif
