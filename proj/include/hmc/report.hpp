#ifndef HMC_REPORT_HPP
#define HMC_REPORT_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "hmc/config.hpp"
#include "hmc/diagnostics.hpp"
#include "hmc/warmup.hpp"

namespace hmc {

// One chain's outcome: a result, or the abort message that replaced it.
struct ChainOutcome {
  bool ok = false;
  ChainResult result;
  std::string error;
};

struct GroupSummary {
  std::vector<int> chain_indices;
  bool complete = false;  // every chain in the group finished
  MultiChainSummary diagnostics;
  long grad_evals = 0;  // warmup + sampling, summed over the group
  double sampling_seconds = 0.0;
};

// Consecutive blocks of group_size chains. Groups containing an aborted
// chain are marked incomplete and carry no diagnostics.
std::vector<GroupSummary> group_summaries(
    const RunConfig& config, const std::vector<ChainOutcome>& outcomes);

std::string format_g17(double value);

nlohmann::json metric_to_json(const Metric& metric);
nlohmann::json selection_report_to_json(const SelectionReport& report);

// The deterministic run report: config echo, per-chain adaptation records,
// the final-criterion range across chains, grouped efficiency summaries,
// divergence totals. Wall-clock quantities are excluded on purpose; they
// live in summary.csv.
nlohmann::json report_json(const RunConfig& config,
                           const std::vector<std::string>& parameter_names,
                           const std::vector<ChainOutcome>& outcomes,
                           const std::vector<GroupSummary>& groups);

// Flat per-group, per-parameter diagnostics, including the wall-clock
// efficiency column.
std::string summary_csv(const RunConfig& config,
                        const std::vector<std::string>& parameter_names,
                        const std::vector<GroupSummary>& groups);

// One row per draw, header = parameter names, 17 significant digits.
void write_chain_csv(const std::string& path,
                     const std::vector<std::string>& parameter_names,
                     const Eigen::MatrixXd& draws);

}  // namespace hmc

#endif
