#ifndef HMC_RUNNER_HPP
#define HMC_RUNNER_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "hmc/config.hpp"
#include "hmc/report.hpp"

namespace hmc {

struct BenchmarkArtifacts {
  int exit_code = 0;  // 0 ok, 1 at least one chain aborted
  std::vector<ChainOutcome> outcomes;
  std::vector<GroupSummary> groups;
  nlohmann::json report;
};

// Runs every chain of one configured experiment on a worker pool (chain k
// draws from its own seed stream, so results are independent of thread
// count and schedule) and writes chain_<k>.csv, report.json, and
// summary.csv under config.output.
BenchmarkArtifacts run_benchmark(const RunConfig& config);

// Subcommand drivers; each returns the process exit code.
int run_sample(const RunConfig& config);

// One sub-run per adaptation (switching plus each built-in candidate as a
// fixed adaptation) over the configured target; artifacts per sub-run land
// in output/<adaptation>/ and a comparison table in output/compare.csv.
int run_compare(const RunConfig& config);

// Single-window short-schedule sweep over low-rank candidates, ranks
// {1, 2, 4, 8} with and without blending; artifacts per sub-run land in
// output/<candidate>/ and a table in output/short_warmup.csv.
int run_short_warmup(const RunConfig& config);

}  // namespace hmc

#endif
