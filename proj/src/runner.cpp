#include "hmc/runner.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "hmc/rng.hpp"

namespace hmc {

namespace {

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

BenchmarkArtifacts run_benchmark(const RunConfig& config) {
  config.validate();
  const auto target = make_target(config.target);
  const AdaptationConfig adaptation = make_adaptation(config.adaptation);
  const int d = target->dimension();

  BenchmarkArtifacts artifacts;
  artifacts.outcomes.resize(static_cast<size_t>(config.chains));

  unsigned hardware = std::thread::hardware_concurrency();
  if (hardware == 0) hardware = 1;
  const int thread_count = std::min(
      config.chains,
      config.threads > 0 ? config.threads : static_cast<int>(hardware));

  std::atomic<int> next_chain{0};
  auto worker = [&]() {
    while (true) {
      const int k = next_chain.fetch_add(1);
      if (k >= config.chains) return;
      ChainOutcome& outcome = artifacts.outcomes[static_cast<size_t>(k)];
      Rng rng(config.seed, static_cast<unsigned long long>(k));
      Eigen::VectorXd q0(d);
      for (int i = 0; i < d; ++i) q0[i] = rng.uniform(-2.0, 2.0);
      try {
        outcome.result = run_chain(*target, adaptation, config.draws, q0, rng);
        outcome.ok = true;
      } catch (const std::exception& err) {
        outcome.ok = false;
        outcome.error = err.what();
      }
    }
  };
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  artifacts.groups = group_summaries(config, artifacts.outcomes);
  artifacts.report = report_json(config, target->parameter_names(),
                                 artifacts.outcomes, artifacts.groups);

  std::filesystem::create_directories(config.output);
  for (size_t k = 0; k < artifacts.outcomes.size(); ++k) {
    const ChainOutcome& outcome = artifacts.outcomes[k];
    if (!outcome.ok) continue;
    write_chain_csv(config.output + "/chain_" + std::to_string(k) + ".csv",
                    target->parameter_names(), outcome.result.draws);
  }
  write_text(config.output + "/report.json", artifacts.report.dump(2) + "\n");
  write_text(config.output + "/summary.csv",
             summary_csv(config, target->parameter_names(), artifacts.groups));

  for (const auto& outcome : artifacts.outcomes)
    if (!outcome.ok) artifacts.exit_code = 1;
  return artifacts;
}

int run_sample(const RunConfig& config) {
  return run_benchmark(config).exit_code;
}

namespace {

struct SweepRow {
  std::string id;
  nlohmann::json report;
  int exit_code = 0;
};

std::string json_number_csv(const nlohmann::json& value) {
  if (value.is_number()) return format_g17(value.get<double>());
  return "nan";
}

// Table rows shared by the compare and short-warmup sweeps: criterion range
// across chains, grouped efficiency range, worst grouped R-hat, divergence
// totals.
std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "adaptation,criterion_min,criterion_max,min_ess_per_grad_min,"
      "min_ess_per_grad_max,max_rhat,warmup_divergences,"
      "sampling_divergences,aborted_chains\n";
  for (const auto& row : rows) {
    const nlohmann::json& r = row.report;
    out += row.id;
    out += ',';
    out += json_number_csv(r.at("criterion_range").at("min"));
    out += ',';
    out += json_number_csv(r.at("criterion_range").at("max"));
    out += ',';
    out += json_number_csv(r.at("group_ranges").at("min_ess_per_grad").at("min"));
    out += ',';
    out += json_number_csv(r.at("group_ranges").at("min_ess_per_grad").at("max"));
    out += ',';
    out += json_number_csv(r.at("group_ranges").at("max_rhat"));
    out += ',';
    out += r.at("divergences").at("warmup").dump();
    out += ',';
    out += r.at("divergences").at("sampling").dump();
    out += ',';
    out += std::to_string(r.at("aborted_chains").size());
    out += '\n';
  }
  return out;
}

int run_sweep(const RunConfig& base,
              const std::vector<std::pair<std::string, AdaptationSpec>>& runs,
              const std::string& table_name) {
  int exit_code = 0;
  std::vector<SweepRow> rows;
  for (const auto& [id, spec] : runs) {
    RunConfig sub = base;
    sub.adaptation = spec;
    sub.output = base.output + "/" + id;
    sub.validate();
    BenchmarkArtifacts artifacts = run_benchmark(sub);
    exit_code = std::max(exit_code, artifacts.exit_code);
    rows.push_back({id, std::move(artifacts.report), artifacts.exit_code});
  }
  std::filesystem::create_directories(base.output);
  write_text(base.output + "/" + table_name, sweep_csv(rows));
  return exit_code;
}

}  // namespace

int run_compare(const RunConfig& config) {
  std::vector<std::pair<std::string, AdaptationSpec>> runs;
  AdaptationSpec switching = config.adaptation;
  switching.mode = "switching";
  runs.emplace_back("switching", switching);
  for (const CandidateDescriptor& candidate : resolved_candidates(config.adaptation)) {
    AdaptationSpec fixed = config.adaptation;
    fixed.mode = "fixed";
    fixed.candidates = {candidate.id()};
    runs.emplace_back(candidate.id(), fixed);
  }
  return run_sweep(config, runs, "compare.csv");
}

int run_short_warmup(const RunConfig& config) {
  std::vector<std::pair<std::string, AdaptationSpec>> runs;
  for (int rank : {1, 2, 4, 8}) {
    for (bool blend : {false, true}) {
      CandidateDescriptor desc;
      desc.kind = CandidateDescriptor::Kind::LowRank;
      desc.rank = rank;
      desc.wishart_blend = blend;
      AdaptationSpec fixed = config.adaptation;
      fixed.mode = "fixed";
      fixed.candidates = {desc.id()};
      fixed.schedule = "short";
      runs.emplace_back(desc.id(), fixed);
    }
  }
  return run_sweep(config, runs, "short_warmup.csv");
}

}  // namespace hmc
