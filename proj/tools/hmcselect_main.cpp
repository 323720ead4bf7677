#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmc/config.hpp"
#include "hmc/runner.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string seed;
  std::string threads;
  std::string output;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "JSON config file");
  sub->add_option("--seed", args.seed, "base RNG seed (overrides config)");
  sub->add_option("--threads", args.threads,
                  "worker threads, 0 = hardware parallelism");
  sub->add_option("--output", args.output, "output directory");
  sub->add_option("overrides", args.overrides,
                  "config overrides of the form dotted.key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "HMC benchmark harness with stability-criterion metric selection"};
  app.require_subcommand(1);
  CommonArgs args;
  CLI::App* sample =
      app.add_subcommand("sample", "run one configured experiment");
  CLI::App* compare = app.add_subcommand(
      "compare", "sweep adaptations over one target and tabulate");
  CLI::App* short_warmup = app.add_subcommand(
      "short-warmup", "single-window sweep over low-rank candidates");
  add_common(sample, args);
  add_common(compare, args);
  add_common(short_warmup, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  std::vector<std::string> overrides = args.overrides;
  if (!args.seed.empty()) overrides.push_back("seed=" + args.seed);
  if (!args.threads.empty()) overrides.push_back("threads=" + args.threads);
  if (!args.output.empty())
    overrides.push_back("output=" + nlohmann::json(args.output).dump());

  try {
    const hmc::RunConfig config =
        hmc::load_run_config(args.config_path, overrides);
    if (sample->parsed()) return hmc::run_sample(config);
    if (compare->parsed()) return hmc::run_compare(config);
    return hmc::run_short_warmup(config);
  } catch (const hmc::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
