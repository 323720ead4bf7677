#ifndef HMC_CONFIG_HPP
#define HMC_CONFIG_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmc/targets.hpp"
#include "hmc/warmup.hpp"

namespace hmc {

// Invalid configuration: unknown names, violated invariants, unparsable
// values. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TargetConfig {
  std::string name = "standard-normal";
  int dimension = 10;
  // gaussian: either an explicit covariance matrix, or a spectrum of
  // covariance eigenvalues optionally rotated by a seeded random orthogonal
  // basis (rotation_seed = 0 keeps the eigenvalues on the axes).
  std::vector<std::vector<double>> covariance;
  std::vector<double> spectrum;
  unsigned long long rotation_seed = 0;
  // regression: two-column CSV (header row, then x,y) or inline data.
  std::string data_path;
  std::vector<double> x;
  std::vector<double> y;
  double intercept_scale = 10.0;
  double slope_scale = 10.0;
  double noise_scale = 5.0;
  // funnel
  double funnel_scale = 3.0;
};

struct AdaptationSpec {
  std::string mode = "switching";  // "switching" | "fixed"
  std::vector<std::string> candidates;  // empty selects the built-in set
  bool diagonal_sparsity = false;
  double nu0 = 0.0;  // <= 0 selects d + 5
  std::string schedule = "default";  // "default" | "short"
  int short_window = 100;
  int max_depth = 10;
  double target_accept = 0.8;
};

struct RunConfig {
  TargetConfig target;
  AdaptationSpec adaptation;
  int chains = 32;
  int draws = 1000;
  int group_size = 4;
  int group_count = 0;  // 0 derives chains / group_size
  unsigned long long seed = 1;
  std::string output = "out";
  int threads = 0;  // 0 selects hardware parallelism

  void validate() const;
  int resolved_group_count() const;
};

// Parses a JSON config document into a RunConfig, validating names and
// invariants. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& doc);

// Applies one "dotted.key=value" override; the value is parsed as JSON when
// possible and treated as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// File (optional) + overrides, applied in order; precedence grows
// rightward.
RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides);

// The config content that determines results (everything except output
// location and thread count), echoed into reports.
nlohmann::json config_echo(const RunConfig& config);

std::unique_ptr<TargetDensity> make_target(const TargetConfig& config);
// The candidate list after defaults: explicit ids when given, otherwise the
// built-in set for the sparsity setting.
std::vector<CandidateDescriptor> resolved_candidates(
    const AdaptationSpec& spec);
AdaptationConfig make_adaptation(const AdaptationSpec& spec);

}  // namespace hmc

#endif
