#include "hmc/config.hpp"

#include <fstream>
#include <set>

#include "hmc/criterion.hpp"
#include "hmc/rng.hpp"

namespace hmc {

namespace {

void require_keys(const nlohmann::json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw ConfigError("unknown key '" + where + item.key() + "'");
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& key, T fallback,
         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + where + key + "'");
  }
}

TargetConfig target_from_json(const nlohmann::json& obj) {
  require_keys(obj, "target.",
               {"name", "dimension", "covariance", "spectrum", "rotation_seed",
                "data_path", "x", "y", "intercept_scale", "slope_scale",
                "noise_scale", "funnel_scale"});
  TargetConfig t;
  t.name = get_or<std::string>(obj, "name", t.name, "target.");
  t.dimension = get_or<int>(obj, "dimension", t.dimension, "target.");
  t.covariance = get_or<std::vector<std::vector<double>>>(
      obj, "covariance", t.covariance, "target.");
  t.spectrum =
      get_or<std::vector<double>>(obj, "spectrum", t.spectrum, "target.");
  t.rotation_seed = get_or<unsigned long long>(obj, "rotation_seed",
                                               t.rotation_seed, "target.");
  t.data_path = get_or<std::string>(obj, "data_path", t.data_path, "target.");
  t.x = get_or<std::vector<double>>(obj, "x", t.x, "target.");
  t.y = get_or<std::vector<double>>(obj, "y", t.y, "target.");
  t.intercept_scale =
      get_or<double>(obj, "intercept_scale", t.intercept_scale, "target.");
  t.slope_scale = get_or<double>(obj, "slope_scale", t.slope_scale, "target.");
  t.noise_scale = get_or<double>(obj, "noise_scale", t.noise_scale, "target.");
  t.funnel_scale =
      get_or<double>(obj, "funnel_scale", t.funnel_scale, "target.");
  return t;
}

AdaptationSpec adaptation_from_json(const nlohmann::json& obj) {
  require_keys(obj, "adaptation.",
               {"mode", "candidate", "candidates", "diagonal_sparsity", "nu0",
                "schedule", "short_window", "max_depth", "target_accept"});
  AdaptationSpec a;
  a.mode = get_or<std::string>(obj, "mode", a.mode, "adaptation.");
  if (obj.contains("candidate"))
    a.candidates = {
        get_or<std::string>(obj, "candidate", std::string{}, "adaptation.")};
  a.candidates = get_or<std::vector<std::string>>(obj, "candidates",
                                                  a.candidates, "adaptation.");
  a.diagonal_sparsity = get_or<bool>(obj, "diagonal_sparsity",
                                     a.diagonal_sparsity, "adaptation.");
  a.nu0 = get_or<double>(obj, "nu0", a.nu0, "adaptation.");
  a.schedule = get_or<std::string>(obj, "schedule", a.schedule, "adaptation.");
  a.short_window =
      get_or<int>(obj, "short_window", a.short_window, "adaptation.");
  a.max_depth = get_or<int>(obj, "max_depth", a.max_depth, "adaptation.");
  a.target_accept =
      get_or<double>(obj, "target_accept", a.target_accept, "adaptation.");
  return a;
}

}  // namespace

int RunConfig::resolved_group_count() const {
  if (group_count > 0) return group_count;
  if (group_size <= 0 || chains % group_size != 0) return 0;
  return chains / group_size;
}

void RunConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (draws < 1) throw ConfigError("draws must be >= 1");
  if (group_size < 1) throw ConfigError("group_size must be >= 1");
  if (chains % group_size != 0)
    throw ConfigError("chains (" + std::to_string(chains) +
                      ") must be divisible by group_size (" +
                      std::to_string(group_size) + ")");
  if (group_count > 0 && group_count * group_size != chains)
    throw ConfigError("group_count * group_size must equal chains");
  if (threads < 0) throw ConfigError("threads must be >= 0");

  static const std::set<std::string> kTargets = {"standard-normal", "gaussian",
                                                 "regression", "funnel"};
  if (!kTargets.count(target.name))
    throw ConfigError(
        "unknown target '" + target.name +
        "'; valid targets: standard-normal, gaussian, regression, funnel");
  if (target.name == "standard-normal" && target.dimension < 1)
    throw ConfigError("standard-normal needs dimension >= 1");
  if (target.name == "gaussian" && target.covariance.empty() &&
      target.spectrum.empty())
    throw ConfigError("gaussian needs target.covariance or target.spectrum");
  if (target.name == "regression" && target.data_path.empty() &&
      (target.x.size() < 3 || target.x.size() != target.y.size()))
    throw ConfigError(
        "regression needs target.data_path or inline x/y of equal length >= 3");
  if (target.name == "funnel" && target.dimension < 2)
    throw ConfigError("funnel needs dimension >= 2");

  if (adaptation.mode != "switching" && adaptation.mode != "fixed")
    throw ConfigError("unknown adaptation.mode '" + adaptation.mode +
                      "'; valid modes: switching, fixed");
  if (adaptation.mode == "fixed" && adaptation.candidates.size() != 1)
    throw ConfigError(
        "fixed adaptation needs exactly one adaptation.candidate");
  for (const auto& id : adaptation.candidates) {
    try {
      parse_candidate(id);
    } catch (const std::exception& err) {
      throw ConfigError(err.what());
    }
  }
  if (adaptation.schedule != "default" && adaptation.schedule != "short")
    throw ConfigError("unknown adaptation.schedule '" + adaptation.schedule +
                      "'; valid schedules: default, short");
  if (adaptation.short_window < 10)
    throw ConfigError("adaptation.short_window must be >= 10");
  if (adaptation.max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (!(adaptation.target_accept > 0) || !(adaptation.target_accept < 1))
    throw ConfigError("target_accept must be in (0, 1)");
}

RunConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  require_keys(doc, "",
               {"target", "adaptation", "chains", "draws", "group_size",
                "group_count", "seed", "output", "threads"});
  RunConfig c;
  if (doc.contains("target")) {
    if (!doc.at("target").is_object())
      throw ConfigError("'target' must be an object");
    c.target = target_from_json(doc.at("target"));
  }
  if (doc.contains("adaptation")) {
    if (!doc.at("adaptation").is_object())
      throw ConfigError("'adaptation' must be an object");
    c.adaptation = adaptation_from_json(doc.at("adaptation"));
  }
  c.chains = get_or<int>(doc, "chains", c.chains, "");
  c.draws = get_or<int>(doc, "draws", c.draws, "");
  c.group_size = get_or<int>(doc, "group_size", c.group_size, "");
  c.group_count = get_or<int>(doc, "group_count", c.group_count, "");
  c.seed = get_or<unsigned long long>(doc, "seed", c.seed, "");
  c.output = get_or<std::string>(doc, "output", c.output, "");
  c.threads = get_or<int>(doc, "threads", c.threads, "");
  c.validate();
  return c;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // unquoted strings stay strings

  nlohmann::json* node = &doc;
  size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part =
        key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty())
      throw ConfigError("override key '" + key + "' has an empty segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null())
      throw ConfigError("override key '" + key +
                        "' descends into a non-object value");
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded())
      throw ConfigError("config file '" + config_path + "' is not valid JSON");
  }
  for (const auto& assignment : overrides) apply_override(doc, assignment);
  return config_from_json(doc);
}

nlohmann::json config_echo(const RunConfig& config) {
  nlohmann::json target = {{"name", config.target.name}};
  if (config.target.name == "standard-normal" ||
      config.target.name == "funnel")
    target["dimension"] = config.target.dimension;
  if (config.target.name == "gaussian") {
    if (!config.target.covariance.empty())
      target["covariance"] = config.target.covariance;
    else {
      target["spectrum"] = config.target.spectrum;
      target["rotation_seed"] = config.target.rotation_seed;
    }
  }
  if (config.target.name == "regression") {
    if (!config.target.data_path.empty())
      target["data_path"] = config.target.data_path;
    else {
      target["x"] = config.target.x;
      target["y"] = config.target.y;
    }
    target["intercept_scale"] = config.target.intercept_scale;
    target["slope_scale"] = config.target.slope_scale;
    target["noise_scale"] = config.target.noise_scale;
  }
  if (config.target.name == "funnel")
    target["funnel_scale"] = config.target.funnel_scale;

  nlohmann::json adaptation = {
      {"mode", config.adaptation.mode},
      {"diagonal_sparsity", config.adaptation.diagonal_sparsity},
      {"nu0", config.adaptation.nu0},
      {"schedule", config.adaptation.schedule},
      {"max_depth", config.adaptation.max_depth},
      {"target_accept", config.adaptation.target_accept},
  };
  if (config.adaptation.schedule == "short")
    adaptation["short_window"] = config.adaptation.short_window;
  {
    std::vector<std::string> ids;
    for (const auto& c : resolved_candidates(config.adaptation)) ids.push_back(c.id());
    adaptation["candidates"] = ids;
  }

  return nlohmann::json{{"target", target},
                        {"adaptation", adaptation},
                        {"chains", config.chains},
                        {"draws", config.draws},
                        {"group_size", config.group_size},
                        {"group_count", config.resolved_group_count()},
                        {"seed", config.seed}};
}

std::unique_ptr<TargetDensity> make_target(const TargetConfig& config) {
  if (config.name == "standard-normal")
    return std::make_unique<GaussianTarget>(
        GaussianTarget::standard_normal(config.dimension));

  if (config.name == "gaussian") {
    Eigen::MatrixXd sigma;
    if (!config.covariance.empty()) {
      const int d = static_cast<int>(config.covariance.size());
      sigma.resize(d, d);
      for (int i = 0; i < d; ++i) {
        if (static_cast<int>(config.covariance[i].size()) != d)
          throw ConfigError("target.covariance must be square");
        for (int j = 0; j < d; ++j) sigma(i, j) = config.covariance[i][j];
      }
    } else {
      const int d = static_cast<int>(config.spectrum.size());
      sigma = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < d; ++i) {
        if (!(config.spectrum[i] > 0))
          throw ConfigError("target.spectrum entries must be > 0");
        sigma(i, i) = config.spectrum[i];
      }
      if (config.rotation_seed != 0) {
        Rng rng(config.rotation_seed);
        Eigen::MatrixXd g(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ();
        const Eigen::MatrixXd r = qr.matrixQR();
        for (int j = 0; j < d; ++j)
          if (r(j, j) < 0) q.col(j) = -q.col(j);
        sigma = (q * sigma * q.transpose()).eval();
        sigma = (0.5 * (sigma + sigma.transpose())).eval();
      }
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(sigma.rows());
    return std::make_unique<GaussianTarget>(std::move(sigma), std::move(mean));
  }

  if (config.name == "regression") {
    RegressionData data;
    if (!config.data_path.empty()) {
      data = load_regression_csv(config.data_path);
    } else {
      data.x = Eigen::Map<const Eigen::VectorXd>(
          config.x.data(), static_cast<Eigen::Index>(config.x.size()));
      data.y = Eigen::Map<const Eigen::VectorXd>(
          config.y.data(), static_cast<Eigen::Index>(config.y.size()));
    }
    return std::make_unique<RegressionTarget>(std::move(data),
                                              config.intercept_scale,
                                              config.slope_scale,
                                              config.noise_scale);
  }

  if (config.name == "funnel")
    return std::make_unique<FunnelTarget>(config.dimension,
                                          config.funnel_scale);

  throw ConfigError(
      "unknown target '" + config.name +
      "'; valid targets: standard-normal, gaussian, regression, funnel");
}

std::vector<CandidateDescriptor> resolved_candidates(
    const AdaptationSpec& spec) {
  if (!spec.candidates.empty()) {
    std::vector<CandidateDescriptor> out;
    for (const auto& id : spec.candidates) out.push_back(parse_candidate(id));
    return out;
  }
  return spec.diagonal_sparsity ? diagonal_sparsity_candidate_set()
                                : default_candidate_set();
}

AdaptationConfig make_adaptation(const AdaptationSpec& spec) {
  AdaptationConfig config;
  config.schedule = spec.schedule == "short"
                        ? WarmupSchedule::short_schedule(spec.short_window)
                        : WarmupSchedule::default_schedule();
  config.mode = spec.mode == "fixed" ? AdaptationMode::FixedCandidate
                                     : AdaptationMode::Switching;
  config.candidates = resolved_candidates(spec);
  config.diagonal_sparsity = spec.diagonal_sparsity;
  config.nu0 = spec.nu0;
  config.max_depth = spec.max_depth;
  config.target_accept = spec.target_accept;
  config.validate();
  return config;
}

}  // namespace hmc
