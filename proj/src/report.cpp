#include "hmc/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace hmc {

namespace {

nlohmann::json finite_or_null(double value) {
  if (std::isfinite(value)) return value;
  return nullptr;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

nlohmann::json matrix_rows_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out.push_back(vector_to_json(m.row(i).transpose()));
  return out;
}

}  // namespace

std::vector<GroupSummary> group_summaries(
    const RunConfig& config, const std::vector<ChainOutcome>& outcomes) {
  const int group_count = config.resolved_group_count();
  std::vector<GroupSummary> groups(static_cast<size_t>(group_count));
  for (int g = 0; g < group_count; ++g) {
    GroupSummary& group = groups[static_cast<size_t>(g)];
    group.complete = true;
    std::vector<Eigen::MatrixXd> draws;
    for (int j = 0; j < config.group_size; ++j) {
      const int k = g * config.group_size + j;
      group.chain_indices.push_back(k);
      const ChainOutcome& outcome = outcomes[static_cast<size_t>(k)];
      if (!outcome.ok) {
        group.complete = false;
        continue;
      }
      draws.push_back(outcome.result.draws);
      group.grad_evals += outcome.result.warmup_grad_evals +
                          outcome.result.sampling_grad_evals;
      group.sampling_seconds += outcome.result.sampling_seconds;
    }
    if (group.complete)
      group.diagnostics =
          summarize_chains(draws, group.grad_evals, group.sampling_seconds);
  }
  return groups;
}

std::string format_g17(double value) {
  char buffer[48];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

nlohmann::json metric_to_json(const Metric& metric) {
  nlohmann::json out = {{"kind", metric.kind_name()},
                        {"dimension", metric.dimension()}};
  switch (metric.kind()) {
    case Metric::Kind::Diagonal:
      out["inverse_diagonal"] = vector_to_json(metric.inverse_diagonal());
      break;
    case Metric::Kind::Dense:
      out["factor_lower"] = matrix_rows_to_json(metric.factor_lower());
      break;
    case Metric::Kind::LowRank:
      out["rescale_diagonal"] = vector_to_json(metric.rescale_diagonal());
      out["basis"] = matrix_rows_to_json(metric.basis());
      out["eigenvalues"] = vector_to_json(metric.eigenvalues());
      out["tail_eigenvalue"] = metric.tail_eigenvalue();
      break;
  }
  return out;
}

nlohmann::json selection_report_to_json(const SelectionReport& report) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& eval : report.candidates)
    candidates.push_back({{"id", eval.descriptor.id()},
                          {"criterion", finite_or_null(eval.criterion)},
                          {"feasible", eval.feasible},
                          {"warnings", eval.warnings}});
  return nlohmann::json{
      {"window", report.window_index},
      {"candidates", candidates},
      {"chosen", report.chosen >= 0
                     ? nlohmann::json(report.chosen_descriptor().id())
                     : nlohmann::json(nullptr)},
      {"criterion", finite_or_null(report.chosen_criterion())},
      {"eval_indices", report.eval_indices},
      {"warnings", report.warnings}};
}

nlohmann::json report_json(const RunConfig& config,
                           const std::vector<std::string>& parameter_names,
                           const std::vector<ChainOutcome>& outcomes,
                           const std::vector<GroupSummary>& groups) {
  nlohmann::json chains = nlohmann::json::array();
  double crit_min = std::numeric_limits<double>::infinity();
  double crit_max = -std::numeric_limits<double>::infinity();
  long warmup_divergences = 0;
  long sampling_divergences = 0;
  nlohmann::json aborted = nlohmann::json::array();

  for (size_t k = 0; k < outcomes.size(); ++k) {
    const ChainOutcome& outcome = outcomes[k];
    if (!outcome.ok) {
      chains.push_back({{"index", static_cast<int>(k)},
                        {"ok", false},
                        {"error", outcome.error}});
      aborted.push_back(
          {{"index", static_cast<int>(k)}, {"error", outcome.error}});
      continue;
    }
    const ChainResult& r = outcome.result;
    warmup_divergences += r.warmup_divergences;
    sampling_divergences += r.divergences;
    const double crit = r.final_criterion();
    if (std::isfinite(crit)) {
      crit_min = std::min(crit_min, crit);
      crit_max = std::max(crit_max, crit);
    }

    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : r.windows) {
      nlohmann::json wj = selection_report_to_json(w.selection);
      wj["metric_after"] = metric_to_json(w.metric_after);
      wj["step_after"] = w.step_after;
      windows.push_back(std::move(wj));
    }
    nlohmann::json ledger = nlohmann::json::array();
    for (const auto& entry : r.warmup_ledger)
      ledger.push_back({{"phase", entry.phase},
                        {"transitions", entry.transitions},
                        {"transition_grad_evals", entry.transition_grad_evals},
                        {"adaptation_grad_evals", entry.adaptation_grad_evals},
                        {"divergences", entry.divergences}});

    chains.push_back(
        {{"index", static_cast<int>(k)},
         {"ok", true},
         {"windows", windows},
         {"final_criterion", finite_or_null(crit)},
         {"metric", metric_to_json(r.metric)},
         {"step", r.step},
         {"warmup",
          {{"grad_evals", r.warmup_grad_evals},
           {"divergences", r.warmup_divergences},
           {"start_retries", r.start_retries},
           {"ledger", ledger}}},
         {"sampling",
          {{"grad_evals", r.sampling_grad_evals},
           {"divergences", r.divergences},
           {"draws", static_cast<long>(r.draws.rows())}}}});
  }

  nlohmann::json group_list = nlohmann::json::array();
  double epg_min = std::numeric_limits<double>::infinity();
  double epg_max = -std::numeric_limits<double>::infinity();
  double rhat_max = -std::numeric_limits<double>::infinity();
  for (size_t g = 0; g < groups.size(); ++g) {
    const GroupSummary& group = groups[g];
    nlohmann::json gj = {{"index", static_cast<int>(g)},
                         {"chains", group.chain_indices},
                         {"complete", group.complete}};
    if (group.complete) {
      const MultiChainSummary& diag = group.diagnostics;
      gj["min_ess"] = finite_or_null(diag.min_ess);
      gj["min_ess_raw"] = finite_or_null(diag.min_ess_raw);
      gj["min_ess_parameter"] =
          diag.min_ess_index >= 0
              ? nlohmann::json(
                    parameter_names[static_cast<size_t>(diag.min_ess_index)])
              : nlohmann::json(nullptr);
      gj["max_rhat"] = finite_or_null(diag.max_rhat);
      gj["grad_evals"] = group.grad_evals;
      gj["min_ess_per_grad"] = finite_or_null(diag.ess_per_grad);
      if (std::isfinite(diag.ess_per_grad)) {
        epg_min = std::min(epg_min, diag.ess_per_grad);
        epg_max = std::max(epg_max, diag.ess_per_grad);
      }
      if (std::isfinite(diag.max_rhat)) rhat_max = std::max(rhat_max, diag.max_rhat);
    }
    group_list.push_back(std::move(gj));
  }

  return nlohmann::json{
      {"config", config_echo(config)},
      {"parameters", parameter_names},
      {"chains", chains},
      {"criterion_range",
       {{"min", crit_min <= crit_max ? nlohmann::json(crit_min)
                                     : nlohmann::json(nullptr)},
        {"max", crit_min <= crit_max ? nlohmann::json(crit_max)
                                     : nlohmann::json(nullptr)}}},
      {"groups", group_list},
      {"group_ranges",
       {{"min_ess_per_grad",
         {{"min", epg_min <= epg_max ? nlohmann::json(epg_min)
                                     : nlohmann::json(nullptr)},
          {"max", epg_min <= epg_max ? nlohmann::json(epg_max)
                                     : nlohmann::json(nullptr)}}},
        {"max_rhat", rhat_max > -std::numeric_limits<double>::infinity()
                         ? nlohmann::json(rhat_max)
                         : nlohmann::json(nullptr)}}},
      {"divergences",
       {{"warmup", warmup_divergences}, {"sampling", sampling_divergences}}},
      {"aborted_chains", aborted}};
}

std::string summary_csv(const RunConfig& config,
                        const std::vector<std::string>& parameter_names,
                        const std::vector<GroupSummary>& groups) {
  (void)config;
  std::string out =
      "group,parameter,ess_raw,ess,rhat,ess_per_grad,ess_per_sec\n";
  for (size_t g = 0; g < groups.size(); ++g) {
    const GroupSummary& group = groups[g];
    if (!group.complete) continue;
    for (size_t j = 0; j < group.diagnostics.parameters.size(); ++j) {
      const ParameterDiagnostics& p = group.diagnostics.parameters[j];
      const double per_grad =
          group.grad_evals > 0 ? p.ess / static_cast<double>(group.grad_evals)
                               : std::numeric_limits<double>::quiet_NaN();
      const double per_sec =
          group.sampling_seconds > 0
              ? p.ess / group.sampling_seconds
              : std::numeric_limits<double>::quiet_NaN();
      out += std::to_string(g);
      out += ',';
      out += parameter_names[j];
      out += ',';
      out += format_g17(p.ess_raw);
      out += ',';
      out += format_g17(p.ess);
      out += ',';
      out += format_g17(p.rhat);
      out += ',';
      out += format_g17(per_grad);
      out += ',';
      out += format_g17(per_sec);
      out += '\n';
    }
  }
  return out;
}

void write_chain_csv(const std::string& path,
                     const std::vector<std::string>& parameter_names,
                     const Eigen::MatrixXd& draws) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  for (size_t j = 0; j < parameter_names.size(); ++j) {
    if (j) out << ',';
    out << parameter_names[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
      if (j) out << ',';
      out << format_g17(draws(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace hmc
