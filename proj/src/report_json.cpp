#include "rcw/report_json.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace rcw {
namespace {

using nlohmann::json;

json vector_json(const VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number_or_sentinel(v[i]));
  return out;
}

json estimator_json(const EstimatorKind& kind) {
  json out = to_string(kind.type);
  return out;
}

json vcov_json(const VcovKind& v) {
  json out{{"kind", to_string(v)}, {"small_sample", v.small_sample}};
  if (v.type == VcovKind::Type::HAC) out["bandwidth"] = v.bandwidth;
  return out;
}

void write(std::ostream& os, const json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close_pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << json(it.key()).dump() << (indent > 0 ? ": " : ":");
        write(os, it.value(), indent, depth + 1);
      }
      os << nl << close_pad << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << '[' << nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad;
        write(os, v, indent, depth + 1);
      }
      os << nl << close_pad << ']';
      return;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      if (!std::isfinite(x)) {
        os << number_or_sentinel(x).dump();
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", x);
      std::string s(buf);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      os << s;
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace

json number_or_sentinel(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

json to_json(const ConditionalResult& r) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "test";
  out["beta_hat"] = vector_json(r.estimate.beta_hat);
  out["conventional_se"] = vector_json(r.wald.se);
  out["beta0"] = vector_json(r.beta0);
  out["wald_stat"] = number_or_sentinel(r.statistic);
  out["conventional_critical_value"] = number_or_sentinel(r.conventional_critical_value);
  out["conventional_reject"] = r.conventional_reject;
  out["conditional_critical_value"] = number_or_sentinel(r.critical_value);
  out["p_value_conditional"] = number_or_sentinel(r.p_value_conditional);
  out["reject"] = r.reject;
  out["degenerate_draws"] = r.degenerate_draws;
  if (r.estimate.liml_lambda) out["liml_lambda"] = number_or_sentinel(*r.estimate.liml_lambda);
  if (r.estimate.cue_criterion) {
    out["cue_criterion"] = number_or_sentinel(*r.estimate.cue_criterion);
    out["cue_boundary"] = r.estimate.boundary;
  }
  out["provenance"] = {
      {"seed", r.seed},
      {"draws", r.n_draws},
      {"alpha", number_or_sentinel(r.alpha)},
      {"estimator", estimator_json(r.estimator)},
      {"wald_form", to_string(r.form)},
      {"variance_plugin", r.plugin == VariancePlugin::Estimate ? "estimate" : "null"},
      {"vcov", vcov_json(r.vcov)},
      {"n", r.n},
      {"k", r.k},
      {"p", r.p},
      {"q", r.q},
  };
  return out;
}

json to_json(const ConfidenceSet& s) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "ci";
  out["beta_hat"] = number_or_sentinel(s.beta_hat);
  out["grid_center"] = number_or_sentinel(s.grid_center);
  out["conventional_se"] = number_or_sentinel(s.conventional_se);
  out["alpha"] = number_or_sentinel(s.alpha);
  json intervals = json::array();
  for (const auto& iv : s.intervals) {
    intervals.push_back({number_or_sentinel(iv.lo), number_or_sentinel(iv.hi)});
  }
  out["intervals"] = std::move(intervals);
  out["empty"] = s.empty;
  out["unbounded_left"] = s.unbounded_left;
  out["unbounded_right"] = s.unbounded_right;
  json grid = json::array();
  for (const auto& g : s.grid) {
    grid.push_back({{"beta0", number_or_sentinel(g.beta0)},
                    {"wald_stat", number_or_sentinel(g.statistic)},
                    {"conditional_critical_value", number_or_sentinel(g.critical_value)},
                    {"p_value_conditional", number_or_sentinel(g.p_value)},
                    {"accepted", g.accepted}});
  }
  out["grid"] = std::move(grid);
  out["provenance"] = {
      {"seed", s.seed},
      {"draws", s.n_draws},
      {"estimator", estimator_json(s.estimator)},
      {"wald_form", to_string(s.form)},
      {"vcov", vcov_json(s.vcov)},
      {"grid_points", s.grid.size()},
      {"n", s.n},
      {"k", s.k},
      {"p", s.p},
      {"q", s.q},
  };
  return out;
}

json to_json(const DGPDesign& d) {
  json out{{"n", d.n},         {"k", d.k},     {"p", 1},
           {"mu2", d.mu2},     {"rho", d.rho}, {"error_kind", to_string(d.error_kind)},
           {"beta_true", d.beta_true}};
  if (d.error_kind == ErrorKind::Clustered) {
    out["clusters"] = d.clusters;
    out["eta"] = d.eta;
  }
  return out;
}

json to_json(const ExperimentReport& r) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["command"] = "simulate";
  json designs = json::array();
  for (const auto& d : r.designs) designs.push_back(to_json(d));
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"design", row.design_index},
                    {"offset", row.offset},
                    {"reps", row.reps},
                    {"failures", row.failures},
                    {"cw_rate", row.cw_rate},
                    {"cw_mcse", row.cw_mcse},
                    {"conventional_rate", row.conventional_rate},
                    {"conventional_mcse", row.conventional_mcse}});
  }
  out["config"] = {
      {"designs", std::move(designs)},
      {"offsets", r.offsets},
      {"reps", r.reps},
      {"estimator", estimator_json(r.config.statistic.estimator)},
      {"wald_form", to_string(r.config.statistic.resolved_form())},
      {"vcov", r.config.vcov ? vcov_json(*r.config.vcov) : json("auto")},
      {"alpha", r.config.alpha},
      {"draws", r.config.n_draws},
      {"master_seed", r.config.master_seed},
  };
  out["rows"] = std::move(rows);
  out["runtime_seconds"] = r.runtime_seconds;
  return out;
}

std::string dump_json(const json& j, int indent) {
  std::ostringstream os;
  write(os, j, indent, 0);
  return os.str();
}

}  // namespace rcw
