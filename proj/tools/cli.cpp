#include "cli.hpp"

#include "rcw/error.hpp"
#include "rcw/parallel.hpp"
#include "rcw/report_json.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rcw::cli {
namespace {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Unsupported: return 2;
    case ErrorCode::Data: return 3;
    case ErrorCode::Singular:
    case ErrorCode::Degenerate: return 4;
  }
  return 1;
}

void print_error(std::ostream& err, const std::string& code, const std::string& stage,
                 const std::string& message) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["error"] = {{"code", code}, {"stage", stage}, {"message", message}};
  err << doc.dump() << '\n';
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.stage(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    print_error(err, "internal", "", e.what());
    return 1;
  }
}

void emit(const CliConfig& config, std::ostream& out, const std::string& text) {
  if (!config.output) {
    out << text << '\n';
    return;
  }
  std::ofstream f(*config.output, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open output file '" + *config.output + "'", "output");
  f << text << '\n';
}

void apply_threads(const CliConfig& config) {
  if (config.threads) {
    set_num_threads(*config.threads);
    return;
  }
  if (const char* env = std::getenv("RCW_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) {
      throw Error(ErrorCode::InvalidArgument, std::string("RCW_THREADS must be a positive integer, got '") + env + "'",
                  "validate");
    }
    set_num_threads(static_cast<int>(n));
  }
}

VcovKind vcov_kind(const CliConfig& c) {
  if (c.vcov == "hc") return VcovKind::hc(c.small_sample);
  if (c.vcov == "hac") {
    auto v = VcovKind::hac(c.bandwidth);
    v.small_sample = c.small_sample;
    return v;
  }
  if (c.vcov == "cluster") return VcovKind::cluster(c.small_sample);
  throw Error(ErrorCode::InvalidArgument, "unknown vcov '" + c.vcov + "' (expected hc, hac or cluster)", "validate");
}

std::vector<DGPDesign> designs_for(const CliConfig& c) {
  std::vector<DGPDesign> out;
  for (const auto& kind_name : c.error_kinds) {
    const auto kind = parse_error_kind(kind_name);
    if (!kind) {
      throw Error(ErrorCode::InvalidArgument,
                  "unknown error_kind '" + kind_name + "' (expected homoskedastic, heteroskedastic or clustered)",
                  "validate");
    }
    for (double m : c.mu2) {
      DGPDesign d;
      d.n = c.n;
      d.k = c.k;
      d.mu2 = m;
      d.rho = c.rho;
      d.error_kind = *kind;
      d.clusters = c.clusters;
      d.eta = c.eta;
      d.beta_true = c.beta_true;
      d.seed = c.seed;
      out.push_back(d);
    }
  }
  return out;
}

IVData load(const CliConfig& c) {
  return staged("load", [&] { return load_dataset(c.data_path, c.columns); });
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void validate(const CliConfig& c) {
  staged("validate", [&] {
    if (!(c.alpha > 0.0 && c.alpha <= 0.5)) {
      throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 0.5], got " + format_number(c.alpha));
    }
    if (c.draws && *c.draws < 1000) {
      throw Error(ErrorCode::InvalidArgument, "draws must be at least 1000, got " + std::to_string(*c.draws));
    }
    if (!parse_estimator(c.estimator)) {
      throw Error(ErrorCode::InvalidArgument,
                  "unknown estimator '" + c.estimator + "' (expected 2sls, liml, gmm2 or cue)");
    }
    if (c.wald_form && !parse_wald_form(*c.wald_form)) {
      throw Error(ErrorCode::InvalidArgument,
                  "unknown wald_form '" + *c.wald_form + "' (expected sandwich or efficient)");
    }
    if (c.plugin != "estimate" && c.plugin != "null") {
      throw Error(ErrorCode::InvalidArgument, "unknown variance plug-in '" + c.plugin + "' (expected estimate or null)");
    }
    vcov_kind(c);
    if (c.vcov == "hac" && c.bandwidth < 0) throw Error(ErrorCode::InvalidArgument, "bandwidth must be >= 0");
    if (c.threads && *c.threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be >= 1");

    const bool needs_data = c.subcommand == Subcommand::Test || c.subcommand == Subcommand::Ci;
    if (needs_data) {
      if (c.data_path.empty()) throw Error(ErrorCode::InvalidArgument, "--data is required");
      if (c.columns.y.empty()) throw Error(ErrorCode::InvalidArgument, "--y is required");
      if (c.columns.endog.empty()) throw Error(ErrorCode::InvalidArgument, "--endog is required");
      if (c.columns.instruments.empty()) throw Error(ErrorCode::InvalidArgument, "--instruments is required");
      if (c.vcov == "cluster" && !c.columns.cluster) {
        throw Error(ErrorCode::InvalidArgument, "--vcov cluster requires --cluster");
      }
    }
    if (c.subcommand == Subcommand::Test && c.beta0.size() != c.columns.endog.size()) {
      throw Error(ErrorCode::InvalidArgument, "--beta0 needs one value per endogenous regressor (" +
                                                  std::to_string(c.columns.endog.size()) + ")");
    }
    if (c.subcommand == Subcommand::Ci) {
      if (c.grid_points < 21) throw Error(ErrorCode::InvalidArgument, "grid points must be at least 21");
      if (c.grid_lo && c.grid_hi && !(*c.grid_lo < *c.grid_hi)) {
        throw Error(ErrorCode::InvalidArgument, "grid lo must be below grid hi");
      }
    }
    if (c.subcommand == Subcommand::Simulate || c.subcommand == Subcommand::GenData) {
      designs_for(c);
      for (double m : c.mu2) {
        if (!(m >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mu2 must be >= 0");
      }
      if (!(std::abs(c.rho) < 1.0)) throw Error(ErrorCode::InvalidArgument, "rho must lie in (-1, 1)");
      if (c.k < 1 || c.n <= c.k + 1) throw Error(ErrorCode::InvalidArgument, "need k >= 1 and n > k + 1");
    }
    if (c.subcommand == Subcommand::Simulate && c.reps < 100) {
      throw Error(ErrorCode::InvalidArgument, "reps must be at least 100");
    }
  });
}

TestOptions test_options(const CliConfig& c) {
  TestOptions o;
  o.statistic.estimator.type = *parse_estimator(c.estimator);
  o.statistic.estimator.cue.lower = c.cue_lower;
  o.statistic.estimator.cue.upper = c.cue_upper;
  if (c.wald_form) o.statistic.form = parse_wald_form(*c.wald_form);
  o.statistic.plugin = c.plugin == "null" ? VariancePlugin::Null : VariancePlugin::Estimate;
  o.vcov = vcov_kind(c);
  o.alpha = c.alpha;
  o.seed = c.seed;
  o.n_draws = c.draws.value_or(c.subcommand == Subcommand::Ci ? 4000 : 20000);
  return o;
}

int run_test(const CliConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    validate(config);
    apply_threads(config);
    const IVData data = load(config);
    const VectorXd beta0 = Eigen::Map<const VectorXd>(config.beta0.data(), static_cast<Index>(config.beta0.size()));
    const auto result = conditional_wald_test(data, beta0, test_options(config));
    emit(config, out, dump_json(to_json(result)));
    return 0;
  });
}

int run_ci(const CliConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    validate(config);
    apply_threads(config);
    const IVData data = load(config);
    GridSpec grid;
    grid.lo = config.grid_lo;
    grid.hi = config.grid_hi;
    grid.count = config.grid_points;
    const auto set = invert_confidence_set(data, test_options(config), grid);
    emit(config, out, dump_json(to_json(set)));
    return 0;
  });
}

int run_simulate(const CliConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    validate(config);
    apply_threads(config);
    ExperimentConfig ec;
    const TestOptions o = test_options(config);
    ec.statistic = o.statistic;
    if (config.vcov != "hc" || config.small_sample) ec.vcov = o.vcov;
    ec.alpha = o.alpha;
    ec.n_draws = config.draws.value_or(2000);
    ec.master_seed = config.seed;
    const auto report = staged("simulate", [&] {
      return size_power_experiment(designs_for(config), ec, config.offsets, config.reps);
    });
    emit(config, out, dump_json(to_json(report)));
    const std::string table = format_table(report);
    if (config.table_path) {
      std::ofstream f(*config.table_path);
      if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open table file '" + *config.table_path + "'", "output");
      f << table;
    } else if (config.output) {
      out << table;
    }
    return 0;
  });
}

void write_csv(std::ostream& os, const IVData& data) {
  const Index p = data.p();
  const Index k = data.k();
  os << "y";
  for (Index j = 0; j < p; ++j) os << ",x" << (p == 1 ? std::string() : std::to_string(j + 1));
  for (Index j = 0; j < k; ++j) os << ",z" << j + 1;
  if (data.cluster_ids) os << ",cluster";
  os << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    os << format_number(data.y1[i]);
    for (Index j = 0; j < p; ++j) os << ',' << format_number(data.Y2(i, j));
    for (Index j = 0; j < k; ++j) os << ',' << format_number(data.Z(i, j));
    if (data.cluster_ids) os << ',' << (*data.cluster_ids)[static_cast<std::size_t>(i)];
    os << '\n';
  }
}

int run_gen_data(const CliConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    validate(config);
    const auto designs = designs_for(config);
    if (designs.size() != 1) {
      throw Error(ErrorCode::InvalidArgument, "gen-data takes exactly one mu2 and one error_kind", "validate");
    }
    std::ostringstream csv;
    write_csv(csv, generate_dgp(designs.front()));
    std::string text = csv.str();
    text.pop_back();
    emit(config, out, text);
    return 0;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Weak-instrument robust conditional Wald tests for linear IV"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::optional<long long> draws;
  std::optional<double> beta0_scalar;
  bool no_intercept = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--estimator", c.estimator, "2sls, liml, gmm2 or cue")->capture_default_str();
    sub->add_option("--vcov", c.vcov, "hc, hac or cluster")->capture_default_str();
    sub->add_option("--bandwidth", c.bandwidth, "HAC Bartlett lag truncation")->capture_default_str();
    sub->add_flag("--small-sample", c.small_sample, "degrees-of-freedom scaling of the covariance");
    sub->add_option("--wald-form", c.wald_form, "sandwich or efficient (default follows the estimator)");
    sub->add_option("--plugin", c.plugin, "variance plug-in for b: estimate or null")->capture_default_str();
    sub->add_option("--cue-lower", c.cue_lower, "lower bound of the CUE search interval");
    sub->add_option("--cue-upper", c.cue_upper, "upper bound of the CUE search interval");
    sub->add_option("--alpha", c.alpha, "test level in (0, 0.5]")->capture_default_str();
    sub->add_option("--draws", draws, "Monte Carlo draws per critical value (>= 1000)");
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--output,-o", c.output, "write JSON here instead of standard output");
    sub->add_option("--threads", c.threads, "cap on worker threads (env RCW_THREADS)");
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", c.data_path, "CSV file with a header row")->required();
    sub->add_option("--y", c.columns.y, "outcome column")->required();
    sub->add_option("--endog", c.columns.endog, "endogenous regressor column(s)")->required()->delimiter(',');
    sub->add_option("--instruments", c.columns.instruments, "excluded instrument columns")
        ->required()
        ->delimiter(',');
    sub->add_option("--exog", c.columns.exog, "included exogenous columns")->delimiter(',');
    sub->add_option("--cluster", c.columns.cluster, "integer cluster label column");
    sub->add_flag("--no-intercept", no_intercept, "do not add a constant to the exogenous block");
  };
  auto add_design = [&](CLI::App* sub, bool lists) {
    if (lists) {
      sub->add_option("--mu2", c.mu2, "concentration parameter(s)")->delimiter(',')->capture_default_str();
      sub->add_option("--error-kind", c.error_kinds, "homoskedastic, heteroskedastic or clustered")
          ->delimiter(',')
          ->capture_default_str();
    } else {
      sub->add_option("--mu2", c.mu2, "concentration parameter")->expected(1)->capture_default_str();
      sub->add_option("--error-kind", c.error_kinds, "homoskedastic, heteroskedastic or clustered")
          ->expected(1)
          ->capture_default_str();
    }
    sub->add_option("--n", c.n, "observations")->capture_default_str();
    sub->add_option("--k", c.k, "instruments")->capture_default_str();
    sub->add_option("--rho", c.rho, "endogeneity correlation")->capture_default_str();
    sub->add_option("--clusters", c.clusters, "clusters for the clustered design")->capture_default_str();
    sub->add_option("--eta", c.eta, "within-cluster error correlation")->capture_default_str();
    sub->add_option("--beta-true", c.beta_true, "structural coefficient")->capture_default_str();
  };

  auto* test = app.add_subcommand("test", "conditional Wald test of H0: beta = beta0");
  add_data(test);
  add_common(test);
  test->add_option("--beta0", c.beta0, "null value(s), one per endogenous regressor")->required()->delimiter(',');

  auto* ci = app.add_subcommand("ci", "confidence set by inverting the test over a grid (p = 1)");
  add_data(ci);
  add_common(ci);
  ci->add_option("--grid-lo", c.grid_lo, "lowest grid point (default 2SLS - 40 SE)");
  ci->add_option("--grid-hi", c.grid_hi, "highest grid point (default 2SLS + 40 SE)");
  ci->add_option("--grid-points", c.grid_points, "grid size (>= 21)")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "size and power experiment");
  add_common(sim);
  add_design(sim, true);
  sim->add_option("--offsets", c.offsets, "beta0 - beta_true values; 0 measures size")->delimiter(',');
  sim->add_option("--reps", c.reps, "replications per design and offset (>= 100)")->capture_default_str();
  sim->add_option("--table", c.table_path, "write the plain-text table here");

  auto* gen = app.add_subcommand("gen-data", "write one simulated dataset as CSV");
  add_design(gen, false);
  gen->add_option("--seed", c.seed, "random seed")->capture_default_str();
  gen->add_option("--output,-o", c.output, "write CSV here instead of standard output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", "parse", e.what());
    return 2;
  }

  if (draws) {
    if (*draws < 0) {
      print_error(err, "invalid_argument", "validate", "draws must be at least 1000");
      return 2;
    }
    c.draws = static_cast<std::size_t>(*draws);
  }
  c.columns.add_intercept = !no_intercept;

  if (test->parsed()) {
    c.subcommand = Subcommand::Test;
    return run_test(c, out, err);
  }
  if (ci->parsed()) {
    c.subcommand = Subcommand::Ci;
    return run_ci(c, out, err);
  }
  if (sim->parsed()) {
    c.subcommand = Subcommand::Simulate;
    return run_simulate(c, out, err);
  }
  c.subcommand = Subcommand::GenData;
  return run_gen_data(c, out, err);
}

}  // namespace rcw::cli
