#include "rcw/simulator.hpp"

#include "rcw/error.hpp"
#include "rcw/random.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace rcw {

std::string to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Homoskedastic: return "homoskedastic";
    case ErrorKind::Heteroskedastic: return "heteroskedastic";
    case ErrorKind::Clustered: return "clustered";
  }
  return "unknown";
}

std::optional<ErrorKind> parse_error_kind(const std::string& name) {
  if (name == "homoskedastic" || name == "homo") return ErrorKind::Homoskedastic;
  if (name == "heteroskedastic" || name == "hetero") return ErrorKind::Heteroskedastic;
  if (name == "clustered" || name == "cluster") return ErrorKind::Clustered;
  return std::nullopt;
}

void validate(const DGPDesign& d) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "design: " + m); };
  if (d.k < 1) fail("k must be >= 1");
  if (d.n <= d.k + 1) fail("n must exceed k + 1");
  if (!(d.mu2 >= 0.0) || !std::isfinite(d.mu2)) fail("mu2 must be >= 0");
  if (!(std::abs(d.rho) < 1.0)) fail("rho must lie in (-1, 1)");
  if (!std::isfinite(d.beta_true)) fail("beta_true must be finite");
  if (d.error_kind == ErrorKind::Clustered) {
    if (d.clusters < 2 || d.clusters > d.n) fail("clusters must lie in [2, n]");
    if (!(d.eta >= 0.0 && d.eta < 1.0)) fail("eta must lie in [0, 1)");
  }
}

IVData generate_dgp(const DGPDesign& d) {
  validate(d);
  CounterRng rng(d.seed, 0);
  std::normal_distribution<double> normal;
  const Index n = d.n;
  const Index k = d.k;

  MatrixXd z(n, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) z(i, j) = normal(rng);
  }
  const double c = std::sqrt(d.mu2 / static_cast<double>(n));
  const VectorXd pi = VectorXd::Constant(k, c / std::sqrt(static_cast<double>(k)));

  const double tail = std::sqrt(1.0 - d.rho * d.rho);
  auto correlated_pair = [&](double& u, double& v) {
    const double e1 = normal(rng);
    const double e2 = normal(rng);
    u = e1;
    v = d.rho * e1 + tail * e2;
  };

  VectorXd u(n), v(n);
  for (Index i = 0; i < n; ++i) correlated_pair(u[i], v[i]);

  IVData data;
  switch (d.error_kind) {
    case ErrorKind::Homoskedastic:
      break;
    case ErrorKind::Heteroskedastic: {
      const VectorXd scale = z.col(0).cwiseAbs();
      u = u.cwiseProduct(scale);
      v = v.cwiseProduct(scale);
      break;
    }
    case ErrorKind::Clustered: {
      const Index groups = d.clusters;
      std::vector<double> cu(static_cast<std::size_t>(groups)), cv(static_cast<std::size_t>(groups));
      for (Index g = 0; g < groups; ++g) correlated_pair(cu[g], cv[g]);
      const double shared = std::sqrt(d.eta);
      const double own = std::sqrt(1.0 - d.eta);
      std::vector<std::int64_t> ids(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) {
        const Index g = i * groups / n;
        ids[static_cast<std::size_t>(i)] = g;
        u[i] = shared * cu[g] + own * u[i];
        v[i] = shared * cv[g] + own * v[i];
      }
      data.cluster_ids = std::move(ids);
      break;
    }
  }

  data.Z = std::move(z);
  data.Y2 = data.Z * pi + v;
  data.y1 = data.Y2.col(0) * d.beta_true + u;
  return data;
}

VcovKind vcov_for(const DGPDesign& design, const ExperimentConfig& config) {
  if (config.vcov) return *config.vcov;
  return design.error_kind == ErrorKind::Clustered ? VcovKind::cluster() : VcovKind::hc();
}

ExperimentReport size_power_experiment(const std::vector<DGPDesign>& designs,
                                       const ExperimentConfig& config,
                                       const std::vector<double>& offsets, std::size_t reps) {
  if (reps < 100) throw Error(ErrorCode::InvalidArgument, "experiments need at least 100 replications");
  if (designs.empty() || offsets.empty()) {
    throw Error(ErrorCode::InvalidArgument, "experiments need at least one design and one offset");
  }
  for (const auto& d : designs) validate(d);
  TestOptions probe;
  probe.statistic = config.statistic;
  probe.alpha = config.alpha;
  probe.n_draws = config.n_draws;
  validate(probe);

  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_off = offsets.size();
  const std::size_t jobs = designs.size() * reps;
  // outcome bits per (job, offset): 1 = CW reject, 2 = conventional reject, 4 = failure
  std::vector<unsigned char> outcome(jobs * n_off, 0);
  const double conventional_cv = chi2_critical_value(config.alpha, 1);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t job = 0; job < static_cast<std::int64_t>(jobs); ++job) {
    const auto d = static_cast<std::size_t>(job) / reps;
    const auto r = static_cast<std::size_t>(job) % reps;
    DGPDesign design = designs[d];
    design.seed = derive_seed(config.master_seed, d, r);
    TestOptions options;
    options.statistic = config.statistic;
    options.vcov = vcov_for(design, config);
    options.alpha = config.alpha;
    options.n_draws = config.n_draws;

    std::optional<ReducedFormStats> stats;
    try {
      stats = reduced_form(generate_dgp(design), options.vcov);
    } catch (const Error&) {
    }
    for (std::size_t o = 0; o < n_off; ++o) {
      auto& cell = outcome[static_cast<std::size_t>(job) * n_off + o];
      if (!stats) {
        cell = 4;
        continue;
      }
      options.seed = derive_seed(design.seed, 1 + o);
      try {
        const auto res = conditional_wald_test(*stats, VectorXd::Constant(1, design.beta_true + offsets[o]),
                                               options);
        cell = static_cast<unsigned char>((res.reject ? 1 : 0) |
                                          (res.statistic > conventional_cv ? 2 : 0));
      } catch (const Error&) {
        cell = 4;
      }
    }
  }

  ExperimentReport report;
  report.designs = designs;
  report.offsets = offsets;
  report.config = config;
  report.reps = reps;
  for (std::size_t d = 0; d < designs.size(); ++d) {
    for (std::size_t o = 0; o < n_off; ++o) {
      ExperimentRow row;
      row.design_index = d;
      row.offset = offsets[o];
      for (std::size_t r = 0; r < reps; ++r) {
        const auto cell = outcome[(d * reps + r) * n_off + o];
        if (cell & 4) {
          ++row.failures;
          continue;
        }
        row.cw_rejections += (cell & 1) ? 1 : 0;
        row.conventional_rejections += (cell & 2) ? 1 : 0;
      }
      row.reps = reps - row.failures;
      if (row.reps > 0) {
        const double m = static_cast<double>(row.reps);
        row.cw_rate = static_cast<double>(row.cw_rejections) / m;
        row.conventional_rate = static_cast<double>(row.conventional_rejections) / m;
        row.cw_mcse = std::sqrt(row.cw_rate * (1.0 - row.cw_rate) / m);
        row.conventional_mcse = std::sqrt(row.conventional_rate * (1.0 - row.conventional_rate) / m);
      }
      report.rows.push_back(row);
    }
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string format_table(const ExperimentReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-3s %-16s %8s %6s %6s %4s %10s %6s %18s %18s %5s\n", "#", "errors",
                "mu2", "rho", "n", "k", "offset", "reps", "CW rate (se)", "Wald rate (se)", "fail");
  os << line;
  for (const auto& row : report.rows) {
    const auto& d = report.designs[row.design_index];
    std::snprintf(line, sizeof line, "%-3zu %-16s %8.3g %6.3g %6td %4td %10.4g %6zu %9.4f (%6.4f) %9.4f (%6.4f) %5zu\n",
                  row.design_index, to_string(d.error_kind).c_str(), d.mu2, d.rho, d.n, d.k, row.offset,
                  row.reps, row.cw_rate, row.cw_mcse, row.conventional_rate, row.conventional_mcse,
                  row.failures);
    os << line;
  }
  std::snprintf(line, sizeof line, "estimator=%s form=%s alpha=%g draws=%zu seed=%llu runtime=%.2fs\n",
                to_string(report.config.statistic.estimator.type).c_str(),
                to_string(report.config.statistic.resolved_form()).c_str(), report.config.alpha,
                report.config.n_draws, static_cast<unsigned long long>(report.config.master_seed),
                report.runtime_seconds);
  os << line;
  return os.str();
}

}  // namespace rcw
