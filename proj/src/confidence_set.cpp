#include "rcw/conditional.hpp"
#include "rcw/error.hpp"
#include "rcw/random.hpp"

#include <cmath>
#include <exception>
#include <vector>

namespace rcw {

void assemble_intervals(ConfidenceSet& set) {
  set.intervals.clear();
  const std::size_t n = set.grid.size();
  set.unbounded_left = n > 0 && set.grid.front().accepted;
  set.unbounded_right = n > 0 && set.grid.back().accepted;
  std::size_t i = 0;
  while (i < n) {
    if (!set.grid[i].accepted) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && set.grid[j + 1].accepted) ++j;
    Interval iv;
    if (i > 0) iv.lo = 0.5 * (set.grid[i - 1].beta0 + set.grid[i].beta0);
    if (j + 1 < n) iv.hi = 0.5 * (set.grid[j].beta0 + set.grid[j + 1].beta0);
    set.intervals.push_back(iv);
    i = j + 1;
  }
  set.empty = set.intervals.empty();
}

ConfidenceSet invert_confidence_set(const ReducedFormStats& stats, const TestOptions& options,
                                    const GridSpec& spec) {
  staged("validate", [&] {
    validate(options);
    if (stats.p() != 1) {
      throw Error(ErrorCode::Unsupported, "confidence sets by inversion need a single endogenous regressor");
    }
    if (spec.count < 21) throw Error(ErrorCode::InvalidArgument, "grid needs at least 21 points");
  });

  ConfidenceSet set;
  set.alpha = options.alpha;
  set.n_draws = options.n_draws;
  set.seed = options.seed;
  set.estimator = options.statistic.estimator;
  set.vcov = options.vcov;
  set.form = options.statistic.resolved_form();
  set.n = stats.n;
  set.k = stats.k();
  set.p = stats.p();

  // The default grid is centred on 2SLS whatever the tested estimator.
  const auto tsls = staged("estimate", [&] { return estimate_2sls(stats); });
  set.grid_center = tsls.beta_hat[0];
  set.conventional_se = staged("wald", [&] {
    return wald_sandwich(stats, tsls.beta_hat, tsls.beta_hat).se[0];
  });

  double lo = spec.lo.value_or(set.grid_center - 40.0 * set.conventional_se);
  double hi = spec.hi.value_or(set.grid_center + 40.0 * set.conventional_se);
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw Error(ErrorCode::InvalidArgument, "confidence-set grid is degenerate", "grid");
  }

  const auto count = static_cast<std::size_t>(spec.count);
  set.grid.resize(count);
  for (std::size_t g = 0; g < count; ++g) {
    set.grid[g].beta0 = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(count - 1);
  }

  set.beta_hat = staged("estimate", [&] { return estimate(options.statistic.estimator, stats); }).beta_hat[0];
  // One slot per grid point so the reported failure does not depend on the schedule.
  std::vector<std::exception_ptr> failures(count);
  const auto n = static_cast<std::int64_t>(count);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t g = 0; g < n; ++g) {
    auto& point = set.grid[static_cast<std::size_t>(g)];
    try {
      const VectorXd beta0 = VectorXd::Constant(1, point.beta0);
      const auto cond = null_transform(stats, beta0);
      const auto cv = simulate_critical_value(cond, stats, options.statistic, options.alpha,
                                              options.n_draws,
                                              derive_seed(options.seed, static_cast<std::uint64_t>(g)));
      point.statistic = cv.observed;
      point.critical_value = cv.c_alpha;
      point.p_value = cv.p_value;
      point.accepted = !(cv.observed > cv.c_alpha);
    } catch (...) {
      failures[static_cast<std::size_t>(g)] = std::current_exception();
    }
  }
  for (const auto& failure : failures) {
    if (!failure) continue;
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      throw e.with_stage("critical_value");
    }
  }

  assemble_intervals(set);
  return set;
}

ConfidenceSet invert_confidence_set(const IVData& data, const TestOptions& options, const GridSpec& grid) {
  staged("validate", [&] { validate(data); });
  const auto stats = staged("reduced_form", [&] { return reduced_form(data, options.vcov); });
  auto set = invert_confidence_set(stats, options, grid);
  set.q = data.q();
  return set;
}

}  // namespace rcw
