// Serial reference vs OpenMP draw loop on one conditional critical value.
#include "rcw/conditional.hpp"
#include "rcw/gmm_general.hpp"
#include "rcw/parallel.hpp"
#include "rcw/simulator.hpp"

#include <benchmark/benchmark.h>

namespace {

struct Fixture {
  rcw::ReducedFormStats stats;
  rcw::NullConditioning cond;
  rcw::StatisticSpec spec;

  explicit Fixture(rcw::EstimatorType type) {
    rcw::DGPDesign d;
    d.mu2 = 4.0;
    d.error_kind = rcw::ErrorKind::Heteroskedastic;
    d.seed = 1;
    stats = rcw::reduced_form(rcw::generate_dgp(d), rcw::VcovKind::hc());
    cond = rcw::null_transform(stats, rcw::VectorXd::Zero(1));
    spec.estimator.type = type;
  }
};

void BM_Draws(benchmark::State& state, rcw::EstimatorType type, bool parallel) {
  const Fixture f(type);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto draws = rcw::simulate_draws(f.cond, f.stats, f.spec, n, 42, parallel);
    benchmark::DoNotOptimize(draws.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = parallel ? rcw::max_threads() : 1;
}

void BM_GeneralDraws(benchmark::State& state, bool parallel) {
  const Fixture f(rcw::EstimatorType::TSLS);
  const auto model = rcw::linear_iv_moment_model(f.stats);
  const auto cond = rcw::general_null_transform(model, rcw::VectorXd::Zero(1));
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto draws = rcw::general_simulate_draws(cond, n, 42, parallel);
    benchmark::DoNotOptimize(draws.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Draws, tsls_serial, rcw::EstimatorType::TSLS, false)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Draws, tsls_parallel, rcw::EstimatorType::TSLS, true)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Draws, gmm2_serial, rcw::EstimatorType::GMM2, false)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Draws, gmm2_parallel, rcw::EstimatorType::GMM2, true)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GeneralDraws, serial, false)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_GeneralDraws, parallel, true)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
