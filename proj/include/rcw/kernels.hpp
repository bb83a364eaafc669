#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

// Monte Carlo draw loops. Each draw j is a pure function of j (the evaluator
// seeds its own counter-based stream from j), so the parallel loop returns
// exactly what the serial reference returns for any team size.
namespace rcw::kernels {

class DrawEvaluator {
 public:
  virtual ~DrawEvaluator() = default;
  // Statistic for draw j; +inf for a degenerate draw.
  virtual double operator()(std::uint64_t j) = 0;
};

// Called once per worker thread so evaluators can own scratch space.
using EvaluatorFactory = std::function<std::unique_ptr<DrawEvaluator>()>;

std::vector<double> evaluate_draws_serial(std::size_t n_draws, const EvaluatorFactory& factory);
std::vector<double> evaluate_draws_parallel(std::size_t n_draws, const EvaluatorFactory& factory);

}  // namespace rcw::kernels
