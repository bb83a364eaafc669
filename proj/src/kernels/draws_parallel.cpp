#include "rcw/kernels.hpp"

#include <omp.h>

#include <exception>

namespace rcw::kernels {

std::vector<double> evaluate_draws_parallel(std::size_t n_draws, const EvaluatorFactory& factory) {
  // Nested inside an already-parallel grid or replication loop: run inline.
  if (omp_in_parallel()) return evaluate_draws_serial(n_draws, factory);

  std::vector<double> out(n_draws);
  std::exception_ptr failure;
  const auto n = static_cast<std::int64_t>(n_draws);

#pragma omp parallel
  {
    std::unique_ptr<DrawEvaluator> eval;
    try {
      eval = factory();
    } catch (...) {
#pragma omp critical(rcw_draw_failure)
      if (!failure) failure = std::current_exception();
    }
#pragma omp for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
      if (!eval) continue;
      try {
        out[static_cast<std::size_t>(j)] = (*eval)(static_cast<std::uint64_t>(j));
      } catch (...) {
#pragma omp critical(rcw_draw_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace rcw::kernels
