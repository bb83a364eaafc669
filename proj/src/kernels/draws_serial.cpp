#include "rcw/kernels.hpp"

namespace rcw::kernels {

std::vector<double> evaluate_draws_serial(std::size_t n_draws, const EvaluatorFactory& factory) {
  std::vector<double> out(n_draws);
  auto eval = factory();
  for (std::size_t j = 0; j < n_draws; ++j) out[j] = (*eval)(j);
  return out;
}

}  // namespace rcw::kernels
