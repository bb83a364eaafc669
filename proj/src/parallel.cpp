#include "rcw/parallel.hpp"

#include <omp.h>

namespace rcw {
namespace {
int default_threads() {
  static const int n = omp_get_max_threads();
  return n;
}
}  // namespace

void set_num_threads(int n) {
  default_threads();
  omp_set_num_threads(n < 1 ? default_threads() : n);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace rcw
