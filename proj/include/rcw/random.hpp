#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>

namespace rcw {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Deterministic child seed for an indexed sub-task: derive_seed(s, a, b) is a
// pure function, so work keyed by index is independent of execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept;

// Counter-based generator: output i of stream (seed, stream) is
// mix64(key + i * golden), with key fixed by (seed, stream). Satisfies
// UniformRandomBitGenerator, so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fills z with i.i.d. standard normals from stream (seed, stream).
void standard_normals(std::uint64_t seed, std::uint64_t stream, Eigen::Ref<Eigen::VectorXd> z);

}  // namespace rcw
