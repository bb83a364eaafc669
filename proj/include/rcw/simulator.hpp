#pragma once

#include "rcw/conditional.hpp"
#include "rcw/core_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rcw {

enum class ErrorKind { Homoskedastic, Heteroskedastic, Clustered };

std::string to_string(ErrorKind kind);
std::optional<ErrorKind> parse_error_kind(const std::string& name);

// Single-regressor design. Z_i ~ N(0, I_k), Pi = c (1, ..., 1)' / sqrt(k) with
// c chosen so that n Pi'Pi / var(v2) = mu2, and (u, v2) unit-variance normal
// with correlation rho. Heteroskedastic errors are scaled by |z_i1|; clustered
// errors add a shared cluster shock with within-cluster correlation eta.
struct DGPDesign {
  Index n = 400;
  Index k = 4;
  double mu2 = 16.0;
  double rho = 0.9;
  ErrorKind error_kind = ErrorKind::Homoskedastic;
  int clusters = 25;
  double eta = 0.5;
  double beta_true = 0.0;
  std::uint64_t seed = 0;
};

void validate(const DGPDesign& design);

IVData generate_dgp(const DGPDesign& design);

struct ExperimentConfig {
  StatisticSpec statistic;
  std::optional<VcovKind> vcov;  // unset: cluster for clustered designs, HC otherwise
  double alpha = 0.05;
  std::size_t n_draws = 2000;
  std::uint64_t master_seed = 0;
};

VcovKind vcov_for(const DGPDesign& design, const ExperimentConfig& config);

struct ExperimentRow {
  std::size_t design_index = 0;
  double offset = 0.0;  // beta0 - beta_true
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::size_t cw_rejections = 0;
  std::size_t conventional_rejections = 0;
  double cw_rate = 0.0;
  double cw_mcse = 0.0;
  double conventional_rate = 0.0;
  double conventional_mcse = 0.0;
};

struct ExperimentReport {
  std::vector<DGPDesign> designs;
  std::vector<double> offsets;
  ExperimentConfig config;
  std::size_t reps = 0;
  std::vector<ExperimentRow> rows;  // design-major, then offset
  double runtime_seconds = 0.0;

  const ExperimentRow& row(std::size_t design, std::size_t offset) const {
    return rows[design * offsets.size() + offset];
  }
};

// Replication r of design d uses data seed derive_seed(master, d, r); the
// design's own seed field is ignored. Offset 0 rows measure size, the rest
// power. Each replication also records the fixed chi-square Wald decision.
ExperimentReport size_power_experiment(const std::vector<DGPDesign>& designs,
                                       const ExperimentConfig& config,
                                       const std::vector<double>& offsets, std::size_t reps);

std::string format_table(const ExperimentReport& report);

}  // namespace rcw
