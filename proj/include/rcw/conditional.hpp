#pragma once

#include "rcw/core_model.hpp"
#include "rcw/estimators.hpp"
#include "rcw/wald.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace rcw {

// Which Wald statistic is being conditioned: estimator, form, and the
// variance plug-in.
struct StatisticSpec {
  EstimatorKind estimator;
  std::optional<WaldForm> form;  // unset: sandwich for 2SLS/LIML, efficient for GMM2/CUE
  VariancePlugin plugin = VariancePlugin::Estimate;

  WaldForm resolved_form() const { return form.value_or(default_wald_form(estimator.type)); }
};

// Null rotation of R at beta0: R B0 = [R_u : R2], Sigma0 = (B0' ⊗ I) Sigma (B0 ⊗ I),
// and the conditioning statistic D = vec(R2) - Sigma_2u Sigma_uu^{-1} R_u.
struct NullConditioning {
  VectorXd beta0;
  VectorXd R_u;          // k
  MatrixXd D_hat;        // k x p
  MatrixXd Sigma_uu;     // k x k
  MatrixXd Sigma_u2;     // k x pk
  MatrixXd Sigma_2u;     // pk x k
  MatrixXd Sigma_22;     // pk x pk
  MatrixXd Sigma_uu_half;
  MatrixXd projection;   // Sigma_2u Sigma_uu^{-1}, pk x k

  Index k() const { return R_u.size(); }
  Index p() const { return beta0.size(); }
  MatrixXd Sigma0() const;
};

NullConditioning null_transform(const ReducedFormStats& stats, const VectorXd& beta0);

// Inverse map: vec(R2*) = D + Sigma_2u Sigma_uu^{-1} R_u*, R1* = R_u* + R2* beta0.
MatrixXd reconstruct_R(const NullConditioning& cond, const VectorXd& R_u_star);

// psi: the Wald statistic recomputed from R with Sigma_hat, Phi_hat, n fixed.
double wald_statistic_at(const StatisticSpec& spec, const MatrixXd& R, const ReducedFormStats& fixed,
                         const VectorXd& beta0);

// Order statistic of rank ceil((1 - alpha)(N + 1)) of the draws; +inf when
// that rank exceeds N.
double conditional_quantile(std::vector<double> draws, double alpha);

// Add-one Monte Carlo p-value (1 + #{psi_j >= observed}) / (N + 1).
double monte_carlo_p_value(const std::vector<double>& draws, double observed);

struct CriticalValue {
  double c_alpha = 0.0;
  double p_value = 1.0;
  double observed = 0.0;
  std::size_t n_draws = 0;
  std::size_t degenerate_draws = 0;
};

// Draws R_u* = Sigma_uu^{1/2} zeta_j, zeta_j from stream (seed, j), rebuilds R*
// holding D fixed and evaluates the same statistic at each R*.
CriticalValue simulate_critical_value(const NullConditioning& cond, const ReducedFormStats& stats,
                                      const StatisticSpec& spec, double alpha, std::size_t n_draws,
                                      std::uint64_t seed);

// Raw draws behind simulate_critical_value, exposed for diagnostics and the
// serial/parallel equivalence tests.
std::vector<double> simulate_draws(const NullConditioning& cond, const ReducedFormStats& stats,
                                   const StatisticSpec& spec, std::size_t n_draws, std::uint64_t seed,
                                   bool parallel = true);

struct TestOptions {
  StatisticSpec statistic;
  VcovKind vcov;
  double alpha = 0.05;
  std::size_t n_draws = 20000;
  std::uint64_t seed = 0;
};

void validate(const TestOptions& options);

// chi-square(df) quantile at 1 - alpha: the conventional critical value.
double chi2_critical_value(double alpha, int df);

struct ConditionalResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value_conditional = 1.0;
  std::size_t n_draws = 0;
  std::size_t degenerate_draws = 0;
  std::uint64_t seed = 0;
  bool reject = false;

  double alpha = 0.05;
  double conventional_critical_value = 0.0;
  bool conventional_reject = false;
  VectorXd beta0;
  EstimatorKind estimator;
  VcovKind vcov;
  WaldForm form = WaldForm::Sandwich;
  VariancePlugin plugin = VariancePlugin::Estimate;
  Index n = 0, k = 0, p = 0, q = 0;

  EstimateResult estimate;
  WaldComponents wald;
  ReducedFormStats stats;
  NullConditioning conditioning;
};

ConditionalResult conditional_wald_test(const IVData& data, const VectorXd& beta0,
                                        const TestOptions& options);

// Same test from precomputed sufficient statistics (e.g. a known-Sigma design).
ConditionalResult conditional_wald_test(const ReducedFormStats& stats, const VectorXd& beta0,
                                        const TestOptions& options);

// Confidence sets by test inversion (p = 1).
struct GridSpec {
  std::optional<double> lo;  // defaults: 2SLS estimate -/+ 40 conventional SEs
  std::optional<double> hi;
  int count = 401;
};

struct GridPoint {
  double beta0 = 0.0;
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool accepted = false;
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct ConfidenceSet {
  std::vector<GridPoint> grid;
  std::vector<Interval> intervals;
  double alpha = 0.05;
  bool unbounded_left = false;
  bool unbounded_right = false;
  bool empty = true;
  double beta_hat = 0.0;         // tested estimator
  double grid_center = 0.0;      // 2SLS estimate
  double conventional_se = 0.0;  // 2SLS sandwich standard error
  std::size_t n_draws = 0;
  std::uint64_t seed = 0;
  EstimatorKind estimator;
  VcovKind vcov;
  WaldForm form = WaldForm::Sandwich;
  Index n = 0, k = 0, p = 0, q = 0;
};

// Assembles intervals from an accepted mask: endpoints at midpoints between
// accepted and rejected neighbours, +-inf when a run reaches a grid end.
void assemble_intervals(ConfidenceSet& set);

ConfidenceSet invert_confidence_set(const IVData& data, const TestOptions& options,
                                    const GridSpec& grid = {});
ConfidenceSet invert_confidence_set(const ReducedFormStats& stats, const TestOptions& options,
                                    const GridSpec& grid = {});

}  // namespace rcw
