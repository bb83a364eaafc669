#pragma once

#include "rcw/core_model.hpp"

#include <optional>
#include <string>

namespace rcw {

enum class EstimatorType { TSLS, LIML, GMM2, CUE };

std::string to_string(EstimatorType type);
std::optional<EstimatorType> parse_estimator(const std::string& name);

// Continuously-updating GMM is minimized by a 1-D grid followed by golden
// section on the bracket around the best grid point (p = 1 only).
struct CueSettings {
  std::optional<double> lower;
  std::optional<double> upper;
  int grid_points = 512;
  double tolerance = 1e-8;
  double se_multiple = 20.0;  // grid half-width in 2SLS standard errors
};

struct EstimatorKind {
  EstimatorType type = EstimatorType::TSLS;
  CueSettings cue;

  static EstimatorKind tsls() { return {EstimatorType::TSLS, {}}; }
  static EstimatorKind liml() { return {EstimatorType::LIML, {}}; }
  static EstimatorKind gmm2() { return {EstimatorType::GMM2, {}}; }
  static EstimatorKind cue_with(CueSettings s = {}) { return {EstimatorType::CUE, s}; }
};

void validate(const CueSettings& settings);

struct EstimateResult {
  VectorXd beta_hat;
  EstimatorKind kind;
  std::optional<double> liml_lambda;
  std::optional<double> cue_criterion;
  bool boundary = false;  // CUE minimum sits on the edge of the search grid
};

// Each estimator depends on the data only through R and the fixed Sigma/Phi.
// The (R, fixed) overloads let the simulation evaluate an estimator at a
// redrawn R while keeping the observed Sigma_hat, Phi_hat and n.
EstimateResult estimate_2sls(const ReducedFormStats& stats);
EstimateResult estimate_liml(const ReducedFormStats& stats);
EstimateResult estimate_gmm2(const ReducedFormStats& stats);
EstimateResult estimate_cue(const ReducedFormStats& stats, const CueSettings& settings = {});

EstimateResult estimate(const EstimatorKind& kind, const ReducedFormStats& stats);
EstimateResult estimate(const EstimatorKind& kind, const MatrixXd& R, const ReducedFormStats& fixed);

// CUE objective b'R' [(b ⊗ I)' Sigma (b ⊗ I)]^{-1} R b; +inf where the weight
// is singular.
double cue_objective(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta);

}  // namespace rcw
