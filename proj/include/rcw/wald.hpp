#pragma once

#include "rcw/core_model.hpp"
#include "rcw/estimators.hpp"

#include <optional>
#include <string>

namespace rcw {

// Sandwich form for 2SLS/LIML, efficient (inverse-B) form for GMM2/CUE.
enum class WaldForm { Sandwich, Efficient };

// Where b = (1, -beta')' in the variance is evaluated.
enum class VariancePlugin { Estimate, Null };

std::string to_string(WaldForm form);
std::optional<WaldForm> parse_wald_form(const std::string& name);
WaldForm default_wald_form(EstimatorType type);

struct WaldComponents {
  MatrixXd B_hat;                 // p x p
  std::optional<MatrixXd> A_hat;  // p x p, sandwich only
  VectorXd b_hat;                 // (p+1), plug-in vector used in the variance
  MatrixXd variance;              // estimated variance of beta_hat
  VectorXd se;                    // sqrt(diag(variance))
  double statistic = 0.0;
};

//   W* = d' [ (R2'R2)^{-1} R2' V R2 (R2'R2)^{-1} ]^{-1} d,  V = (b ⊗ I)' Sigma (b ⊗ I)
WaldComponents wald_sandwich(const ReducedFormStats& stats, const VectorXd& beta_hat,
                             const VectorXd& beta0, VariancePlugin plugin = VariancePlugin::Estimate);
//   W° = d' [ R2' V^{-1} R2 ] d
WaldComponents wald_efficient(const ReducedFormStats& stats, const VectorXd& beta_hat,
                              const VectorXd& beta0, VariancePlugin plugin = VariancePlugin::Estimate);

WaldComponents wald_sandwich(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat,
                             const VectorXd& beta0, VariancePlugin plugin = VariancePlugin::Estimate);
WaldComponents wald_efficient(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat,
                              const VectorXd& beta0, VariancePlugin plugin = VariancePlugin::Estimate);

WaldComponents wald(WaldForm form, const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat,
                    const VectorXd& beta0, VariancePlugin plugin = VariancePlugin::Estimate);

}  // namespace rcw
