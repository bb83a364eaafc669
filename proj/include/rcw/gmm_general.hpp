#pragma once

#include "rcw/conditional.hpp"
#include "rcw/core_model.hpp"

#include <cstdint>
#include <functional>

namespace rcw {

// A weakly identified moment model supplied by the caller:
//   h(theta0)      standardized sample moments, k
//   grad_h(theta0) sample gradient, k x p
//   sigma(theta0)  joint covariance of (h, vec grad_h), (p+1)k square with
//                  blocks [S_hh S_htheta; S_thetah S_thetatheta]
// The callables must be safe to call concurrently at a fixed theta0.
struct MomentModel {
  Index theta_dim = 0;
  Index moment_dim = 0;
  std::function<VectorXd(const VectorXd&)> h;
  std::function<MatrixXd(const VectorXd&)> grad_h;
  std::function<MatrixXd(const VectorXd&)> sigma;
};

struct GeneralConditioning {
  VectorXd theta0;
  VectorXd h0;        // k
  MatrixXd grad0;     // k x p
  VectorXd D_hat;     // kp: vec(grad0) - S_thetah S_hh^{-1} h0
  MatrixXd sigma;     // (p+1)k square
  MatrixXd Sigma_hh, Sigma_htheta, Sigma_thetah, Sigma_thetatheta;
  MatrixXd Sigma_hh_half;
  MatrixXd projection;  // S_thetah S_hh^{-1}, pk x k
};

GeneralConditioning general_null_transform(const MomentModel& model, const VectorXd& theta0);

//   W = h'G [G' (b ⊗ I)' Sigma (b ⊗ I) G]^{-1} G'h,   b = (1, -h'G (G'G)^{-1})'
double general_wald_statistic(const VectorXd& h, const MatrixXd& grad, const MatrixXd& sigma);
double general_wald(const MomentModel& model, const VectorXd& theta0);

struct GeneralConditionalResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value_conditional = 1.0;
  std::size_t n_draws = 0;
  std::size_t degenerate_draws = 0;
  std::uint64_t seed = 0;
  bool reject = false;
  double alpha = 0.05;
  VectorXd D_hat_n;
};

// Draws h* ~ N(0, S_hh) from the same per-draw streams as the linear test,
// sets vec(grad*) = D + S_thetah S_hh^{-1} h*, and takes the conditional
// (1 - alpha) quantile of W over the draws.
GeneralConditionalResult general_conditional_test(const MomentModel& model, const VectorXd& theta0,
                                                  double alpha, std::size_t n_draws, std::uint64_t seed);

std::vector<double> general_simulate_draws(const GeneralConditioning& cond, std::size_t n_draws,
                                           std::uint64_t seed, bool parallel = true);

// The linear IV model as a moment model: h = R1 - R2 theta, grad = -R2 and
// sigma = S Sigma0(theta) S with S = diag(I_k, -I_pk). With this covariance
// the general statistic equals the linear 2SLS sandwich Wald statistic.
// The returned callables refer to `stats`, which must outlive the model.
MomentModel linear_iv_moment_model(const ReducedFormStats& stats);

}  // namespace rcw
