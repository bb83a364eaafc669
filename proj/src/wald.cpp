#include "rcw/wald.hpp"

#include "rcw/error.hpp"
#include "rcw/linalg.hpp"

#include <algorithm>

namespace rcw {
namespace {

VectorXd plugin_b(const VectorXd& beta_hat, const VectorXd& beta0, VariancePlugin plugin) {
  const VectorXd& beta = plugin == VariancePlugin::Estimate ? beta_hat : beta0;
  VectorXd b(beta.size() + 1);
  b[0] = 1.0;
  b.tail(beta.size()) = -beta;
  return b;
}

void check_dims(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat, const VectorXd& beta0) {
  const Index p = R.cols() - 1;
  if (p < 1 || beta_hat.size() != p || beta0.size() != p || sigma.rows() != R.size() ||
      sigma.cols() != R.size()) {
    throw Error(ErrorCode::InvalidArgument, "Wald statistic: dimension mismatch");
  }
}

VectorXd std_errors(const MatrixXd& variance) {
  return variance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

std::string to_string(WaldForm form) {
  return form == WaldForm::Sandwich ? "sandwich" : "efficient";
}

std::optional<WaldForm> parse_wald_form(const std::string& name) {
  if (name == "sandwich") return WaldForm::Sandwich;
  if (name == "efficient") return WaldForm::Efficient;
  return std::nullopt;
}

WaldForm default_wald_form(EstimatorType type) {
  return (type == EstimatorType::GMM2 || type == EstimatorType::CUE) ? WaldForm::Efficient
                                                                     : WaldForm::Sandwich;
}

WaldComponents wald_sandwich(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat,
                             const VectorXd& beta0, VariancePlugin plugin) {
  check_dims(R, sigma, beta_hat, beta0);
  const Index p = R.cols() - 1;
  const auto r2 = R.rightCols(p);

  WaldComponents out;
  out.b_hat = plugin_b(beta_hat, beta0, plugin);
  out.B_hat = linalg::symmetrize(r2.transpose() * r2);
  const MatrixXd b_inv = linalg::sym_inverse(out.B_hat, "R2'R2");
  const MatrixXd v = linalg::kron_quadratic(sigma, out.b_hat, R.rows());
  out.A_hat = linalg::symmetrize(r2.transpose() * v * r2);
  out.variance = linalg::symmetrize(b_inv * *out.A_hat * b_inv);
  out.se = std_errors(out.variance);
  const VectorXd d = beta_hat - beta0;
  out.statistic = std::max(0.0, d.dot(linalg::sym_inverse(out.variance, "sandwich variance") * d));
  return out;
}

WaldComponents wald_efficient(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat,
                              const VectorXd& beta0, VariancePlugin plugin) {
  check_dims(R, sigma, beta_hat, beta0);
  const Index p = R.cols() - 1;
  const auto r2 = R.rightCols(p);

  WaldComponents out;
  out.b_hat = plugin_b(beta_hat, beta0, plugin);
  const MatrixXd v = linalg::kron_quadratic(sigma, out.b_hat, R.rows());
  const MatrixXd v_inv = linalg::sym_inverse(v, "moment variance (b ⊗ I)'Sigma(b ⊗ I)");
  out.B_hat = linalg::symmetrize(r2.transpose() * v_inv * r2);
  out.variance = linalg::sym_inverse(out.B_hat, "R2' V^{-1} R2");
  out.se = std_errors(out.variance);
  const VectorXd d = beta_hat - beta0;
  out.statistic = std::max(0.0, d.dot(out.B_hat * d));
  return out;
}

WaldComponents wald(WaldForm form, const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta_hat,
                    const VectorXd& beta0, VariancePlugin plugin) {
  return form == WaldForm::Sandwich ? wald_sandwich(R, sigma, beta_hat, beta0, plugin)
                                    : wald_efficient(R, sigma, beta_hat, beta0, plugin);
}

WaldComponents wald_sandwich(const ReducedFormStats& stats, const VectorXd& beta_hat,
                             const VectorXd& beta0, VariancePlugin plugin) {
  return wald_sandwich(stats.R, stats.Sigma_hat, beta_hat, beta0, plugin);
}

WaldComponents wald_efficient(const ReducedFormStats& stats, const VectorXd& beta_hat,
                              const VectorXd& beta0, VariancePlugin plugin) {
  return wald_efficient(stats.R, stats.Sigma_hat, beta_hat, beta0, plugin);
}

}  // namespace rcw
