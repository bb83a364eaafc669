#include "rcw/gmm_general.hpp"

#include "rcw/error.hpp"
#include "rcw/kernels.hpp"
#include "rcw/linalg.hpp"
#include "rcw/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class GeneralDrawEvaluator final : public kernels::DrawEvaluator {
 public:
  GeneralDrawEvaluator(const GeneralConditioning& cond, std::uint64_t seed)
      : cond_(cond), seed_(seed), zeta_(cond.h0.size()) {}

  double operator()(std::uint64_t j) override {
    const Index k = cond_.h0.size();
    const Index p = cond_.theta0.size();
    standard_normals(seed_, j, zeta_);
    const VectorXd h = cond_.Sigma_hh_half * zeta_;
    const VectorXd g = cond_.D_hat + cond_.projection * h;
    try {
      const double w = general_wald_statistic(h, linalg::unvec(g, k, p), cond_.sigma);
      return std::isfinite(w) ? w : kInf;
    } catch (const Error&) {
      return kInf;
    }
  }

 private:
  const GeneralConditioning& cond_;
  std::uint64_t seed_;
  VectorXd zeta_;
};

}  // namespace

GeneralConditioning general_null_transform(const MomentModel& model, const VectorXd& theta0) {
  const Index k = model.moment_dim;
  const Index p = model.theta_dim;
  if (theta0.size() != p) throw Error(ErrorCode::InvalidArgument, "theta0 must have theta_dim entries");
  if (!model.h || !model.grad_h || !model.sigma) {
    throw Error(ErrorCode::InvalidArgument, "moment model is missing a callable");
  }

  GeneralConditioning c;
  c.theta0 = theta0;
  c.h0 = model.h(theta0);
  c.grad0 = model.grad_h(theta0);
  c.sigma = model.sigma(theta0);
  if (c.h0.size() != k || c.grad0.rows() != k || c.grad0.cols() != p || c.sigma.rows() != (p + 1) * k ||
      c.sigma.cols() != (p + 1) * k) {
    throw Error(ErrorCode::InvalidArgument, "moment model callables return inconsistent dimensions");
  }
  c.Sigma_hh = c.sigma.topLeftCorner(k, k);
  c.Sigma_htheta = c.sigma.topRightCorner(k, p * k);
  c.Sigma_thetah = c.sigma.bottomLeftCorner(p * k, k);
  c.Sigma_thetatheta = c.sigma.bottomRightCorner(p * k, p * k);
  c.projection = c.Sigma_thetah * linalg::sym_inverse(c.Sigma_hh, "Sigma_hh");
  c.Sigma_hh_half = linalg::sym_sqrt(c.Sigma_hh, "Sigma_hh");
  c.D_hat = linalg::vec(c.grad0) - c.projection * c.h0;
  return c;
}

double general_wald_statistic(const VectorXd& h, const MatrixXd& grad, const MatrixXd& sigma) {
  const Index k = grad.rows();
  const Index p = grad.cols();
  const MatrixXd gram = linalg::symmetrize(grad.transpose() * grad);
  const VectorXd score = grad.transpose() * h;  // G'h
  VectorXd b(p + 1);
  b[0] = 1.0;
  b.tail(p) = -(linalg::sym_inverse(gram, "grad'grad") * score);
  const MatrixXd v = linalg::kron_quadratic(sigma, b, k);
  const MatrixXd middle = linalg::symmetrize(grad.transpose() * v * grad);
  return std::max(0.0, score.dot(linalg::sym_inverse(middle, "G'(b ⊗ I)'Sigma(b ⊗ I)G") * score));
}

double general_wald(const MomentModel& model, const VectorXd& theta0) {
  return general_wald_statistic(model.h(theta0), model.grad_h(theta0), model.sigma(theta0));
}

std::vector<double> general_simulate_draws(const GeneralConditioning& cond, std::size_t n_draws,
                                           std::uint64_t seed, bool parallel) {
  const kernels::EvaluatorFactory factory = [&]() -> std::unique_ptr<kernels::DrawEvaluator> {
    return std::make_unique<GeneralDrawEvaluator>(cond, seed);
  };
  return parallel ? kernels::evaluate_draws_parallel(n_draws, factory)
                  : kernels::evaluate_draws_serial(n_draws, factory);
}

GeneralConditionalResult general_conditional_test(const MomentModel& model, const VectorXd& theta0,
                                                  double alpha, std::size_t n_draws, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 0.5]");
  if (n_draws < 1000) throw Error(ErrorCode::InvalidArgument, "at least 1000 draws are required");

  const auto cond = staged("null_transform", [&] { return general_null_transform(model, theta0); });
  GeneralConditionalResult out;
  out.statistic = staged("wald", [&] { return general_wald_statistic(cond.h0, cond.grad0, cond.sigma); });
  const auto draws = general_simulate_draws(cond, n_draws, seed);
  out.degenerate_draws = static_cast<std::size_t>(
      std::count_if(draws.begin(), draws.end(), [](double x) { return std::isinf(x); }));
  if (out.degenerate_draws == n_draws) {
    throw Error(ErrorCode::Degenerate, "every simulated draw was degenerate", "critical_value");
  }
  out.critical_value = conditional_quantile(draws, alpha);
  out.p_value_conditional = monte_carlo_p_value(draws, out.statistic);
  out.n_draws = n_draws;
  out.seed = seed;
  out.alpha = alpha;
  out.reject = out.statistic > out.critical_value;
  out.D_hat_n = cond.D_hat;
  return out;
}

MomentModel linear_iv_moment_model(const ReducedFormStats& stats) {
  MomentModel m;
  m.theta_dim = stats.p();
  m.moment_dim = stats.k();
  m.h = [&stats](const VectorXd& theta) -> VectorXd { return stats.R1() - stats.R2() * theta; };
  m.grad_h = [&stats](const VectorXd&) -> MatrixXd { return -stats.R2(); };
  m.sigma = [&stats](const VectorXd& theta) -> MatrixXd {
    const auto cond = null_transform(stats, theta);
    MatrixXd s = cond.Sigma0();
    const Index k = stats.k();
    s.topRightCorner(k, s.cols() - k) *= -1.0;
    s.bottomLeftCorner(s.rows() - k, k) *= -1.0;
    return s;
  };
  return m;
}

}  // namespace rcw
