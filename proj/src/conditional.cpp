#include "rcw/conditional.hpp"

#include "rcw/error.hpp"
#include "rcw/kernels.hpp"
#include "rcw/linalg.hpp"
#include "rcw/random.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class LinearDrawEvaluator final : public kernels::DrawEvaluator {
 public:
  LinearDrawEvaluator(const NullConditioning& cond, const ReducedFormStats& stats,
                      const StatisticSpec& spec, std::uint64_t seed)
      : cond_(cond), stats_(stats), spec_(spec), seed_(seed), zeta_(cond.k()) {}

  double operator()(std::uint64_t j) override {
    standard_normals(seed_, j, zeta_);
    const VectorXd r_u = cond_.Sigma_uu_half * zeta_;
    try {
      const double psi = wald_statistic_at(spec_, reconstruct_R(cond_, r_u), stats_, cond_.beta0);
      return std::isfinite(psi) ? psi : kInf;
    } catch (const Error&) {
      return kInf;
    }
  }

 private:
  const NullConditioning& cond_;
  const ReducedFormStats& stats_;
  const StatisticSpec& spec_;
  std::uint64_t seed_;
  VectorXd zeta_;
};

}  // namespace

MatrixXd NullConditioning::Sigma0() const {
  const Index kk = k();
  const Index m = (p() + 1) * kk;
  MatrixXd out(m, m);
  out.topLeftCorner(kk, kk) = Sigma_uu;
  out.topRightCorner(kk, m - kk) = Sigma_u2;
  out.bottomLeftCorner(m - kk, kk) = Sigma_2u;
  out.bottomRightCorner(m - kk, m - kk) = Sigma_22;
  return out;
}

NullConditioning null_transform(const ReducedFormStats& stats, const VectorXd& beta0) {
  const Index k = stats.k();
  const Index p = stats.p();
  if (beta0.size() != p) throw Error(ErrorCode::InvalidArgument, "beta0 must have p entries");

  MatrixXd b0 = MatrixXd::Identity(p + 1, p + 1);
  b0.block(1, 0, p, 1) = -beta0;
  // B0 ⊗ I_k
  MatrixXd t = MatrixXd::Zero((p + 1) * k, (p + 1) * k);
  for (Index a = 0; a <= p; ++a) {
    for (Index c = 0; c <= p; ++c) {
      if (b0(a, c) != 0.0) t.block(a * k, c * k, k, k) = b0(a, c) * MatrixXd::Identity(k, k);
    }
  }
  const MatrixXd sigma0 = linalg::symmetrize(t.transpose() * stats.Sigma_hat * t);

  NullConditioning cond;
  cond.beta0 = beta0;
  cond.R_u = stats.R1() - stats.R2() * beta0;
  cond.Sigma_uu = sigma0.topLeftCorner(k, k);
  cond.Sigma_u2 = sigma0.topRightCorner(k, p * k);
  cond.Sigma_2u = sigma0.bottomLeftCorner(p * k, k);
  cond.Sigma_22 = sigma0.bottomRightCorner(p * k, p * k);
  cond.projection = cond.Sigma_2u * linalg::sym_inverse(cond.Sigma_uu, "Sigma_uu");
  cond.Sigma_uu_half = linalg::sym_sqrt(cond.Sigma_uu, "Sigma_uu");
  const VectorXd d = linalg::vec(stats.R2()) - cond.projection * cond.R_u;
  cond.D_hat = linalg::unvec(d, k, p);
  return cond;
}

MatrixXd reconstruct_R(const NullConditioning& cond, const VectorXd& R_u_star) {
  const Index k = cond.k();
  const Index p = cond.p();
  if (R_u_star.size() != k) throw Error(ErrorCode::InvalidArgument, "R_u* must have k entries");
  MatrixXd r(k, p + 1);
  Eigen::Map<VectorXd> r2(r.data() + k, k * p);
  r2 = linalg::vec(cond.D_hat) + cond.projection * R_u_star;
  r.col(0) = R_u_star + r.rightCols(p) * cond.beta0;
  return r;
}

double wald_statistic_at(const StatisticSpec& spec, const MatrixXd& R, const ReducedFormStats& fixed,
                         const VectorXd& beta0) {
  const auto est = estimate(spec.estimator, R, fixed);
  return wald(spec.resolved_form(), R, fixed.Sigma_hat, est.beta_hat, beta0, spec.plugin).statistic;
}

double conditional_quantile(std::vector<double> draws, double alpha) {
  const std::size_t n = draws.size();
  if (n == 0) throw Error(ErrorCode::Degenerate, "no draws");
  const double target = (1.0 - alpha) * static_cast<double>(n + 1);
  const auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9));
  if (rank > n) return kInf;
  const std::size_t idx = rank == 0 ? 0 : rank - 1;
  std::nth_element(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(idx), draws.end());
  return draws[idx];
}

double monte_carlo_p_value(const std::vector<double>& draws, double observed) {
  const auto exceed = std::count_if(draws.begin(), draws.end(), [&](double x) { return x >= observed; });
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(draws.size()) + 1.0);
}

std::vector<double> simulate_draws(const NullConditioning& cond, const ReducedFormStats& stats,
                                   const StatisticSpec& spec, std::size_t n_draws, std::uint64_t seed,
                                   bool parallel) {
  const kernels::EvaluatorFactory factory = [&]() -> std::unique_ptr<kernels::DrawEvaluator> {
    return std::make_unique<LinearDrawEvaluator>(cond, stats, spec, seed);
  };
  return parallel ? kernels::evaluate_draws_parallel(n_draws, factory)
                  : kernels::evaluate_draws_serial(n_draws, factory);
}

CriticalValue simulate_critical_value(const NullConditioning& cond, const ReducedFormStats& stats,
                                      const StatisticSpec& spec, double alpha, std::size_t n_draws,
                                      std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 0.5]");
  if (n_draws < 1000) throw Error(ErrorCode::InvalidArgument, "at least 1000 draws are required");

  CriticalValue out;
  out.observed = wald_statistic_at(spec, stats.R, stats, cond.beta0);
  const auto draws = simulate_draws(cond, stats, spec, n_draws, seed);
  out.n_draws = n_draws;
  out.degenerate_draws = static_cast<std::size_t>(
      std::count_if(draws.begin(), draws.end(), [](double x) { return std::isinf(x); }));
  if (out.degenerate_draws == n_draws) {
    throw Error(ErrorCode::Degenerate, "every simulated draw was degenerate");
  }
  out.c_alpha = conditional_quantile(draws, alpha);
  out.p_value = monte_carlo_p_value(draws, out.observed);
  return out;
}

void validate(const TestOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha <= 0.5)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 0.5]");
  if (o.n_draws < 1000) throw Error(ErrorCode::InvalidArgument, "draws must be at least 1000");
  if (o.statistic.estimator.type == EstimatorType::CUE) validate(o.statistic.estimator.cue);
}

double chi2_critical_value(double alpha, int df) {
  return boost::math::quantile(boost::math::chi_squared(df), 1.0 - alpha);
}

ConditionalResult conditional_wald_test(const ReducedFormStats& stats, const VectorXd& beta0,
                                        const TestOptions& options) {
  staged("validate", [&] {
    validate(options);
    if (beta0.size() != stats.p()) {
      throw Error(ErrorCode::InvalidArgument, "beta0 has " + std::to_string(beta0.size()) +
                                                  " entries but p = " + std::to_string(stats.p()));
    }
  });

  ConditionalResult out;
  out.alpha = options.alpha;
  out.seed = options.seed;
  out.beta0 = beta0;
  out.estimator = options.statistic.estimator;
  out.vcov = options.vcov;
  out.form = options.statistic.resolved_form();
  out.plugin = options.statistic.plugin;
  out.n = stats.n;
  out.k = stats.k();
  out.p = stats.p();

  out.estimate = staged("estimate", [&] { return estimate(options.statistic.estimator, stats); });
  out.wald = staged("wald", [&] {
    return wald(out.form, stats.R, stats.Sigma_hat, out.estimate.beta_hat, beta0, out.plugin);
  });
  out.conditioning = staged("null_transform", [&] { return null_transform(stats, beta0); });
  const auto cv = staged("critical_value", [&] {
    return simulate_critical_value(out.conditioning, stats, options.statistic, options.alpha,
                                   options.n_draws, options.seed);
  });

  out.statistic = out.wald.statistic;
  out.critical_value = cv.c_alpha;
  out.p_value_conditional = cv.p_value;
  out.n_draws = cv.n_draws;
  out.degenerate_draws = cv.degenerate_draws;
  out.reject = out.statistic > out.critical_value;
  out.conventional_critical_value = chi2_critical_value(options.alpha, static_cast<int>(stats.p()));
  out.conventional_reject = out.statistic > out.conventional_critical_value;
  out.stats = stats;
  return out;
}

ConditionalResult conditional_wald_test(const IVData& data, const VectorXd& beta0,
                                        const TestOptions& options) {
  staged("validate", [&] { validate(data); });
  const auto stats = staged("reduced_form", [&] { return reduced_form(data, options.vcov); });
  auto out = conditional_wald_test(stats, beta0, options);
  out.q = data.q();
  return out;
}

}  // namespace rcw
