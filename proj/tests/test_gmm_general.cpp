#include "rcw/error.hpp"
#include "rcw/gmm_general.hpp"
#include "rcw/parallel.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace rcw;
using rcw::test::random_iv;
using rcw::test::rel_err;

namespace {

// Constant-in-theta model from fixed (h, grad, sigma).
MomentModel fixed_model(const VectorXd& h, const MatrixXd& grad, const MatrixXd& sigma) {
  MomentModel m;
  m.theta_dim = grad.cols();
  m.moment_dim = h.size();
  m.h = [h](const VectorXd&) { return h; };
  m.grad_h = [grad](const VectorXd&) { return grad; };
  m.sigma = [sigma](const VectorXd&) { return sigma; };
  return m;
}

MatrixXd random_spd(std::mt19937_64& gen, Index m) {
  const MatrixXd a = test::normal_matrix(gen, m, m);
  return a * a.transpose() + 0.5 * MatrixXd::Identity(m, m);
}

}  // namespace

TEST(GeneralNullTransform, NoCrossCovarianceGivesVecGradient) {
  std::mt19937_64 gen(1);
  const VectorXd h = test::normal_matrix(gen, 3, 1).col(0);
  const MatrixXd g = test::normal_matrix(gen, 3, 2);
  MatrixXd sigma = random_spd(gen, 9);
  sigma.topRightCorner(3, 6).setZero();
  sigma.bottomLeftCorner(6, 3).setZero();
  const auto c = general_null_transform(fixed_model(h, g, sigma), VectorXd::Zero(2));
  EXPECT_LT((c.D_hat - linalg::vec(g)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GeneralNullTransform, LinearEmbeddingMatchesLinearD) {
  for (Index p : {1, 2}) {
    const auto s = reduced_form(random_iv(2 + p, 150, 4, p), VcovKind::hc());
    const VectorXd beta0 = VectorXd::Constant(p, 0.7);
    const auto lin = null_transform(s, beta0);
    const auto gen = general_null_transform(linear_iv_moment_model(s), beta0);
    // grad = -R2, so the embedded D is the linear D with the sign flipped.
    EXPECT_LT(rel_err(gen.D_hat, -linalg::vec(lin.D_hat)), 1e-10);
    EXPECT_LT(rel_err(gen.h0, lin.R_u), 1e-12);
  }
}

TEST(GeneralNullTransform, MomentScaleInvariance) {
  std::mt19937_64 gen(5);
  const VectorXd h = test::normal_matrix(gen, 4, 1).col(0);
  const MatrixXd g = test::normal_matrix(gen, 4, 1);
  const MatrixXd sigma = random_spd(gen, 8);
  const double c = 5.0;
  MatrixXd scaled = sigma;
  scaled.topLeftCorner(4, 4) *= c * c;
  scaled.topRightCorner(4, 4) *= c;
  scaled.bottomLeftCorner(4, 4) *= c;
  const auto a = general_null_transform(fixed_model(h, g, sigma), VectorXd::Zero(1));
  const auto b = general_null_transform(fixed_model(c * h, g, scaled), VectorXd::Zero(1));
  EXPECT_LT(rel_err(a.D_hat, b.D_hat), 1e-10);
}

TEST(GeneralWald, ZeroMomentAndOrthogonalMoment) {
  std::mt19937_64 gen(6);
  const MatrixXd g = test::normal_matrix(gen, 3, 1);
  const MatrixXd sigma = random_spd(gen, 6);
  EXPECT_EQ(general_wald_statistic(VectorXd::Zero(3), g, sigma), 0.0);
  VectorXd h = test::normal_matrix(gen, 3, 1).col(0);
  h -= g.col(0) * (g.col(0).dot(h) / g.col(0).squaredNorm());
  EXPECT_NEAR(general_wald_statistic(h, g, sigma), 0.0, 1e-20);
}

TEST(GeneralWald, ScalarHandOracle) {
  for (const auto& [h, g] : std::vector<std::pair<double, double>>{{0.7, 1.3}, {-2.0, 0.4}, {3.0, -5.0}}) {
    VectorXd hv(1);
    hv << h;
    MatrixXd gm(1, 1);
    gm << g;
    // b = (1, -h g / g^2), (b ⊗ 1)' I (b ⊗ 1) = 1 + (h/g)^2
    const double weight = 1.0 + (h * g / (g * g)) * (h * g / (g * g));
    const double oracle = (h * g) * (h * g) / (g * g * weight);
    EXPECT_LT(rel_err(general_wald_statistic(hv, gm, MatrixXd::Identity(2, 2)), oracle), 1e-14);
  }
}

TEST(GeneralWald, NonNegative) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 50; ++i) {
    const MatrixXd sigma = random_spd(gen, 12);
    EXPECT_GE(general_wald_statistic(test::normal_matrix(gen, 4, 1).col(0), test::normal_matrix(gen, 4, 2), sigma),
              0.0);
  }
}

TEST(GeneralWald, LinearEmbeddingReproduces2slsSandwich) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index p = 1 + seed % 2;
    const auto s = reduced_form(random_iv(10 + seed, 120, 4, p, 0.2), VcovKind::hc());
    const VectorXd beta0 = VectorXd::Constant(p, 0.4);
    const double lin = wald_sandwich(s, estimate_2sls(s).beta_hat, beta0).statistic;
    EXPECT_LT(rel_err(general_wald(linear_iv_moment_model(s), beta0), lin), 1e-8);
  }
}

TEST(GeneralConditional, MatchesLinearModuleWithSharedSeed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index p = 1 + seed % 2;
    const auto s = reduced_form(random_iv(30 + seed, 150, 4, p, 0.15), VcovKind::hc());
    const VectorXd beta0 = VectorXd::Constant(p, 1.2);
    TestOptions o;
    o.n_draws = 2000;
    o.seed = seed;
    const auto lin = conditional_wald_test(s, beta0, o);
    const auto gen = general_conditional_test(linear_iv_moment_model(s), beta0, 0.05, 2000, seed);
    EXPECT_LT(rel_err(gen.statistic, lin.statistic), 1e-8);
    EXPECT_LT(rel_err(gen.critical_value, lin.critical_value), 1e-8);
    EXPECT_EQ(gen.reject, lin.reject);
  }
}

TEST(GeneralConditional, DeterministicAcrossThreads) {
  const auto s = reduced_form(random_iv(40, 150, 4, 1, 0.15), VcovKind::hc());
  const auto model = linear_iv_moment_model(s);
  set_num_threads(1);
  const auto a = general_conditional_test(model, VectorXd::Zero(1), 0.05, 3000, 11);
  set_num_threads(4);
  const auto b = general_conditional_test(model, VectorXd::Zero(1), 0.05, 3000, 11);
  set_num_threads(0);
  EXPECT_EQ(0, std::memcmp(&a.critical_value, &b.critical_value, sizeof(double)));
  EXPECT_EQ(0, std::memcmp(&a.p_value_conditional, &b.p_value_conditional, sizeof(double)));
  const auto cond = general_null_transform(model, VectorXd::Zero(1));
  const auto serial = general_simulate_draws(cond, 1000, 2, false);
  const auto parallel = general_simulate_draws(cond, 1000, 2, true);
  EXPECT_EQ(0, std::memcmp(serial.data(), parallel.data(), serial.size() * sizeof(double)));
}

TEST(GeneralConditional, StrongIdentificationApproachesChiSquare) {
  std::mt19937_64 gen(8);
  const VectorXd h = test::normal_matrix(gen, 4, 1).col(0);
  const MatrixXd g = 1e6 * test::normal_matrix(gen, 4, 1);
  const auto r = general_conditional_test(fixed_model(h, g, MatrixXd::Identity(8, 8)), VectorXd::Zero(1), 0.05,
                                          20000, 3);
  EXPECT_NEAR(r.critical_value, 3.8415, 0.15);
}

TEST(GeneralConditional, DimensionMismatchIsError) {
  MomentModel m = fixed_model(VectorXd::Zero(3), MatrixXd::Ones(3, 1), MatrixXd::Identity(5, 5));
  EXPECT_THROW(general_conditional_test(m, VectorXd::Zero(1), 0.05, 1000, 1), Error);
}
