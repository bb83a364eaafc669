#include "rcw/conditional.hpp"
#include "rcw/error.hpp"
#include "rcw/parallel.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>

#include <cstring>

using namespace rcw;
using rcw::test::random_iv;
using rcw::test::rel_err;

namespace {

TestOptions options(EstimatorType type = EstimatorType::TSLS, std::size_t draws = 2000, std::uint64_t seed = 5) {
  TestOptions o;
  o.statistic.estimator.type = type;
  o.vcov = VcovKind::hc();
  o.n_draws = draws;
  o.seed = seed;
  return o;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

MatrixXd B0(const VectorXd& beta0) {
  const Index p = beta0.size();
  MatrixXd b = MatrixXd::Identity(p + 1, p + 1);
  b.block(1, 0, p, 1) = -beta0;
  return b;
}

struct ThreadGuard {
  ~ThreadGuard() { set_num_threads(0); }
};

}  // namespace

TEST(NullTransform, DefinitionsAndSigma0) {
  for (Index p : {1, 2}) {
    const auto s = reduced_form(random_iv(1 + p, 100, 4, p), VcovKind::hc());
    const VectorXd beta0 = VectorXd::LinSpaced(p, 0.3, -0.8);
    const auto c = null_transform(s, beta0);
    EXPECT_LT((c.R_u - (s.R1() - s.R2() * beta0)).cwiseAbs().maxCoeff(), 1e-12);
    const MatrixXd t = Eigen::kroneckerProduct(B0(beta0), MatrixXd::Identity(4, 4));
    EXPECT_LT(rel_err(c.Sigma0(), t.transpose() * s.Sigma_hat * t), 1e-10);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(c.Sigma_uu);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(NullTransform, ZeroBeta0GivesR1) {
  const auto s = reduced_form(random_iv(4, 60, 3, 1), VcovKind::hc());
  EXPECT_EQ(null_transform(s, VectorXd::Zero(1)).R_u, VectorXd(s.R1()));
}

TEST(NullTransform, NoCrossCovarianceGivesVecR2) {
  auto s = reduced_form(random_iv(5, 60, 3, 1), VcovKind::hc());
  s.Sigma_hat = MatrixXd::Identity(6, 6);
  const auto c = null_transform(s, VectorXd::Zero(1));
  EXPECT_LT((c.D_hat - s.R2()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(NullTransform, RoundTrip) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Index p = 1 + seed % 2;
    const auto s = reduced_form(random_iv(10 + seed, 60, p + seed % 3, p), VcovKind::hc());
    const auto c = null_transform(s, VectorXd::Constant(p, 0.1 * double(seed) - 2.0));
    EXPECT_LT(rel_err(reconstruct_R(c, c.R_u), s.R), 1e-10);
  }
}

TEST(Reconstruct, ZeroDrawWithoutCrossCovariance) {
  auto s = reduced_form(random_iv(6, 60, 3, 1), VcovKind::hc());
  s.Sigma_hat = MatrixXd::Identity(6, 6);
  const VectorXd beta0 = VectorXd::Constant(1, 1.7);
  const auto c = null_transform(s, beta0);
  const MatrixXd r = reconstruct_R(c, VectorXd::Zero(3));
  EXPECT_LT((r.col(1) - c.D_hat.col(0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((r.col(0) - r.col(1) * 1.7).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Reconstruct, ConditioningStatisticHeldFixed) {
  // D computed from any reconstructed R* with the plug-in Sigma is the observed D.
  const auto s = reduced_form(random_iv(7, 100, 4, 2), VcovKind::hc());
  const VectorXd beta0 = VectorXd::Constant(2, 0.4);
  const auto c = null_transform(s, beta0);
  std::mt19937_64 gen(1);
  MatrixXd ru(4, 1000), d2(8, 1000);
  for (int j = 0; j < 1000; ++j) {
    const VectorXd z = test::normal_matrix(gen, 4, 1).col(0);
    const VectorXd r_u = c.Sigma_uu_half * z;
    auto star = s;
    star.R = reconstruct_R(c, r_u);
    const auto c_star = null_transform(star, beta0);
    EXPECT_LT((c_star.D_hat - c.D_hat).cwiseAbs().maxCoeff(), 1e-12);
    ru.col(j) = r_u;
    d2.col(j) = linalg::vec(star.R2()) - c.projection * r_u;
  }
  const MatrixXd ru_c = ru.colwise() - ru.rowwise().mean();
  const MatrixXd d2_c = d2.colwise() - d2.rowwise().mean();
  const MatrixXd cov = ru_c * d2_c.transpose() / 999.0;
  const double scale = std::sqrt(c.Sigma_uu.diagonal().maxCoeff()) * std::max(1.0, d2.cwiseAbs().maxCoeff());
  EXPECT_LT(cov.cwiseAbs().maxCoeff(), 3.0 / std::sqrt(1000.0) * scale);
}

TEST(Quantile, RankRule) {
  std::vector<double> draws(99);
  for (int i = 0; i < 99; ++i) draws[i] = 99 - i;  // 1..99 reversed
  EXPECT_EQ(conditional_quantile(draws, 0.05), 95.0);
  EXPECT_EQ(conditional_quantile(draws, 0.5), 50.0);
  std::vector<double> few(10, 1.0);
  EXPECT_TRUE(std::isinf(conditional_quantile(few, 0.05)));
}

TEST(Quantile, AddOnePValue) {
  const std::vector<double> draws{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(draws, 2.5), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(draws, 10), 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(monte_carlo_p_value(draws, 3.0), 3.0 / 5.0);
}

TEST(SimulateCriticalValue, DeterministicAcrossRunsAndThreads) {
  ThreadGuard guard;
  const auto s = reduced_form(random_iv(8, 100, 4, 1, 0.1), VcovKind::hc());
  const auto c = null_transform(s, VectorXd::Constant(1, 1.0));
  StatisticSpec spec;
  set_num_threads(1);
  const auto a = simulate_critical_value(c, s, spec, 0.05, 3000, 77);
  set_num_threads(4);
  const auto b = simulate_critical_value(c, s, spec, 0.05, 3000, 77);
  const auto again = simulate_critical_value(c, s, spec, 0.05, 3000, 77);
  EXPECT_TRUE(bit_equal(a.c_alpha, b.c_alpha));
  EXPECT_TRUE(bit_equal(a.p_value, b.p_value));
  EXPECT_TRUE(bit_equal(b.c_alpha, again.c_alpha));
  const auto other = simulate_critical_value(c, s, spec, 0.05, 3000, 78);
  EXPECT_FALSE(bit_equal(a.c_alpha, other.c_alpha));
}

TEST(SimulateCriticalValue, SerialAndParallelDrawsIdentical) {
  ThreadGuard guard;
  set_num_threads(4);
  const auto s = reduced_form(random_iv(9, 100, 4, 2, 0.1), VcovKind::hc());
  const auto c = null_transform(s, VectorXd::Constant(2, 1.0));
  for (auto type : {EstimatorType::TSLS, EstimatorType::LIML, EstimatorType::GMM2}) {
    StatisticSpec spec;
    spec.estimator.type = type;
    const auto serial = simulate_draws(c, s, spec, 1500, 3, false);
    const auto parallel = simulate_draws(c, s, spec, 1500, 3, true);
    ASSERT_EQ(serial.size(), parallel.size());
    EXPECT_EQ(0, std::memcmp(serial.data(), parallel.data(), serial.size() * sizeof(double)));
  }
}

TEST(SimulateCriticalValue, MonotoneInAlpha) {
  const auto s = reduced_form(random_iv(10, 100, 4, 1, 0.1), VcovKind::hc());
  const auto c = null_transform(s, VectorXd::Constant(1, 1.0));
  StatisticSpec spec;
  const double c50 = simulate_critical_value(c, s, spec, 0.5, 2000, 1).c_alpha;
  const double c10 = simulate_critical_value(c, s, spec, 0.10, 2000, 1).c_alpha;
  const double c05 = simulate_critical_value(c, s, spec, 0.05, 2000, 1).c_alpha;
  EXPECT_LE(c50, c10);
  EXPECT_LE(c10, c05);
}

TEST(SimulateCriticalValue, StrongIdentificationApproachesChiSquare) {
  auto s = test::homoskedastic_stats(random_iv(11, 400, 4, 1, 0.5, false));
  // Scale R2 so ||D|| is huge; R1 moves with it so beta_hat is unchanged.
  s.R *= 1e6;
  const auto c = null_transform(s, estimate_2sls(s).beta_hat);
  StatisticSpec spec;
  const double c05 = simulate_critical_value(c, s, spec, 0.05, 20000, 4).c_alpha;
  EXPECT_NEAR(c05, 3.8415, 0.15);
}

TEST(SimulateCriticalValue, RejectsBadArguments) {
  const auto s = reduced_form(random_iv(12, 60, 3, 1), VcovKind::hc());
  const auto c = null_transform(s, VectorXd::Zero(1));
  StatisticSpec spec;
  EXPECT_THROW(simulate_critical_value(c, s, spec, 0.0, 2000, 1), Error);
  EXPECT_THROW(simulate_critical_value(c, s, spec, 0.05, 999, 1), Error);
}

TEST(ConditionalTest, DecisionConsistency) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto d = random_iv(20 + seed, 120, 4, 1, 0.15);
    for (double b0 : {1.0, 1.5, 3.0}) {
      const auto r = conditional_wald_test(d, VectorXd::Constant(1, b0), options(EstimatorType::TSLS, 1999, seed));
      EXPECT_EQ(r.reject, r.statistic > r.critical_value);
      EXPECT_EQ(r.reject, r.p_value_conditional <= r.alpha);
      EXPECT_NEAR(r.conventional_critical_value, 3.841458820694124, 1e-12);
      EXPECT_EQ(r.conventional_reject, r.statistic > r.conventional_critical_value);
    }
  }
}

TEST(ConditionalTest, PowerAgainstDistantNull) {
  const auto d = random_iv(40, 400, 4, 1, 0.8);
  for (auto type : {EstimatorType::TSLS, EstimatorType::LIML, EstimatorType::GMM2, EstimatorType::CUE}) {
    const auto r = conditional_wald_test(d, VectorXd::Constant(1, 3.0), options(type));
    EXPECT_TRUE(r.reject) << to_string(type);
    EXPECT_LT(r.p_value_conditional, 0.05);
  }
}

TEST(ConditionalTest, SeededOutcomeScaleEquivariance) {
  auto d = random_iv(41, 150, 4, 1, 0.2);
  const double c = 3.0;
  const auto a = conditional_wald_test(d, VectorXd::Constant(1, 0.5), options(EstimatorType::TSLS, 2000, 9));
  d.y1 *= c;
  const auto b = conditional_wald_test(d, VectorXd::Constant(1, 0.5 * c), options(EstimatorType::TSLS, 2000, 9));
  EXPECT_LT(rel_err(a.statistic, b.statistic), 1e-8);
  EXPECT_LT(rel_err(a.critical_value, b.critical_value), 1e-8);
  EXPECT_EQ(a.reject, b.reject);
}

TEST(ConditionalTest, MultipleEndogenousRegressors) {
  const auto d = random_iv(42, 200, 5, 2, 0.4);
  const auto r = conditional_wald_test(d, Eigen::Vector2d(1.0, 2.0), options(EstimatorType::LIML));
  EXPECT_TRUE(std::isfinite(r.critical_value));
  EXPECT_NEAR(r.conventional_critical_value, 5.991464547107979, 1e-10);
  EXPECT_EQ(r.p, 2);
}

TEST(ConditionalTest, ErrorsCarryStage) {
  const auto d = random_iv(43, 100, 4, 2);
  try {
    conditional_wald_test(d, Eigen::Vector2d(1.0, 2.0), options(EstimatorType::CUE));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
    EXPECT_EQ(e.stage(), "estimate");
  }
  try {
    conditional_wald_test(d, VectorXd::Zero(1), options());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "validate");
  }
}

TEST(ConfidenceSet, StrongInstrumentsGiveBoundedInterval) {
  const auto d = random_iv(50, 400, 4, 1, 0.8);
  GridSpec grid;
  grid.count = 81;
  const auto set = invert_confidence_set(d, options(EstimatorType::TSLS, 1000), grid);
  ASSERT_EQ(set.intervals.size(), 1u);
  EXPECT_FALSE(set.unbounded_left || set.unbounded_right);
  EXPECT_LT(set.intervals[0].lo, set.beta_hat);
  EXPECT_GT(set.intervals[0].hi, set.beta_hat);
  EXPECT_EQ(set.grid.size(), 81u);
}

TEST(ConfidenceSet, AssembleMidpointsAndFlags) {
  ConfidenceSet set;
  const std::vector<bool> mask{true, true, false, false, true, false, true};
  for (std::size_t i = 0; i < mask.size(); ++i) set.grid.push_back({double(i), 0, 0, 0, mask[i]});
  assemble_intervals(set);
  ASSERT_EQ(set.intervals.size(), 3u);
  EXPECT_TRUE(std::isinf(set.intervals[0].lo));
  EXPECT_DOUBLE_EQ(set.intervals[0].hi, 1.5);
  EXPECT_DOUBLE_EQ(set.intervals[1].lo, 3.5);
  EXPECT_DOUBLE_EQ(set.intervals[1].hi, 4.5);
  EXPECT_DOUBLE_EQ(set.intervals[2].lo, 5.5);
  EXPECT_TRUE(std::isinf(set.intervals[2].hi));
  EXPECT_TRUE(set.unbounded_left && set.unbounded_right && !set.empty);
}

TEST(ConfidenceSet, AllRejectedIsEmpty) {
  ConfidenceSet set;
  for (int i = 0; i < 21; ++i) set.grid.push_back({double(i), 10, 1, 0.001, false});
  assemble_intervals(set);
  EXPECT_TRUE(set.empty);
  EXPECT_TRUE(set.intervals.empty());
  EXPECT_FALSE(set.unbounded_left || set.unbounded_right);
}

TEST(ConfidenceSet, ExplicitGridRejectingEverywhere) {
  // A grid far from the estimate with strong instruments rejects every point.
  const auto d = random_iv(51, 400, 4, 1, 0.8);
  GridSpec grid;
  grid.lo = 10.0;
  grid.hi = 20.0;
  grid.count = 21;
  const auto set = invert_confidence_set(d, options(EstimatorType::TSLS, 1000), grid);
  EXPECT_TRUE(set.empty);
  EXPECT_EQ(set.grid.size(), 21u);
}

TEST(ConfidenceSet, Preconditions) {
  GridSpec small;
  small.count = 20;
  EXPECT_THROW(invert_confidence_set(random_iv(52, 100, 4, 1), options(), small), Error);
  try {
    invert_confidence_set(random_iv(53, 100, 4, 2), options());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
}

TEST(ConfidenceSet, DeterministicAcrossThreads) {
  ThreadGuard guard;
  const auto d = random_iv(54, 200, 4, 1, 0.2);
  GridSpec grid;
  grid.count = 31;
  set_num_threads(1);
  const auto a = invert_confidence_set(d, options(EstimatorType::GMM2, 1000), grid);
  set_num_threads(4);
  const auto b = invert_confidence_set(d, options(EstimatorType::GMM2, 1000), grid);
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    EXPECT_TRUE(bit_equal(a.grid[i].critical_value, b.grid[i].critical_value));
    EXPECT_EQ(a.grid[i].accepted, b.grid[i].accepted);
  }
}
