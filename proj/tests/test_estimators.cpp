#include "rcw/error.hpp"
#include "rcw/estimators.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace rcw;
using rcw::test::random_iv;
using rcw::test::rel_err;

namespace {

ReducedFormStats scalar_stats(double r1, double r2) {
  MatrixXd R(1, 2);
  R << r1, r2;
  return test::make_stats(R, MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), 10);
}

// LIML via the k-class form with lambda from the 2x2 characteristic polynomial
// det(Y'PY - lambda Y'MY) = 0 (p = 1 only).
VectorXd oracle_liml(const IVData& d, double* lambda_out) {
  const MatrixXd Y = d.Y();
  const MatrixXd P = test::proj(d.Z);
  const MatrixXd M = MatrixXd::Identity(d.n(), d.n()) - P;
  const MatrixXd A = Y.transpose() * P * Y;
  const MatrixXd B = Y.transpose() * M * Y;
  // det(A - l B) = a2 l^2 + a1 l + a0
  const double a2 = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
  const double a1 = -(A(0, 0) * B(1, 1) + A(1, 1) * B(0, 0) - A(0, 1) * B(1, 0) - A(1, 0) * B(0, 1));
  const double a0 = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
  const double disc = std::sqrt(a1 * a1 - 4 * a2 * a0);
  const double lambda = std::min((-a1 - disc) / (2 * a2), (-a1 + disc) / (2 * a2));
  *lambda_out = lambda;
  const MatrixXd K = P - lambda * M;
  return (d.Y2.transpose() * K * d.Y2).ldlt().solve(d.Y2.transpose() * K * d.y1);
}

// Two-step GMM straight from Z, Y and Omega.
VectorXd oracle_gmm2(const IVData& d, const MatrixXd& omega) {
  const VectorXd pre = test::oracle_2sls(d);
  const MatrixXd W = test::oracle_kron_form(omega, test::b_of(pre), d.k()).inverse();
  const MatrixXd zy2 = d.Z.transpose() * d.Y2;
  return (zy2.transpose() * W * zy2).ldlt().solve(zy2.transpose() * W * d.Z.transpose() * d.y1);
}

}  // namespace

TEST(TSLS, ScalarRatio) { EXPECT_DOUBLE_EQ(estimate_2sls(scalar_stats(2.0, 1.0)).beta_hat[0], 2.0); }

TEST(TSLS, NoFirstStageIsSingular) {
  try {
    estimate_2sls(scalar_stats(2.0, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Singular);
  }
}

TEST(TSLS, MatchesProjectionFormula) {
  for (Index p : {1, 2}) {
    const auto d = random_iv(21 + p, 100, 4, p);
    EXPECT_LT(rel_err(estimate_2sls(reduced_form(d, VcovKind::hc())).beta_hat, test::oracle_2sls(d)), 1e-10);
  }
}

TEST(LIML, JustIdentifiedEquals2sls) {
  const auto s = reduced_form(random_iv(31, 80, 1, 1), VcovKind::hc());
  const auto liml = estimate_liml(s);
  EXPECT_LT(rel_err(liml.beta_hat, estimate_2sls(s).beta_hat), 1e-8);
  EXPECT_NEAR(*liml.liml_lambda, 0.0, 1e-8);
  const auto s2 = reduced_form(random_iv(32, 80, 2, 2), VcovKind::hc());
  EXPECT_LT(rel_err(estimate_liml(s2).beta_hat, estimate_2sls(s2).beta_hat), 1e-8);
}

TEST(LIML, SimultaneouslyDiagonal) {
  MatrixXd R = MatrixXd::Zero(3, 2);
  R(0, 0) = std::sqrt(3.0);
  R(1, 1) = std::sqrt(5.0);
  const auto s = test::make_stats(R, MatrixXd::Identity(6, 6), MatrixXd::Identity(2, 2) / 10.0, 10);
  const auto r = estimate_liml(s);
  EXPECT_NEAR(*r.liml_lambda, 3.0, 1e-12);
  EXPECT_NEAR(r.beta_hat[0], 0.0, 1e-12);
}

TEST(LIML, RatioCriterionAndRawOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = random_iv(40 + seed, 120, 4, 1, 0.3);
    const auto s = reduced_form(d, VcovKind::hc());
    const auto r = estimate_liml(s);
    const VectorXd b = test::b_of(r.beta_hat);
    const double ratio = b.dot(s.R.transpose() * s.R * b) / b.dot(double(s.n) * s.Phi_hat * b);
    EXPECT_LT(rel_err(ratio, *r.liml_lambda), 1e-8);
    double lambda = 0.0;
    EXPECT_LT(rel_err(r.beta_hat, oracle_liml(d, &lambda)), 1e-8);
    EXPECT_LT(rel_err(*r.liml_lambda, lambda), 1e-8);
    EXPECT_GE(*r.liml_lambda, -1e-10);
  }
}

TEST(LIML, LambdaInvariantToInstrumentReparameterization) {
  auto d = random_iv(50, 90, 3, 1);
  const double lambda = *estimate_liml(reduced_form(d, VcovKind::hc())).liml_lambda;
  MatrixXd A(3, 3);
  A << 2, 1, 0, 0, 1, -1, 1, 0, 3;
  d.Z = d.Z * A;
  EXPECT_LT(rel_err(*estimate_liml(reduced_form(d, VcovKind::hc())).liml_lambda, lambda), 1e-10);
}

TEST(GMM2, HomoskedasticStructureEquals2sls) {
  for (Index p : {1, 2}) {
    const auto s = test::homoskedastic_stats(random_iv(60 + p, 150, 4, p));
    EXPECT_LT(rel_err(estimate_gmm2(s).beta_hat, estimate_2sls(s).beta_hat), 1e-8);
  }
}

TEST(GMM2, JustIdentifiedIsIvRatio) {
  const auto d = random_iv(62, 70, 1, 1);
  const auto s = reduced_form(d, VcovKind::hc());
  const double iv = d.Z.col(0).dot(d.y1) / d.Z.col(0).dot(d.Y2.col(0));
  EXPECT_NEAR(estimate_gmm2(s).beta_hat[0], iv, 1e-10 * std::max(1.0, std::abs(iv)));
}

TEST(GMM2, MatchesRawTwoStepFormula) {
  for (Index p : {1, 2}) {
    const auto d = random_iv(63 + p, 200, 4, p);
    const auto s = reduced_form(d, VcovKind::hc());
    EXPECT_LT(rel_err(estimate_gmm2(s).beta_hat, oracle_gmm2(d, s.Omega_hat)), 1e-8);
  }
}

TEST(CUE, HomoskedasticEqualsLiml) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = test::homoskedastic_stats(random_iv(70 + seed, 150, 4, 1, 0.3));
    EXPECT_NEAR(estimate_cue(s).beta_hat[0], estimate_liml(s).beta_hat[0], 1e-6);
  }
}

TEST(CUE, JustIdentifiedZeroesMoment) {
  const auto d = random_iv(75, 70, 1, 1);
  const auto s = reduced_form(d, VcovKind::hc());
  const auto r = estimate_cue(s);
  const double iv = d.Z.col(0).dot(d.y1) / d.Z.col(0).dot(d.Y2.col(0));
  EXPECT_NEAR(r.beta_hat[0], iv, 1e-8);
  EXPECT_NEAR(*r.cue_criterion, 0.0, 1e-12);
}

TEST(CUE, BoundaryFlagWhenBasinExcluded) {
  const auto s = reduced_form(random_iv(76, 200, 4, 1, 0.5), VcovKind::hc());
  const double b = estimate_cue(s).beta_hat[0];
  CueSettings away;
  away.lower = b + 5.0;
  away.upper = b + 6.0;
  const auto r = estimate_cue(s, away);
  EXPECT_TRUE(r.boundary);
  EXPECT_FALSE(estimate_cue(s).boundary);
}

TEST(CUE, CriterionNoWorseThan2slsAndLiml) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = reduced_form(random_iv(80 + seed, 150, 5, 1, 0.15), VcovKind::hc());
    const auto r = estimate_cue(s);
    EXPECT_LE(*r.cue_criterion, cue_objective(s.R, s.Sigma_hat, estimate_2sls(s).beta_hat));
    EXPECT_LE(*r.cue_criterion, cue_objective(s.R, s.Sigma_hat, estimate_liml(s).beta_hat));
    EXPECT_GE(*r.cue_criterion, -1e-10);
  }
}

TEST(CUE, MultipleEndogenousUnsupported) {
  const auto s = reduced_form(random_iv(90, 100, 4, 2), VcovKind::hc());
  try {
    estimate_cue(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
    EXPECT_NE(std::string(e.what()).find("p = 1"), std::string::npos);
  }
}

TEST(AllEstimators, CollapseWhenJustIdentifiedScalar) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = reduced_form(random_iv(100 + seed, 60, 1, 1), VcovKind::hc());
    const double ref = estimate_2sls(s).beta_hat[0];
    for (auto kind : {EstimatorKind::liml(), EstimatorKind::gmm2(), EstimatorKind::cue_with()}) {
      EXPECT_LT(rel_err(estimate(kind, s).beta_hat[0], ref), 1e-8) << to_string(kind.type);
    }
  }
}

TEST(AllEstimators, ScalarInstrumentInvariance) {
  auto d = random_iv(110, 120, 4, 1);
  const auto a = reduced_form(d, VcovKind::hc());
  d.Z *= 3.0;
  const auto b = reduced_form(d, VcovKind::hc());
  for (auto kind : {EstimatorKind::tsls(), EstimatorKind::liml(), EstimatorKind::gmm2(), EstimatorKind::cue_with()}) {
    EXPECT_LT(rel_err(estimate(kind, a).beta_hat, estimate(kind, b).beta_hat), 1e-10) << to_string(kind.type);
  }
}

TEST(Parse, EstimatorNames) {
  EXPECT_EQ(parse_estimator("2sls"), EstimatorType::TSLS);
  EXPECT_EQ(parse_estimator("cue"), EstimatorType::CUE);
  EXPECT_FALSE(parse_estimator("ols").has_value());
  for (auto t : {EstimatorType::TSLS, EstimatorType::LIML, EstimatorType::GMM2, EstimatorType::CUE}) {
    EXPECT_EQ(parse_estimator(to_string(t)), t);
  }
}

TEST(CueSettings, Validation) {
  CueSettings bad;
  bad.grid_points = 8;
  EXPECT_THROW(validate(bad), Error);
  CueSettings inverted;
  inverted.lower = 1.0;
  inverted.upper = 0.0;
  EXPECT_THROW(validate(inverted), Error);
}
