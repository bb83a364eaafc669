#include "rcw/estimators.hpp"

#include "rcw/error.hpp"
#include "rcw/linalg.hpp"
#include "rcw/wald.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rcw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd b_of(const VectorXd& beta) {
  VectorXd b(beta.size() + 1);
  b[0] = 1.0;
  b.tail(beta.size()) = -beta;
  return b;
}

EstimateResult make_result(VectorXd beta, EstimatorType type) {
  EstimateResult out;
  out.beta_hat = std::move(beta);
  out.kind.type = type;
  return out;
}

VectorXd tsls_beta(const MatrixXd& R) {
  const Index p = R.cols() - 1;
  const auto r2 = R.rightCols(p);
  const MatrixXd gram = r2.transpose() * r2;
  if (linalg::is_singular(gram)) {
    throw Error(ErrorCode::Singular, "R2'R2 is singular: no first-stage signal in sample");
  }
  return linalg::sym_inverse(gram, "R2'R2") * (r2.transpose() * R.col(0));
}

EstimateResult liml_impl(const MatrixXd& R, const ReducedFormStats& fixed) {
  const Index p = R.cols() - 1;
  if (R.rows() < p) throw Error(ErrorCode::InvalidArgument, "LIML requires k >= p");
  if (linalg::is_singular(fixed.Phi_hat)) {
    throw Error(ErrorCode::Singular, "Phi_hat is singular; LIML is undefined");
  }
  const MatrixXd a = linalg::symmetrize(R.transpose() * R);
  const MatrixXd b = static_cast<double>(fixed.n) * fixed.Phi_hat;
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(a, b);
  if (ges.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, "LIML generalized eigenproblem failed");
  }
  const VectorXd& evals = ges.eigenvalues();
  const double lambda = evals[0];
  const double tie = 1e-12 * std::max(1.0, std::abs(lambda));

  std::optional<VectorXd> best;
  for (Index i = 0; i < evals.size() && evals[i] - lambda <= tie; ++i) {
    const VectorXd v = ges.eigenvectors().col(i);
    if (std::abs(v[0]) < 1e-12 * v.norm()) continue;
    VectorXd beta = -v.tail(p) / v[0];
    if (!best || beta.norm() < best->norm()) best = std::move(beta);
  }
  if (!best) {
    throw Error(ErrorCode::Singular,
                "LIML eigenvector has zero first coordinate; the estimate is at infinity");
  }
  auto out = make_result(std::move(*best), EstimatorType::LIML);
  out.liml_lambda = lambda;
  return out;
}

EstimateResult gmm2_impl(const MatrixXd& R, const ReducedFormStats& fixed) {
  const Index p = R.cols() - 1;
  const Index k = R.rows();
  const VectorXd preliminary = tsls_beta(R);
  const MatrixXd v = linalg::kron_quadratic(fixed.Sigma_hat, b_of(preliminary), k);
  const MatrixXd w = linalg::sym_inverse(v, "two-step GMM weight");
  const auto r2 = R.rightCols(p);
  const MatrixXd lhs = linalg::symmetrize(r2.transpose() * w * r2);
  if (linalg::is_singular(lhs)) throw Error(ErrorCode::Singular, "R2' W R2 is singular");
  return make_result(linalg::sym_inverse(lhs, "R2' W R2") * (r2.transpose() * w * R.col(0)),
                     EstimatorType::GMM2);
}

// dQ/dbeta for p = 1, with Q = g' V^{-1} g, g = R1 - beta R2 and
// V = S11 - beta (S12 + S21) + beta^2 S22.
double cue_slope(const MatrixXd& R, const MatrixXd& sigma, double beta) {
  const Index k = R.rows();
  const VectorXd g = R.col(0) - beta * R.col(1);
  const auto s11 = sigma.topLeftCorner(k, k);
  const auto s12 = sigma.topRightCorner(k, k);
  const auto s21 = sigma.bottomLeftCorner(k, k);
  const auto s22 = sigma.bottomRightCorner(k, k);
  const MatrixXd v = s11 - beta * (s12 + s21) + beta * beta * s22;
  const MatrixXd dv = -(s12 + s21) + 2.0 * beta * s22;
  const Eigen::LDLT<MatrixXd> ldlt(linalg::symmetrize(v));
  if (ldlt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  const VectorXd wg = ldlt.solve(g);
  return -2.0 * wg.dot(R.col(1)) - wg.dot(dv * wg);
}

EstimateResult cue_impl(const MatrixXd& R, const ReducedFormStats& fixed, const CueSettings& settings) {
  if (R.cols() != 2) {
    throw Error(ErrorCode::Unsupported,
                "CUE is implemented for a single endogenous regressor only (p = 1)");
  }
  validate(settings);
  const MatrixXd& sigma = fixed.Sigma_hat;
  auto objective = [&](double beta) {
    const double q = cue_objective(R, sigma, VectorXd::Constant(1, beta));
    return std::isfinite(q) ? q : kInf;
  };

  const double center = tsls_beta(R)[0];
  double half_width = 0.0;
  try {
    const VectorXd b = VectorXd::Constant(1, center);
    half_width = settings.se_multiple * wald_sandwich(R, sigma, b, b).se[0];
  } catch (const Error&) {
  }
  if (!(std::isfinite(half_width) && half_width > 0.0)) {
    half_width = settings.se_multiple * std::max(1.0, std::abs(center));
  }
  const double lower = settings.lower.value_or(-kInf);
  const double upper = settings.upper.value_or(kInf);
  double lo = std::max(center - half_width, lower);
  double hi = std::min(center + half_width, upper);
  if (!(lo < hi)) {
    if (!(std::isfinite(lower) && std::isfinite(upper))) {
      throw Error(ErrorCode::InvalidArgument, "CUE search window is empty");
    }
    lo = lower;
    hi = upper;
  }

  std::vector<double> grid(static_cast<std::size_t>(settings.grid_points));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  }
  // The 2SLS and LIML points join the grid so the minimum can never be
  // worse than either of them.
  std::vector<double> extra{center};
  try {
    extra.push_back(liml_impl(R, fixed).beta_hat[0]);
  } catch (const Error&) {
  }
  for (const double x : extra) {
    if (x >= lower && x <= upper && std::isfinite(x)) grid.push_back(x);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> values(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = objective(grid[i]);
    if (values[i] < values[best]) best = i;
  }
  if (!std::isfinite(values[best])) {
    throw Error(ErrorCode::Degenerate, "CUE criterion is non-finite everywhere on the grid");
  }

  double best_x = grid[best];
  double best_q = values[best];
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[best + 1 == grid.size() ? best : best + 1];

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int iter = 0; iter < 200 && (b - a) > settings.tolerance * std::max(1.0, std::abs(best_x));
       ++iter) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
    if (fc < best_q) { best_q = fc; best_x = c; }
    if (fd < best_q) { best_q = fd; best_x = d; }
  }

  // Golden section cannot resolve the minimizer below ~sqrt(eps) because the
  // criterion is flat there; bisect on the sign of the slope instead.
  const double w = std::max(b - a, 1e-10 * std::max(1.0, std::abs(best_x)));
  double lo_x = std::max(best_x - 4.0 * w, lower);
  double hi_x = std::min(best_x + 4.0 * w, upper);
  const double s_lo = cue_slope(R, sigma, lo_x);
  const double s_hi = cue_slope(R, sigma, hi_x);
  if (s_lo < 0.0 && s_hi > 0.0) {
    for (int iter = 0; iter < 200 && hi_x - lo_x > 0.0; ++iter) {
      const double mid = 0.5 * (lo_x + hi_x);
      if (mid <= lo_x || mid >= hi_x) break;
      const double s_mid = cue_slope(R, sigma, mid);
      if (!std::isfinite(s_mid)) break;
      if (s_mid < 0.0) {
        lo_x = mid;
      } else {
        hi_x = mid;
      }
    }
    const double polished = 0.5 * (lo_x + hi_x);
    const double q = objective(polished);
    if (q <= best_q * (1.0 + 1e-12) + 1e-300) {
      best_x = polished;
      best_q = q;
    }
  }

  auto out = make_result(VectorXd::Constant(1, best_x), EstimatorType::CUE);
  out.kind.cue = settings;
  out.cue_criterion = best_q;
  out.boundary = best == 0 || best + 1 == grid.size();
  return out;
}

}  // namespace

std::string to_string(EstimatorType type) {
  switch (type) {
    case EstimatorType::TSLS: return "2sls";
    case EstimatorType::LIML: return "liml";
    case EstimatorType::GMM2: return "gmm2";
    case EstimatorType::CUE: return "cue";
  }
  return "unknown";
}

std::optional<EstimatorType> parse_estimator(const std::string& name) {
  if (name == "2sls" || name == "tsls") return EstimatorType::TSLS;
  if (name == "liml") return EstimatorType::LIML;
  if (name == "gmm2" || name == "gmm") return EstimatorType::GMM2;
  if (name == "cue") return EstimatorType::CUE;
  return std::nullopt;
}

void validate(const CueSettings& s) {
  if (s.grid_points < 16) throw Error(ErrorCode::InvalidArgument, "CUE grid needs at least 16 points");
  if ((s.lower && !std::isfinite(*s.lower)) || (s.upper && !std::isfinite(*s.upper))) {
    throw Error(ErrorCode::InvalidArgument, "CUE bounds must be finite");
  }
  if (s.lower && s.upper && !(*s.lower < *s.upper)) {
    throw Error(ErrorCode::InvalidArgument, "CUE bounds need lower < upper");
  }
  if (!(s.tolerance > 0.0) || !(s.se_multiple > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "CUE tolerance and window must be positive");
  }
}

double cue_objective(const MatrixXd& R, const MatrixXd& sigma, const VectorXd& beta) {
  const VectorXd b = b_of(beta);
  const MatrixXd v = linalg::kron_quadratic(sigma, b, R.rows());
  if (linalg::is_singular(v)) return kInf;
  const VectorXd g = R * b;
  return g.dot(linalg::sym_inverse(v, "CUE weight") * g);
}

EstimateResult estimate_2sls(const ReducedFormStats& stats) {
  return make_result(tsls_beta(stats.R), EstimatorType::TSLS);
}
EstimateResult estimate_liml(const ReducedFormStats& stats) { return liml_impl(stats.R, stats); }
EstimateResult estimate_gmm2(const ReducedFormStats& stats) { return gmm2_impl(stats.R, stats); }
EstimateResult estimate_cue(const ReducedFormStats& stats, const CueSettings& settings) {
  return cue_impl(stats.R, stats, settings);
}

EstimateResult estimate(const EstimatorKind& kind, const ReducedFormStats& stats) {
  return estimate(kind, stats.R, stats);
}

EstimateResult estimate(const EstimatorKind& kind, const MatrixXd& R, const ReducedFormStats& fixed) {
  switch (kind.type) {
    case EstimatorType::TSLS: return make_result(tsls_beta(R), EstimatorType::TSLS);
    case EstimatorType::LIML: return liml_impl(R, fixed);
    case EstimatorType::GMM2: return gmm2_impl(R, fixed);
    case EstimatorType::CUE: return cue_impl(R, fixed, kind.cue);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown estimator");
}

}  // namespace rcw
