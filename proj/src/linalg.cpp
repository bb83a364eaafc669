#include "rcw/linalg.hpp"

#include "rcw/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace rcw {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Data: return "data";
    case ErrorCode::Singular: return "singular";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Degenerate: return "degenerate";
  }
  return "unknown";
}

namespace linalg {
namespace {

Eigen::SelfAdjointEigenSolver<MatrixXd> eigen_of(const MatrixXd& a, std::string_view what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": expected a non-empty square matrix");
  }
  if (!a.allFinite()) {
    throw Error(ErrorCode::Singular, std::string(what) + ": non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::Singular, std::string(what) + ": eigendecomposition failed");
  }
  return es;
}

bool singular_spectrum(const VectorXd& evals) {
  const double largest = evals.maxCoeff();
  return !(largest > 0.0) || evals.minCoeff() < kRankTolerance * largest;
}

[[noreturn]] void throw_singular(std::string_view what) {
  throw Error(ErrorCode::Singular, std::string(what) + " is numerically singular");
}

}  // namespace

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

bool is_singular(const MatrixXd& a) {
  if (a.rows() == 0 || !a.allFinite()) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  return es.info() != Eigen::Success || singular_spectrum(es.eigenvalues());
}

MatrixXd sym_inverse(const MatrixXd& a, std::string_view what) {
  const auto es = eigen_of(a, what);
  if (singular_spectrum(es.eigenvalues())) throw_singular(what);
  const MatrixXd& v = es.eigenvectors();
  return v * es.eigenvalues().cwiseInverse().asDiagonal() * v.transpose();
}

MatrixXd sym_sqrt(const MatrixXd& a, std::string_view what) {
  const auto es = eigen_of(a, what);
  VectorXd evals = es.eigenvalues();
  const double largest = std::max(evals.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals[i] < 0.0) {
      if (evals[i] < -kPsdTolerance * largest) {
        throw Error(ErrorCode::Singular,
                    std::string(what) + " is not positive semidefinite");
      }
      evals[i] = 0.0;
    }
  }
  const MatrixXd& v = es.eigenvectors();
  return v * evals.cwiseSqrt().asDiagonal() * v.transpose();
}

MatrixXd sym_inv_sqrt(const MatrixXd& a, std::string_view what) {
  const auto es = eigen_of(a, what);
  if (singular_spectrum(es.eigenvalues())) throw_singular(what);
  const MatrixXd& v = es.eigenvectors();
  return v * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

MatrixXd kron_quadratic(const MatrixXd& s, const VectorXd& b, Eigen::Index k) {
  const Eigen::Index m = b.size();
  MatrixXd out = MatrixXd::Zero(k, k);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index c = 0; c < m; ++c) {
      const double w = b[a] * b[c];
      if (w != 0.0) out.noalias() += w * s.block(a * k, c * k, k, k);
    }
  }
  return out;
}

VectorXd vec(const MatrixXd& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

double max_abs(const MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace linalg
}  // namespace rcw
