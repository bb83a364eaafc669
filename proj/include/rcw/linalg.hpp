#pragma once

#include <Eigen/Dense>

#include <string_view>

// Small dense helpers shared by every module. All inverses and square roots
// go through a symmetric eigendecomposition; a numerically singular input is
// an error, never a silent pseudo-inverse.
namespace rcw::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Smallest eigenvalue below this fraction of the largest means singular.
inline constexpr double kRankTolerance = 1e-12;
// Negative eigenvalues down to this fraction of the largest are clipped to 0.
inline constexpr double kPsdTolerance = 1e-10;

MatrixXd symmetrize(const MatrixXd& a);

// True when the symmetric matrix is singular under kRankTolerance.
bool is_singular(const MatrixXd& a);

// A^{-1} for symmetric positive definite A. `what` names the matrix in errors.
MatrixXd sym_inverse(const MatrixXd& a, std::string_view what);

// A^{1/2} for symmetric PSD A; eigenvalues in [-kPsdTolerance*max, 0) are
// clipped, anything more negative is an error.
MatrixXd sym_sqrt(const MatrixXd& a, std::string_view what);

// A^{-1/2} for symmetric positive definite A.
MatrixXd sym_inv_sqrt(const MatrixXd& a, std::string_view what);

// (b ⊗ I_k)' S (b ⊗ I_k) for S of size (len(b) k) square, computed blockwise.
MatrixXd kron_quadratic(const MatrixXd& s, const VectorXd& b, Eigen::Index k);

// vec(M): columns stacked.
VectorXd vec(const MatrixXd& m);
MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

// Largest absolute entry, used for relative comparisons.
double max_abs(const MatrixXd& a);

}  // namespace rcw::linalg
