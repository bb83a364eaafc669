#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rcw {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Raw IV sample: y1 = Y2 beta + u, Y2 = Z Pi + V2, with optional exogenous
// covariates X (partialled out before inference) and cluster labels.
struct IVData {
  VectorXd y1;                         // n
  MatrixXd Y2;                         // n x p
  MatrixXd Z;                          // n x k
  std::optional<MatrixXd> X;           // n x q
  std::optional<std::vector<std::int64_t>> cluster_ids;

  Index n() const { return y1.size(); }
  Index p() const { return Y2.cols(); }
  Index k() const { return Z.cols(); }
  Index q() const { return X ? X->cols() : 0; }

  // [y1 : Y2]
  MatrixXd Y() const;
};

// Throws rcw::Error when dimensions, k >= p >= 1, n > k + q, cluster label
// count, or full column rank of [X Z] fail.
void validate(const IVData& data);

struct VcovKind {
  enum class Type { HC, HAC, Cluster };

  Type type = Type::HC;
  int bandwidth = 0;          // HAC lag truncation (Bartlett kernel)
  bool small_sample = false;  // n/(n-k) for HC/HAC; G/(G-1)(n-1)/(n-k) for clusters

  static VcovKind hc(bool small_sample = false) { return {Type::HC, 0, small_sample}; }
  static VcovKind hac(int bandwidth) { return {Type::HAC, bandwidth, false}; }
  static VcovKind cluster(bool small_sample = false) { return {Type::Cluster, 0, small_sample}; }
};

std::string to_string(const VcovKind& kind);

// Sufficient statistics for every estimator and Wald statistic.
//   R      = (Z'Z)^{-1/2} Z'[y1 : Y2]                    k x (p+1)
//   Sigma  = (I ⊗ (Z'Z/n)^{-1/2}) Omega (I ⊗ (Z'Z/n)^{-1/2})
//   Phi    = Y'MY / n
// Immutable once built; safe to share read-only across threads.
struct ReducedFormStats {
  MatrixXd R;
  MatrixXd Sigma_hat;
  MatrixXd Phi_hat;
  MatrixXd ZtZ_half_inv;
  MatrixXd Omega_hat;
  Index n = 0;
  VcovKind vcov;

  Index k() const { return R.rows(); }
  Index p() const { return R.cols() - 1; }
  auto R1() const { return R.col(0); }
  auto R2() const { return R.rightCols(R.cols() - 1); }

  // Block (a, c) of Sigma_hat, a, c in [0, p]; each block is k x k.
  MatrixXd sigma_block(Index a, Index c) const;
};

struct ColumnSpec {
  std::string y;
  std::vector<std::string> endog;
  std::vector<std::string> instruments;
  std::vector<std::string> exog;
  std::optional<std::string> cluster;
  bool add_intercept = false;  // appends a column of ones to X
};

// Reads a header-row CSV. Missing or non-numeric cells in selected columns
// are errors naming the line and column; rows are never dropped.
IVData load_dataset(const std::string& path, const ColumnSpec& spec);
IVData parse_dataset(std::istream& in, const ColumnSpec& spec, const std::string& source = "<stream>");

// Residualizes y1, Y2, Z on X and drops X. No-op when X is absent.
IVData partial_out_exogenous(const IVData& data);

struct RComponents {
  MatrixXd R;
  MatrixXd ZtZ_half_inv;
};

RComponents compute_R(const IVData& data);

// Reduced-form OLS residuals MY, n x (p+1).
MatrixXd reduced_form_residuals(const IVData& data);

// Robust variance of n^{-1/2} sum (V_i ⊗ Z_i) from residual rows.
MatrixXd estimate_omega(const IVData& data, const MatrixXd& residuals, const VcovKind& kind);

MatrixXd compute_sigma_hat(const MatrixXd& omega_hat, const MatrixXd& ZtZ_half_inv, Index n,
                           Index p, Index k);

MatrixXd compute_phi_hat(const IVData& data);

// Full pipeline: partial out, R, residuals, Omega, Sigma, Phi.
ReducedFormStats reduced_form(const IVData& data, const VcovKind& kind);

}  // namespace rcw
