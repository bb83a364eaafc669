#include "rcw/core_model.hpp"

#include "rcw/error.hpp"
#include "rcw/linalg.hpp"

#include <map>

namespace rcw {

std::string to_string(const VcovKind& kind) {
  switch (kind.type) {
    case VcovKind::Type::HC: return "hc";
    case VcovKind::Type::HAC: return "hac";
    case VcovKind::Type::Cluster: return "cluster";
  }
  return "unknown";
}

MatrixXd ReducedFormStats::sigma_block(Index a, Index c) const {
  const Index kk = k();
  return Sigma_hat.block(a * kk, c * kk, kk, kk);
}

IVData partial_out_exogenous(const IVData& data) {
  if (!data.X) return data;
  const MatrixXd& x = *data.X;
  if (x.cols() > 0 && linalg::is_singular(x.transpose() * x)) {
    throw Error(ErrorCode::Data, "exogenous covariates X are rank deficient");
  }
  const Eigen::HouseholderQR<MatrixXd> qr(x);
  auto residualize = [&](const MatrixXd& m) -> MatrixXd { return m - x * qr.solve(m); };

  IVData out;
  out.y1 = residualize(data.y1);
  out.Y2 = residualize(data.Y2);
  out.Z = residualize(data.Z);
  out.cluster_ids = data.cluster_ids;
  return out;
}

RComponents compute_R(const IVData& data) {
  if (data.q() != 0) {
    throw Error(ErrorCode::InvalidArgument, "compute_R expects partialled data (q = 0)");
  }
  const MatrixXd ztz = data.Z.transpose() * data.Z;
  RComponents out;
  out.ZtZ_half_inv = linalg::sym_inv_sqrt(ztz, "Z'Z");
  out.R = out.ZtZ_half_inv * (data.Z.transpose() * data.Y());
  return out;
}

MatrixXd reduced_form_residuals(const IVData& data) {
  const MatrixXd y = data.Y();
  const Eigen::HouseholderQR<MatrixXd> qr(data.Z);
  return y - data.Z * qr.solve(y);
}

MatrixXd estimate_omega(const IVData& data, const MatrixXd& residuals, const VcovKind& kind) {
  const Index n = data.n();
  const Index k = data.k();
  if (residuals.rows() != n) {
    throw Error(ErrorCode::InvalidArgument, "residual rows do not match the number of observations");
  }
  const Index m = residuals.cols();

  // Row i of g is (V_i ⊗ Z_i)'.
  MatrixXd g(n, m * k);
  for (Index a = 0; a < m; ++a) {
    g.middleCols(a * k, k) = data.Z.array().colwise() * residuals.col(a).array();
  }

  MatrixXd omega;
  double scale = 1.0;
  switch (kind.type) {
    case VcovKind::Type::HC:
      omega = g.transpose() * g / static_cast<double>(n);
      if (kind.small_sample) scale = static_cast<double>(n) / static_cast<double>(n - k);
      break;
    case VcovKind::Type::HAC: {
      if (kind.bandwidth < 0) throw Error(ErrorCode::InvalidArgument, "HAC bandwidth must be >= 0");
      if (kind.bandwidth >= n) {
        throw Error(ErrorCode::InvalidArgument, "HAC bandwidth must be smaller than n");
      }
      omega = g.transpose() * g;
      for (Index lag = 1; lag <= kind.bandwidth; ++lag) {
        const double w = 1.0 - static_cast<double>(lag) / static_cast<double>(kind.bandwidth + 1);
        const MatrixXd gamma = g.bottomRows(n - lag).transpose() * g.topRows(n - lag);
        omega += w * (gamma + gamma.transpose());
      }
      omega /= static_cast<double>(n);
      if (kind.small_sample) scale = static_cast<double>(n) / static_cast<double>(n - k);
      break;
    }
    case VcovKind::Type::Cluster: {
      if (!data.cluster_ids) {
        throw Error(ErrorCode::InvalidArgument, "cluster variance requested but no cluster labels given");
      }
      std::map<std::int64_t, Index> slot;
      for (const auto id : *data.cluster_ids) slot.emplace(id, static_cast<Index>(slot.size()));
      MatrixXd sums = MatrixXd::Zero(static_cast<Index>(slot.size()), m * k);
      for (Index i = 0; i < n; ++i) sums.row(slot.at((*data.cluster_ids)[i])) += g.row(i);
      omega = sums.transpose() * sums / static_cast<double>(n);
      if (kind.small_sample) {
        const double groups = static_cast<double>(slot.size());
        scale = groups / (groups - 1.0) * static_cast<double>(n - 1) / static_cast<double>(n - k);
      }
      break;
    }
  }
  return linalg::symmetrize(scale * omega);
}

MatrixXd compute_sigma_hat(const MatrixXd& omega_hat, const MatrixXd& ZtZ_half_inv, Index n,
                           Index p, Index k) {
  const Index m = (p + 1) * k;
  if (omega_hat.rows() != m || omega_hat.cols() != m || ZtZ_half_inv.rows() != k ||
      ZtZ_half_inv.cols() != k) {
    throw Error(ErrorCode::InvalidArgument, "compute_sigma_hat: dimension mismatch");
  }
  // (Z'Z/n)^{-1/2} = sqrt(n) (Z'Z)^{-1/2}
  const MatrixXd s = std::sqrt(static_cast<double>(n)) * ZtZ_half_inv;
  MatrixXd sigma(m, m);
  for (Index a = 0; a <= p; ++a) {
    for (Index c = 0; c <= p; ++c) {
      sigma.block(a * k, c * k, k, k).noalias() = s * omega_hat.block(a * k, c * k, k, k) * s;
    }
  }
  return linalg::symmetrize(sigma);
}

MatrixXd compute_phi_hat(const IVData& data) {
  const MatrixXd v = reduced_form_residuals(data);
  return linalg::symmetrize(v.transpose() * v / static_cast<double>(data.n()));
}

ReducedFormStats reduced_form(const IVData& input, const VcovKind& kind) {
  const IVData data = partial_out_exogenous(input);
  auto r = compute_R(data);
  const MatrixXd resid = reduced_form_residuals(data);

  ReducedFormStats stats;
  stats.n = data.n();
  stats.vcov = kind;
  stats.Omega_hat = estimate_omega(data, resid, kind);
  stats.Sigma_hat = compute_sigma_hat(stats.Omega_hat, r.ZtZ_half_inv, data.n(), data.p(), data.k());
  stats.Phi_hat = linalg::symmetrize(resid.transpose() * resid / static_cast<double>(data.n()));
  stats.R = std::move(r.R);
  stats.ZtZ_half_inv = std::move(r.ZtZ_half_inv);
  return stats;
}

}  // namespace rcw
