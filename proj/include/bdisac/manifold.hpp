#pragma once

#include "bdisac/types.hpp"

#include <Eigen/SVD>

namespace bdisac {

/// Relative singular-value cutoff used to split range and null space when
/// projecting onto the symmetric-unitary set.
inline constexpr double kSymuniRankTol = 1e-10;

/// Projection of a square complex block onto the symmetric unitary matrices
/// {Z : Z = Z^T, Z^H Z = I}, i.e. the Frobenius-nearest such Z. Form
/// Qs = Q + Q^T = U S V^H, keep the R singular directions with
/// s > tol * s_max, complete U with conj(V) null-space columns and return
/// [U_R, conj(V)_{n-R}] V^H. The completion keeps the factor symmetric when
/// Qs is rank deficient.
inline CMat symuni(const CMat& q) {
  const Eigen::Index n = q.rows();
  if (n != q.cols()) throw std::invalid_argument("symuni: block must be square");
  if (!q.allFinite()) throw numerical_error("symuni: nonfinite projection argument");

  CMat qs = q + q.transpose();
  Eigen::JacobiSVD<CMat> svd(qs, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVec& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  if (!(smax > 0.0)) throw numerical_error("symuni: projection argument has no symmetric part");

  Eigen::Index r = 0;
  while (r < n && s(r) > kSymuniRankTol * smax) ++r;

  CMat ut(n, n);
  ut.leftCols(r) = svd.matrixU().leftCols(r);
  ut.rightCols(n - r) = svd.matrixV().rightCols(n - r).conjugate();
  return ut * svd.matrixV().adjoint();
}

/// Per-block projection onto the feasible scattering set of the given
/// topology. Size-1 blocks reduce to exact phase extraction q/|q|.
inline CMat project_scattering(const CMat& q, const TopologySpec& topo) {
  const Eigen::Index n = q.rows();
  if (n != q.cols() || n != topo.total())
    throw std::invalid_argument("project_scattering: argument/topology size mismatch");
  CMat psi = CMat::Zero(n, n);
  Eigen::Index off = 0;
  for (int sz : topo.group_sizes) {
    if (sz == 1) {
      const cxd v = q(off, off);
      const double m = std::abs(v);
      if (!(m > 0.0) || !std::isfinite(m))
        throw numerical_error("project_scattering: zero diagonal entry, phase undefined");
      psi(off, off) = v / m;
    } else {
      psi.block(off, off, sz, sz) = symuni(q.block(off, off, sz, sz));
    }
    off += sz;
  }
  return psi;
}

/// Radial projection onto the transmit power sphere tr(Z Z^H) = p.
inline CMat project_power(const CMat& z, double p) {
  const double e = z.squaredNorm();
  if (!(e > 0.0) || !std::isfinite(e))
    throw numerical_error("project_power: zero or nonfinite projection argument");
  return std::sqrt(p / e) * z;
}

/// Feasibility diagnostic: max of the symmetry and unitarity residuals over
/// all blocks (and of the off-block-diagonal mass), scale-free.
inline double scattering_residual(const CMat& psi, const TopologySpec& topo) {
  double worst = 0.0;
  CMat mask = psi;
  Eigen::Index off = 0;
  for (int sz : topo.group_sizes) {
    CMat blk = psi.block(off, off, sz, sz);
    worst = std::max(worst, (blk - blk.transpose()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (blk.adjoint() * blk - CMat::Identity(sz, sz)).cwiseAbs().maxCoeff());
    mask.block(off, off, sz, sz).setZero();
    off += sz;
  }
  worst = std::max(worst, mask.cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace bdisac
