#pragma once

#include "bdisac/ao_driver.hpp"

#include <functional>

namespace bdisac::selfcheck {

/// Verification helpers. Everything here recomputes quantities along an
/// independent path (finite differences on the raw signal model, direct
/// inequality evaluation) and must stay decoupled from the closed-form
/// implementations it is used to cross-check.

/// Mean received matrix of the echo model, B U A^T Psi H, rebuilt from the
/// raw geometry at the given target parameters.
inline CMat echo_mean(const ArrayGeometry& g, const TargetParams& tp, const CMat& psi,
                      const CMat& feed) {
  const SteeringBundle sb = steering(g, tp);
  return sb.b * sb.u * sb.a.transpose() * psi * feed;
}

/// Numeric-Jacobian Fisher information over [theta, phi, Re alpha, Im alpha]:
/// central differences of the mean map, then F(l,p) = 2 cpi / noise *
/// Re tr(D_l^H D_p Rx). Shares nothing with the Hadamard-factored blocks.
inline RMat fim_numeric(const ArrayGeometry& g, const TargetParams& tp, const CMat& psi,
                        const CMat& feed, const CMat& rx_cov, int cpi_len, double noise_sense,
                        double step = 1e-6) {
  const int q = static_cast<int>(tp.azimuth.size());
  std::vector<CMat> d;
  d.reserve(static_cast<size_t>(4 * q));

  auto perturbed = [&](int param, int t, double eps) {
    TargetParams p = tp;
    if (param == 0) p.azimuth(t) += eps;
    if (param == 1) p.elevation(t) += eps;
    if (param == 2) p.coeff(t) += cxd(eps, 0.0);
    if (param == 3) p.coeff(t) += cxd(0.0, eps);
    return echo_mean(g, p, psi, feed);
  };
  for (int param = 0; param < 4; ++param)
    for (int t = 0; t < q; ++t)
      d.push_back((perturbed(param, t, step) - perturbed(param, t, -step)) / (2.0 * step));

  const double scale = 2.0 * static_cast<double>(cpi_len) / noise_sense;
  RMat f(4 * q, 4 * q);
  for (int l = 0; l < 4 * q; ++l)
    for (int p = 0; p < 4 * q; ++p)
      f(l, p) = scale * (d[static_cast<size_t>(l)].adjoint() * d[static_cast<size_t>(p)] * rx_cov)
                            .trace()
                            .real();
  return f;
}

/// Finite-difference gradient of a real function of a complex matrix, in the
/// convention grad f = 2X for f(Z) = 2 Re tr(Z^H X): entry (i,j) is the Re
/// derivative plus j times the Im derivative.
inline CMat fd_gradient(const std::function<double(const CMat&)>& f, const CMat& x,
                        double step = 1e-6) {
  CMat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      CMat xp = x, xm = x;
      xp(i, j) += step;
      xm(i, j) -= step;
      const double dre = (f(xp) - f(xm)) / (2.0 * step);
      xp = x;
      xm = x;
      xp(i, j) += cxd(0.0, step);
      xm(i, j) -= cxd(0.0, step);
      const double dim = (f(xp) - f(xm)) / (2.0 * step);
      g(i, j) = cxd(dre, dim);
    }
  return g;
}

/// Violation (positive part of bound minus function) of the scalar rate
/// bound: ln(1 + |s|^2/n) at (s, n) against its surrogate expanded at
/// (s0, n0). Returns bound - value, which must be <= 0 up to roundoff.
inline double rate_bound_gap(cxd s0, double n0, cxd s, double n) {
  const double g0 = std::norm(s0) / n0;
  const double value = std::log1p(std::norm(s) / n);
  const double bound = std::log1p(g0) - g0 + 2.0 * (std::conj(s0) / n0 * s).real() -
                       std::norm(s0) / (n0 * (n0 + std::norm(s0))) * (std::norm(s) + n);
  return bound - value;
}

/// Bound gap for the inverse-trace surrogate: 2 tr(V0^{-1}) - tr(V0^{-2} V)
/// minus tr(V^{-1}), must be <= 0 for positive definite V, V0.
inline double trace_bound_gap(const RMat& v0, const RMat& v) {
  const RMat v0inv = v0.inverse();
  const double value = v.inverse().trace();
  const double bound = 2.0 * v0inv.trace() - (v0inv * v0inv * v).trace();
  return bound - value;
}

/// Bound gap for the quadratic-form linearization: 2 Re tr(T Z Psi^H S) -
/// tr(T Z T^H S) minus tr(Psi Z Psi^H S), must be <= 0 for PSD Z, S.
inline double quad_bound_gap(const CMat& psi, const CMat& theta, const CMat& z, const CMat& s) {
  const double value = (psi * z * psi.adjoint() * s).trace().real();
  const double bound = 2.0 * (theta * z * psi.adjoint() * s).trace().real() -
                       (theta * z * theta.adjoint() * s).trace().real();
  return bound - value;
}

/// Random symmetric unitary exp(j S) with S real symmetric: candidates for
/// testing the optimality of the nearest-point projection.
inline CMat random_symmetric_unitary(Eigen::Index n, Rng& rng, double scale = kPi) {
  RMat s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) s(i, j) = s(j, i) = scale * rng.gaussian();
  Eigen::SelfAdjointEigenSolver<RMat> es(s);
  CVec phases(n);
  for (Eigen::Index i = 0; i < n; ++i) phases(i) = std::polar(1.0, es.eigenvalues()(i));
  const CMat q = es.eigenvectors().cast<cxd>();
  return q * phases.asDiagonal() * q.transpose();
}

/// Random Hermitian PSD matrix G G^H with Gaussian G.
inline CMat random_psd(Eigen::Index n, Rng& rng) {
  const CMat g = rng.cgaussian_matrix(n, n);
  return g * g.adjoint();
}

/// Random symmetric positive definite real matrix.
inline RMat random_spd(Eigen::Index n, Rng& rng) {
  RMat g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.gaussian();
  return g * g.transpose() + 0.1 * RMat::Identity(n, n);
}

}  // namespace bdisac::selfcheck
