#pragma once

#include "bdisac/geometry.hpp"
#include "bdisac/types.hpp"

#include <Eigen/Cholesky>

namespace bdisac {

/// Joint transmit beamformer W = [W_c, W_s]: one communication stream per
/// user plus n_tx dedicated sensing streams.
struct Beamformer {
  CMat comm;   // n_tx x n_users
  CMat sense;  // n_tx x n_tx

  CMat full() const {
    CMat w(comm.rows(), comm.cols() + sense.cols());
    w << comm, sense;
    return w;
  }
  CMat cov() const {  // R_x = W W^H
    CMat w = full();
    return w * w.adjoint();
  }
  double power() const { return comm.squaredNorm() + sense.squaredNorm(); }

  static Beamformer split(const CMat& w, int n_users) {
    Beamformer b;
    b.comm = w.leftCols(n_users);
    b.sense = w.rightCols(w.cols() - n_users);
    return b;
  }
};

/// Effective downlink rows T with T(k,:) = h_k^H Psi H, so the symbol-space
/// response of user k is T(k,:) * W.
inline CMat effective_rows(const CMat& psi, const ChannelSet& ch) {
  return ch.users.adjoint() * psi * ch.feed;
}

/// Per-user SINR given the user response Y = T * W (n_users x n_streams):
/// |Y(k,k)|^2 over the remaining row energy plus noise.
inline RVec sinr_from_response(const CMat& y, double noise_comm) {
  const Eigen::Index k = y.rows();
  RVec g(k);
  for (Eigen::Index u = 0; u < k; ++u) {
    const double desired = std::norm(y(u, u));
    const double total = y.row(u).squaredNorm() + noise_comm;
    g(u) = desired / (total - desired);
  }
  return g;
}

inline RVec sinr(const CMat& psi, const ChannelSet& ch, const Beamformer& w, double noise_comm) {
  return sinr_from_response(effective_rows(psi, ch) * w.full(), noise_comm);
}

inline double sum_rate_nats(const RVec& gammas) {
  double r = 0.0;
  for (Eigen::Index k = 0; k < gammas.size(); ++k) r += std::log1p(gammas(k));
  return r;
}

/// Sum rate in bits per channel use.
inline double sum_rate_bits(const RVec& gammas) { return sum_rate_nats(gammas) / kLn2; }

/// Surrogate coefficients of the rate bound at the expansion point: gamma_k
/// (SINR), zeta_k = gamma_k / (desired amplitude) and eta_k = gamma_k /
/// (total received power + noise). zeta falls back to zero when the desired
/// stream carries nothing.
struct AuxComm {
  RVec gamma;
  CVec zeta;
  RVec eta;
};

inline AuxComm comm_aux_from_response(const CMat& y, double noise_comm) {
  const Eigen::Index k = y.rows();
  AuxComm aux;
  aux.gamma.resize(k);
  aux.zeta.resize(k);
  aux.eta.resize(k);
  for (Eigen::Index u = 0; u < k; ++u) {
    const cxd s = y(u, u);
    const double desired = std::norm(s);
    const double total = y.row(u).squaredNorm() + noise_comm;
    const double g = desired / (total - desired);
    aux.gamma(u) = g;
    aux.zeta(u) = desired > 0.0 ? cxd(g, 0.0) / s : cxd(0.0, 0.0);
    aux.eta(u) = g / total;
  }
  return aux;
}

inline AuxComm comm_aux(const CMat& psi, const ChannelSet& ch, const Beamformer& w,
                        double noise_comm) {
  return comm_aux_from_response(effective_rows(psi, ch) * w.full(), noise_comm);
}

/// The six independent q x q blocks of the sensing Fisher information before
/// real/imaginary assembly and scaling.
struct FimBlocks {
  CMat f11, f12, f13, f22, f23, f33;
};

/// Fisher information of the target parameters [theta, phi, Re alpha,
/// Im alpha] for the echo model B U A^T Psi H x, plus its inverse and the
/// squared inverse used by the surrogate.
struct FisherState {
  FimBlocks blocks;
  RMat fim;        // 4q x 4q
  RMat finv;       // F^{-1}
  RMat j;          // F^{-2}
  double crb_trace = 0.0;
};

/// Hadamard-factored FIM blocks. rx_cov is the transmit covariance W W^H.
inline FimBlocks fim_blocks(const SteeringBundle& sb, const CMat& psi, const CMat& feed,
                            const CMat& rx_cov) {
  const CMat ph = psi * feed;             // n_ris x n_tx
  const CMat r = ph * rx_cov * ph.adjoint();  // n_ris x n_ris, Hermitian

  const CMat& a = sb.a;
  const CMat& at = sb.da_theta;
  const CMat& ap = sb.da_phi;
  const CMat& u = sb.u;

  // quad(x, y) = x^T R conj(y), the surface-side coupling of two steering
  // matrices; sandwich(x, y) = U quad U^H.
  auto quad = [&](const CMat& x, const CMat& y) -> CMat {
    return x.transpose() * r * y.conjugate();
  };
  auto sandwich = [&](const CMat& x, const CMat& y) -> CMat {
    return u * quad(x, y) * u.adjoint();
  };

  const CMat g_bb = sb.b.adjoint() * sb.b;
  const CMat g_tb = sb.db_theta.adjoint() * sb.b;
  const CMat g_bt = sb.b.adjoint() * sb.db_theta;
  const CMat g_pb = sb.db_phi.adjoint() * sb.b;
  const CMat g_bp = sb.b.adjoint() * sb.db_phi;
  const CMat g_tt = sb.db_theta.adjoint() * sb.db_theta;
  const CMat g_tp = sb.db_theta.adjoint() * sb.db_phi;
  const CMat g_pp = sb.db_phi.adjoint() * sb.db_phi;

  FimBlocks fb;
  fb.f11 = g_tt.cwiseProduct(sandwich(a, a).transpose()) +
           g_tb.cwiseProduct(sandwich(at, a).transpose()) +
           g_bt.cwiseProduct(sandwich(a, at).transpose()) +
           g_bb.cwiseProduct(sandwich(at, at).transpose());
  fb.f12 = g_tp.cwiseProduct(sandwich(a, a).transpose()) +
           g_tb.cwiseProduct(sandwich(ap, a).transpose()) +
           g_bp.cwiseProduct(sandwich(a, at).transpose()) +
           g_bb.cwiseProduct(sandwich(ap, at).transpose());
  fb.f22 = g_pp.cwiseProduct(sandwich(a, a).transpose()) +
           g_pb.cwiseProduct(sandwich(ap, a).transpose()) +
           g_bp.cwiseProduct(sandwich(a, ap).transpose()) +
           g_bb.cwiseProduct(sandwich(ap, ap).transpose());
  fb.f13 = g_tb.cwiseProduct((quad(a, a) * u.adjoint()).transpose()) +
           g_bb.cwiseProduct((quad(a, at) * u.adjoint()).transpose());
  fb.f23 = g_pb.cwiseProduct((quad(a, a) * u.adjoint()).transpose()) +
           g_bb.cwiseProduct((quad(a, ap) * u.adjoint()).transpose());
  fb.f33 = g_bb.cwiseProduct(quad(a, a).transpose());
  return fb;
}

/// Real 4q x 4q FIM from the complex blocks, scaled by 2 * cpi_len /
/// noise_sense.
inline RMat assemble_fim(const FimBlocks& fb, int cpi_len, double noise_sense) {
  const Eigen::Index q = fb.f11.rows();
  const double scale = 2.0 * static_cast<double>(cpi_len) / noise_sense;
  RMat f(4 * q, 4 * q);
  auto re = [](const CMat& m) -> RMat { return m.real(); };
  auto nim = [](const CMat& m) -> RMat { return -m.imag(); };
  f.block(0, 0, q, q) = re(fb.f11);
  f.block(0, q, q, q) = re(fb.f12);
  f.block(0, 2 * q, q, q) = re(fb.f13);
  f.block(0, 3 * q, q, q) = nim(fb.f13);
  f.block(q, q, q, q) = re(fb.f22);
  f.block(q, 2 * q, q, q) = re(fb.f23);
  f.block(q, 3 * q, q, q) = nim(fb.f23);
  f.block(2 * q, 2 * q, q, q) = re(fb.f33);
  f.block(2 * q, 3 * q, q, q) = nim(fb.f33);
  f.block(3 * q, 3 * q, q, q) = re(fb.f33);
  f.block(q, 0, q, q) = f.block(0, q, q, q).transpose();
  f.block(2 * q, 0, q, q) = f.block(0, 2 * q, q, q).transpose();
  f.block(3 * q, 0, q, q) = f.block(0, 3 * q, q, q).transpose();
  f.block(2 * q, q, q, q) = f.block(q, 2 * q, q, q).transpose();
  f.block(3 * q, q, q, q) = f.block(q, 3 * q, q, q).transpose();
  f.block(3 * q, 2 * q, q, q) = f.block(2 * q, 3 * q, q, q).transpose();
  f *= scale;
  return 0.5 * (f + f.transpose());
}

/// Reciprocal condition number bound below which the FIM counts as singular.
inline constexpr double kFimRcondFloor = 1e-12;

/// Invert the FIM once (LDLT) and derive F^{-1}, J = F^{-2} and the CRB
/// trace. An ill-conditioned or indefinite FIM aborts the run; no silent
/// regularization.
inline FisherState fisher_state(const SteeringBundle& sb, const CMat& psi, const CMat& feed,
                                const CMat& rx_cov, int cpi_len, double noise_sense) {
  FisherState fs;
  fs.blocks = fim_blocks(sb, psi, feed, rx_cov);
  fs.fim = assemble_fim(fs.blocks, cpi_len, noise_sense);
  if (!fs.fim.allFinite()) throw numerical_error("fisher_state: nonfinite FIM");

  Eigen::LDLT<RMat> ldlt(fs.fim);
  fs.finv = ldlt.solve(RMat::Identity(fs.fim.rows(), fs.fim.cols()));
  fs.finv = 0.5 * (fs.finv + fs.finv.transpose()).eval();
  // vectorD() must be strictly positive: isPositive() lets semidefinite
  // matrices through and solve() silently zeroes the deficient directions.
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      !(ldlt.vectorD().minCoeff() > 0.0) || !fs.finv.allFinite())
    throw numerical_error("fisher_state: FIM is not positive definite");

  // 1-norm reciprocal condition estimate; the guard also trips on NaN.
  const double rcond = 1.0 / (fs.fim.cwiseAbs().colwise().sum().maxCoeff() *
                              fs.finv.cwiseAbs().colwise().sum().maxCoeff());
  if (!(rcond > kFimRcondFloor))
    throw numerical_error("fisher_state: FIM condition number exceeds 1e12, aborting run");

  fs.j = fs.finv * fs.finv;
  fs.j = 0.5 * (fs.j + fs.j.transpose()).eval();
  fs.crb_trace = fs.finv.trace();
  return fs;
}

/// Normalizers of the weighted objective: the best attainable sum rate
/// (bits) and best attainable CRB trace of the same realization.
struct Normalizers {
  double vc_bits = 1.0;
  double vs = 1.0;
};

/// Scalarization weights. comm multiplies the sum rate in nats, sense
/// multiplies tr(F^{-1}); a zero weight disables that term entirely (the
/// corresponding metric is never evaluated).
struct Weights {
  double comm = 0.0;
  double sense = 0.0;

  static Weights pure_comm() { return {1.0, 0.0}; }
  static Weights pure_sense() { return {0.0, 1.0}; }
  static Weights tradeoff(double rho, const Normalizers& nz) {
    if (rho <= 0.0) return pure_sense();
    if (rho >= 1.0) return pure_comm();
    return {rho / (nz.vc_bits * kLn2), (1.0 - rho) / nz.vs};
  }
};

/// One evaluation of the design point (psi, w): rate, Fisher state and the
/// scalar objective comm * R_nats - sense * tr(F^{-1}). Terms with zero
/// weight are skipped and left defaulted.
struct PointEval {
  AuxComm aux;
  double r_nats = 0.0;
  double r_bits = 0.0;
  FisherState fisher;
  bool has_fisher = false;
  double objective = 0.0;
};

inline PointEval evaluate_point(const SteeringBundle& sb, const ChannelSet& ch, const CMat& psi,
                                const Beamformer& w, const Weights& wt, int cpi_len,
                                double noise_comm, double noise_sense) {
  PointEval ev;
  if (wt.comm > 0.0) {
    ev.aux = comm_aux(psi, ch, w, noise_comm);
    ev.r_nats = sum_rate_nats(ev.aux.gamma);
    ev.r_bits = ev.r_nats / kLn2;
    ev.objective += wt.comm * ev.r_nats;
  }
  if (wt.sense > 0.0) {
    ev.fisher = fisher_state(sb, psi, ch.feed, w.cov(), cpi_len, noise_sense);
    ev.has_fisher = true;
    ev.objective -= wt.sense * ev.fisher.crb_trace;
  }
  return ev;
}

/// Reported objective rho * R/Vc - (1-rho) * tr(F^{-1})/Vs with R and Vc in
/// bits.
inline double objective_value(double r_bits, double crb_trace, double rho, const Normalizers& nz) {
  double v = 0.0;
  if (rho > 0.0) v += rho * r_bits / nz.vc_bits;
  if (rho < 1.0) v -= (1.0 - rho) * crb_trace / nz.vs;
  return v;
}

}  // namespace bdisac
