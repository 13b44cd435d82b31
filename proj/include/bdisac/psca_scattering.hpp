#pragma once

#include "bdisac/manifold.hpp"
#include "bdisac/metrics.hpp"

#include <Eigen/Eigenvalues>

namespace bdisac {

/// Sensing surrogate kernel Sigma. tr(J * F(psi)) equals
/// Re tr(Psi C Psi^H Sigma) with C = H Rx H^H, which turns the linearized
/// CRB term into a quadratic form in the design variable. Sigma depends on
/// the steering bundle and on J = F^{-2} of the expansion point only.
inline CMat sigma_kernel(const SteeringBundle& sb, const RMat& j, int cpi_len,
                         double noise_sense) {
  const Eigen::Index q = sb.u.rows();
  auto jb = [&](Eigen::Index r, Eigen::Index c) -> RMat { return j.block(q * r, q * c, q, q); };
  const CMat j11 = jb(0, 0).cast<cxd>();
  const CMat j12 = jb(0, 1).cast<cxd>();
  const CMat j22 = jb(1, 1).cast<cxd>();
  const CMat j13c = jb(0, 2).cast<cxd>() + cxd(0, 1) * jb(0, 3).cast<cxd>();
  const CMat j23c = jb(1, 2).cast<cxd>() + cxd(0, 1) * jb(1, 3).cast<cxd>();
  const CMat j33c =
      (jb(2, 2) + jb(3, 3)).cast<cxd>() + cxd(0, 2) * jb(2, 3).cast<cxd>();

  const CMat ac = sb.a.conjugate();
  const CMat atc = sb.da_theta.conjugate();
  const CMat apc = sb.da_phi.conjugate();
  const CMat uh = sb.u.adjoint();
  const CMat uat = sb.u * sb.da_theta.transpose();
  const CMat uap = sb.u * sb.da_phi.transpose();
  const CMat ua = sb.u * sb.a.transpose();

  const CMat g_bb = sb.b.adjoint() * sb.b;
  const CMat g_tb = sb.db_theta.adjoint() * sb.b;
  const CMat g_bt = sb.b.adjoint() * sb.db_theta;
  const CMat g_pb = sb.db_phi.adjoint() * sb.b;
  const CMat g_bp = sb.b.adjoint() * sb.db_phi;
  const CMat g_tt = sb.db_theta.adjoint() * sb.db_theta;
  const CMat g_tp = sb.db_theta.adjoint() * sb.db_phi;
  const CMat g_pp = sb.db_phi.adjoint() * sb.db_phi;

  const CMat s11 = ac * uh * g_tt.cwiseProduct(j11) * ua +
                   ac * uh * g_tb.cwiseProduct(j11) * uat +
                   atc * uh * g_bt.cwiseProduct(j11) * ua +
                   atc * uh * g_bb.cwiseProduct(j11) * uat;
  const CMat s12 = ac * uh * g_tp.cwiseProduct(j12) * ua +
                   ac * uh * g_tb.cwiseProduct(j12) * uap +
                   atc * uh * g_bp.cwiseProduct(j12) * ua +
                   atc * uh * g_bb.cwiseProduct(j12) * uap;
  const CMat s22 = ac * uh * g_pp.cwiseProduct(j22) * ua +
                   ac * uh * g_pb.cwiseProduct(j22) * uap +
                   apc * uh * g_bp.cwiseProduct(j22) * ua +
                   apc * uh * g_bb.cwiseProduct(j22) * uap;
  const CMat s13 = ac * uh * g_tb.cwiseProduct(j13c) * sb.a.transpose() +
                   atc * uh * g_bb.cwiseProduct(j13c) * sb.a.transpose();
  const CMat s23 = ac * uh * g_pb.cwiseProduct(j23c) * sb.a.transpose() +
                   apc * uh * g_bb.cwiseProduct(j23c) * sb.a.transpose();
  const CMat s33 = ac * g_bb.cwiseProduct(j33c) * sb.a.transpose();

  const double scale = 2.0 * static_cast<double>(cpi_len) / noise_sense;
  return scale * (s11 + 2.0 * s12 + 2.0 * s13 + s22 + 2.0 * s23 + s33);
}

/// Smallest shift making p1 + mu I positive semidefinite, padded with a
/// scale-aware slack: mu = max(0, -lambda_min) + 1e-6 (1 + ||p1||_2).
inline double lift_constant(const CMat& p1) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (p1 + p1.adjoint()), Eigen::EigenvaluesOnly);
  const RVec& ev = es.eigenvalues();
  const double lmin = ev.minCoeff();
  const double spec = std::max(std::abs(lmin), std::abs(ev.maxCoeff()));
  return std::max(0.0, -lmin) + 1e-6 * (1.0 + spec);
}

/// Quadratic surrogate data for the scattering subproblem: maximize
/// 2 Re tr(Psi^H P2) + tr(Psi C Psi^H P1) over the feasible set.
struct PsiSurrogate {
  CMat p1;  // n_ris x n_ris, Hermitian
  CMat p2;  // n_ris x n_ris
};

inline PsiSurrogate psi_surrogate(const SteeringBundle& sb, const ChannelSet& ch,
                                  const Beamformer& w, const PointEval& ev, const Weights& wt,
                                  int cpi_len, double noise_sense) {
  const Eigen::Index n = ch.feed.rows();
  PsiSurrogate s;
  s.p1 = CMat::Zero(n, n);
  s.p2 = CMat::Zero(n, n);
  if (wt.comm > 0.0) {
    const CMat e1 = ev.aux.zeta.asDiagonal();
    const CMat e2 = ev.aux.eta.cast<cxd>().asDiagonal();
    s.p1 -= wt.comm * ch.users * e2 * ch.users.adjoint();
    s.p2 += wt.comm * ch.users * e1.adjoint() * w.comm.adjoint() * ch.feed.adjoint();
  }
  if (wt.sense > 0.0) {
    const CMat sig = sigma_kernel(sb, ev.fisher.j, cpi_len, noise_sense);
    s.p1 += 0.5 * wt.sense * (sig + sig.adjoint());
  }
  s.p1 = 0.5 * (s.p1 + s.p1.adjoint()).eval();
  return s;
}

/// Euclidean gradient of the surrogate objective at psi under the
/// convention grad f = 2 X for f = 2 Re tr(Psi^H X).
inline CMat psi_surrogate_gradient(const PsiSurrogate& s, const CMat& psi, const CMat& c) {
  return 2.0 * s.p2 + 2.0 * s.p1 * psi * c;
}

/// One projected majorize-step of the scattering matrix: linearize the
/// lifted quadratic at theta = psi and project onto the feasible set.
inline CMat psi_step(const PsiSurrogate& s, const CMat& psi, const CMat& c,
                     const TopologySpec& topo, double mu) {
  const Eigen::Index n = psi.rows();
  const CMat arg = s.p2 + (s.p1 + mu * CMat::Identity(n, n)) * psi * c;
  return project_scattering(arg, topo);
}

struct SubproblemResult {
  int iterations = 0;
  double objective = 0.0;  // at the returned point
};

/// Inner PSCA loop for psi at fixed w. Rebuilds the surrogate at every
/// accepted iterate and stops on a relative objective stall or max_inner.
/// psi and ev are updated in place with the final point; every accepted
/// objective value is appended to history when one is supplied.
///
/// Ascent is guaranteed only once the lift dominates the curvature of the
/// true objective along the step, so a step that loses objective (or walks
/// into a singular Fisher matrix) is rejected and retried from the same
/// point with a geometrically larger lift. The escalation is sticky for the
/// rest of the call; on benign instances the first lift is always accepted
/// and the safeguard never triggers.
inline SubproblemResult solve_psi_subproblem(const SteeringBundle& sb, const ChannelSet& ch,
                                             const TopologySpec& topo, const Beamformer& w,
                                             const Weights& wt, int cpi_len, double noise_comm,
                                             double noise_sense, const SolverSettings& st,
                                             CMat& psi, PointEval& ev,
                                             std::vector<double>* history = nullptr) {
  const CMat c = ch.feed * w.cov() * ch.feed.adjoint();
  SubproblemResult res;
  double boost = 1.0;
  for (int it = 1; it <= st.max_inner; ++it) {
    const PsiSurrogate s = psi_surrogate(sb, ch, w, ev, wt, cpi_len, noise_sense);
    const double mu = st.mu_multiplier * lift_constant(s.p1);
    CMat psi_next;
    PointEval ev_next;
    bool accepted = false;
    for (int attempt = 0; attempt < 48 && !accepted; ++attempt) {
      psi_next = psi_step(s, psi, c, topo, boost * mu);
      bool evaluated = true;
      try {
        ev_next = evaluate_point(sb, ch, psi_next, w, wt, cpi_len, noise_comm, noise_sense);
      } catch (const numerical_error&) {
        evaluated = false;  // overshot into a degenerate region
      }
      if (evaluated &&
          ev_next.objective >= ev.objective - 1e-14 * std::max(1.0, std::abs(ev.objective)))
        accepted = true;
      else
        boost *= 4.0;
    }
    if (!accepted)
      throw numerical_error("solve_psi_subproblem: no ascent step under maximal lift");
    const double delta = std::abs(ev_next.objective - ev.objective);
    const double floor = std::max(std::abs(ev.objective), 1e-12);
    psi = std::move(psi_next);
    ev = std::move(ev_next);
    res.iterations = it;
    if (history) history->push_back(ev.objective);
    if (delta <= st.inner_tol * floor) break;
  }
  res.objective = ev.objective;
  return res;
}

}  // namespace bdisac
