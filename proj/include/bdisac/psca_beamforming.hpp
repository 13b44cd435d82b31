#pragma once

#include "bdisac/psca_scattering.hpp"

namespace bdisac {

/// Quadratic surrogate data for the beamforming subproblem: maximize
/// 2 Re tr(W^H P2) + tr(W W^H P1) on the power sphere.
struct WSurrogate {
  CMat p1;  // n_tx x n_tx, Hermitian
  CMat p2;  // n_tx x (n_users + n_tx)
};

inline WSurrogate w_surrogate(const SteeringBundle& sb, const ChannelSet& ch, const CMat& psi,
                              const PointEval& ev, const Weights& wt, int cpi_len,
                              double noise_sense, int n_users) {
  const Eigen::Index nt = ch.feed.cols();
  WSurrogate s;
  s.p1 = CMat::Zero(nt, nt);
  s.p2 = CMat::Zero(nt, nt + n_users);
  if (wt.comm > 0.0) {
    const CMat g = effective_rows(psi, ch).adjoint();  // n_tx x n_users, columns g_k
    const CMat e1 = ev.aux.zeta.asDiagonal();
    const CMat e2 = ev.aux.eta.cast<cxd>().asDiagonal();
    s.p1 -= wt.comm * g * e2 * g.adjoint();
    s.p2.leftCols(n_users) = wt.comm * g * e1.adjoint();
  }
  if (wt.sense > 0.0) {
    const CMat sig = sigma_kernel(sb, ev.fisher.j, cpi_len, noise_sense);
    const CMat ph = psi * ch.feed;
    s.p1 += 0.5 * wt.sense * ph.adjoint() * (sig + sig.adjoint()) * ph;
  }
  s.p1 = 0.5 * (s.p1 + s.p1.adjoint()).eval();
  return s;
}

/// Euclidean gradient of the surrogate objective at w, same convention as
/// the scattering side.
inline CMat w_surrogate_gradient(const WSurrogate& s, const CMat& w) {
  return 2.0 * s.p2 + 2.0 * s.p1 * w;
}

/// One projected majorize-step of the beamformer: linearize the lifted
/// quadratic at the current point and renormalize to the power sphere.
inline CMat w_step(const WSurrogate& s, const CMat& w, double mu, double power) {
  const Eigen::Index nt = w.rows();
  const CMat arg = s.p2 + (s.p1 + mu * CMat::Identity(nt, nt)) * w;
  return project_power(arg, power);
}

/// Inner PSCA loop for w at fixed psi; mirrors solve_psi_subproblem,
/// including the rejected-step lift escalation safeguard.
inline SubproblemResult solve_w_subproblem(const SteeringBundle& sb, const ChannelSet& ch,
                                           const CMat& psi, const Weights& wt, int cpi_len,
                                           double noise_comm, double noise_sense, double power,
                                           const SolverSettings& st, Beamformer& w,
                                           PointEval& ev,
                                           std::vector<double>* history = nullptr) {
  const int n_users = static_cast<int>(w.comm.cols());
  SubproblemResult res;
  double boost = 1.0;
  for (int it = 1; it <= st.max_inner; ++it) {
    const WSurrogate s = w_surrogate(sb, ch, psi, ev, wt, cpi_len, noise_sense, n_users);
    const double mu = st.mu_multiplier * lift_constant(s.p1);
    Beamformer w_next;
    PointEval ev_next;
    bool accepted = false;
    for (int attempt = 0; attempt < 48 && !accepted; ++attempt) {
      w_next = Beamformer::split(w_step(s, w.full(), boost * mu, power), n_users);
      bool evaluated = true;
      try {
        ev_next = evaluate_point(sb, ch, psi, w_next, wt, cpi_len, noise_comm, noise_sense);
      } catch (const numerical_error&) {
        evaluated = false;
      }
      if (evaluated &&
          ev_next.objective >= ev.objective - 1e-14 * std::max(1.0, std::abs(ev.objective)))
        accepted = true;
      else
        boost *= 4.0;
    }
    if (!accepted)
      throw numerical_error("solve_w_subproblem: no ascent step under maximal lift");
    const double delta = std::abs(ev_next.objective - ev.objective);
    const double floor = std::max(std::abs(ev.objective), 1e-12);
    w = std::move(w_next);
    ev = std::move(ev_next);
    res.iterations = it;
    if (history) history->push_back(ev.objective);
    if (delta <= st.inner_tol * floor) break;
  }
  res.objective = ev.objective;
  return res;
}

}  // namespace bdisac
