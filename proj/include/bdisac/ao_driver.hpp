#pragma once

#include "bdisac/psca_beamforming.hpp"
#include "bdisac/psca_scattering.hpp"

#include <chrono>

namespace bdisac {

/// Seed offset separating the initialization stream from the realization
/// stream, so redrawing the random start never disturbs the channels.
inline constexpr std::uint64_t kInitStreamSalt = 0x9e3779b97f4a7c15ull;

/// One fully instantiated problem: validated config, geometry, targets and
/// channel realization. All randomness is drawn here, from cfg.rng_seed.
struct Scenario {
  ScenarioConfig cfg;
  ArrayGeometry geometry;
  TargetParams targets;
  SteeringBundle bundle;
  ChannelSet channels;
};

inline Scenario make_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Scenario s;
  s.cfg = cfg;
  s.geometry = build_geometry(cfg);
  Rng rng(cfg.rng_seed);
  s.targets = make_targets(cfg, rng);
  s.bundle = steering(s.geometry, s.targets);
  s.channels.feed = feed_channel(cfg, s.geometry);
  s.channels.users = sample_user_channels(cfg, rng);
  return s;
}

/// Feasible starting pair. The scattering seed matches the surface response
/// to the combined user/target directions; if that rank-one seed is
/// degenerate for the topology (or a random start was requested) a random
/// complex Gaussian argument is projected instead. The beamformer start
/// blends power-normalized MRT columns with a random sensing block by rho.
inline std::pair<CMat, Beamformer> initialize(const Scenario& s, double rho, Rng& rng) {
  const ScenarioConfig& cfg = s.cfg;
  CMat psi;
  bool seeded = false;
  if (!cfg.random_psi_init) {
    const CVec v = s.channels.users * CVec::Ones(cfg.n_users) +
                   s.bundle.a.conjugate() * CVec::Ones(cfg.n_targets);
    const CVec u = s.channels.feed * CVec::Ones(cfg.n_tx);
    try {
      psi = project_scattering(v * u.adjoint(), cfg.topology);
      seeded = true;
    } catch (const numerical_error&) {
      seeded = false;
    }
  }
  if (!seeded)
    psi = project_scattering(rng.cgaussian_matrix(cfg.n_ris, cfg.n_ris), cfg.topology);

  Beamformer w;
  const CMat g = effective_rows(psi, s.channels).adjoint();  // n_tx x n_users, MRT directions
  w.comm = rho * project_power(g, cfg.power_budget);
  w.sense = (1.0 - rho) * project_power(rng.cgaussian_matrix(cfg.n_tx, cfg.n_tx),
                                        cfg.power_budget);
  const CMat wf = project_power(w.full(), cfg.power_budget);
  return {psi, Beamformer::split(wf, cfg.n_users)};
}

/// Per-outer-iteration trace record.
struct OuterRecord {
  int psi_iterations = 0;
  int w_iterations = 0;
  double objective_after_psi = 0.0;
  double objective_after_w = 0.0;
};

struct RunResult {
  CMat psi;
  Beamformer w;
  std::vector<OuterRecord> trace;
  // initial objective followed by the value after every accepted inner step,
  // both subproblems interleaved in execution order
  std::vector<double> objective_history;
  bool converged = false;
  int outer_iterations = 0;
  double objective = 0.0;      // internal scalarized objective at the final point
  double r_sum_bits = 0.0;     // 0 when the comm term is disabled
  double crb_trace = 0.0;      // 0 when the sensing term is disabled
  double wall_ms = 0.0;
};

/// Alternating optimization at fixed weights: a full scattering inner loop,
/// then a full beamforming inner loop, until the objective stalls within
/// outer_tol or max_outer is hit. rho_mix only shapes the starting point.
inline RunResult run_weighted(const Scenario& s, const SolverSettings& st, const Weights& wt,
                              double rho_mix) {
  st.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig& cfg = s.cfg;

  Rng init_rng(cfg.rng_seed ^ kInitStreamSalt);
  auto [psi, w] = initialize(s, rho_mix, init_rng);

  PointEval ev = evaluate_point(s.bundle, s.channels, psi, w, wt, cfg.cpi_len, cfg.noise_comm,
                                cfg.noise_sense);
  RunResult res;
  res.objective_history.push_back(ev.objective);
  double prev = ev.objective;
  for (int p = 1; p <= st.max_outer; ++p) {
    OuterRecord rec;
    SubproblemResult pr = solve_psi_subproblem(s.bundle, s.channels, cfg.topology, w, wt,
                                               cfg.cpi_len, cfg.noise_comm, cfg.noise_sense, st,
                                               psi, ev, &res.objective_history);
    rec.psi_iterations = pr.iterations;
    rec.objective_after_psi = pr.objective;
    SubproblemResult wr = solve_w_subproblem(s.bundle, s.channels, psi, wt, cfg.cpi_len,
                                             cfg.noise_comm, cfg.noise_sense, cfg.power_budget,
                                             st, w, ev, &res.objective_history);
    rec.w_iterations = wr.iterations;
    rec.objective_after_w = wr.objective;
    res.trace.push_back(rec);
    res.outer_iterations = p;
    if (std::abs(wr.objective - prev) <= st.outer_tol) {
      res.converged = true;
      break;
    }
    prev = wr.objective;
  }

  res.psi = std::move(psi);
  res.w = std::move(w);
  res.objective = ev.objective;
  if (wt.comm > 0.0) res.r_sum_bits = ev.r_bits;
  if (wt.sense > 0.0) res.crb_trace = ev.fisher.crb_trace;
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return res;
}

/// Normalizers of one realization: V_c from the rate-only problem, V_s from
/// the CRB-only problem, both solved with the same machinery and stopping
/// rules as the weighted run.
inline Normalizers compute_normalizers(const Scenario& s, const SolverSettings& st) {
  Normalizers nz;
  const RunResult comm = run_weighted(s, st, Weights::pure_comm(), 1.0);
  nz.vc_bits = comm.r_sum_bits;
  const RunResult sense = run_weighted(s, st, Weights::pure_sense(), 0.0);
  nz.vs = sense.crb_trace;
  if (!(nz.vc_bits > 0.0) || !std::isfinite(nz.vc_bits))
    throw numerical_error("compute_normalizers: rate-only run produced a nonpositive best rate");
  if (!(nz.vs > 0.0) || !std::isfinite(nz.vs))
    throw numerical_error("compute_normalizers: CRB-only run produced a nonpositive best CRB");
  return nz;
}

/// Weighted run at cfg.weight_rho with precomputed normalizers. The final
/// rate and CRB trace are re-evaluated so both reported metrics exist even
/// though only the weighted combination was optimized.
inline RunResult run_with_normalizers(const Scenario& s, const SolverSettings& st,
                                      const Normalizers& nz) {
  const double rho = s.cfg.weight_rho;
  RunResult res = run_weighted(s, st, Weights::tradeoff(rho, nz), rho);
  if (res.r_sum_bits == 0.0)
    res.r_sum_bits = sum_rate_bits(sinr(res.psi, s.channels, res.w, s.cfg.noise_comm));
  if (res.crb_trace == 0.0)
    res.crb_trace = fisher_state(s.bundle, res.psi, s.channels.feed, res.w.cov(), s.cfg.cpi_len,
                                 s.cfg.noise_sense)
                        .crb_trace;
  return res;
}

/// Full pipeline for one scenario: normalizers, then the weighted run.
inline RunResult run(const Scenario& s, const SolverSettings& st) {
  return run_with_normalizers(s, st, compute_normalizers(s, st));
}

}  // namespace bdisac
