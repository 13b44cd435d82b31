#include "bdisac/metrics.hpp"

#include "bdisac/ao_driver.hpp"
#include "bdisac/manifold.hpp"
#include "bdisac/selfcheck.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bdisac;

namespace {

struct Instance {
  Scenario sc;
  CMat psi;
  Beamformer w;
};

Instance make_instance(std::uint64_t seed, int n_ris = 4, int n_tx = 2, int n_sensor = 3,
                       int n_users = 2, int n_targets = 2) {
  ScenarioConfig cfg;
  cfg.n_ris = n_ris;
  cfg.n_tx = n_tx;
  cfg.n_sensor = n_sensor;
  cfg.n_users = n_users;
  cfg.n_targets = n_targets;
  cfg.cpi_len = 16;
  cfg.topology = TopologySpec::fully(n_ris);
  cfg.rng_seed = seed;
  Instance inst{make_scenario(cfg), CMat(), Beamformer{}};
  Rng rng(seed * 7919 + 1);
  inst.psi = project_scattering(rng.cgaussian_matrix(n_ris, n_ris), cfg.topology);
  inst.w.comm = rng.cgaussian_matrix(n_tx, n_users);
  inst.w.sense = rng.cgaussian_matrix(n_tx, n_tx);
  inst.w = Beamformer::split(project_power(inst.w.full(), cfg.power_budget), n_users);
  return inst;
}

}  // namespace

TEST_CASE("sum rate reference points") {
  RVec two(2);
  two << 1.0, 1.0;
  REQUIRE(std::abs(sum_rate_bits(two) - 2.0) < 1e-15);

  RVec one(1);
  one << 3.0;
  REQUIRE(std::abs(sum_rate_bits(one) - 2.0) < 1e-15);

  REQUIRE(std::abs(sum_rate_nats(one) - std::log(4.0)) < 1e-15);
  REQUIRE(std::abs(sum_rate_bits(RVec::Zero(3))) < 1e-15);
}

TEST_CASE("scalar response yields the frozen sinr and surrogate coefficients") {
  CMat y(1, 1);
  y(0, 0) = cxd(2.0, 0.0);
  const RVec g = sinr_from_response(y, 1.0);
  REQUIRE(std::abs(g(0) - 4.0) < 1e-15);

  const AuxComm aux = comm_aux_from_response(y, 1.0);
  REQUIRE(std::abs(aux.gamma(0) - 4.0) < 1e-15);
  REQUIRE(std::abs(aux.zeta(0) - cxd(2.0, 0.0)) < 1e-15);
  REQUIRE(std::abs(aux.eta(0) - 0.8) < 1e-15);
}

TEST_CASE("two-user response separates desired signal from interference") {
  CMat y(2, 2);
  y << cxd(1, 0), cxd(1, 0), cxd(0, 0), cxd(2, 0);
  const RVec g = sinr_from_response(y, 1.0);
  REQUIRE(std::abs(g(0) - 0.5) < 1e-15);  // |1|^2 / (|1|^2 + 1)
  REQUIRE(std::abs(g(1) - 4.0) < 1e-15);  // |2|^2 / (0 + 1)

  const AuxComm aux = comm_aux_from_response(y, 1.0);
  REQUIRE(std::abs(aux.eta(0) - 0.5 / 3.0) < 1e-15);
  REQUIRE(std::abs(aux.zeta(1) - cxd(2.0, 0.0)) < 1e-15);
}

TEST_CASE("zero desired stream falls back to zero zeta") {
  CMat y(2, 2);
  y << cxd(0, 0), cxd(1, 0), cxd(0, 0), cxd(2, 0);
  const AuxComm aux = comm_aux_from_response(y, 1.0);
  REQUIRE(aux.gamma(0) == 0.0);
  REQUIRE(aux.zeta(0) == cxd(0.0, 0.0));
  REQUIRE(aux.eta(0) == 0.0);
  REQUIRE(std::isfinite(aux.eta(0)));
}

TEST_CASE("effective rows match the per-user definition") {
  const Instance inst = make_instance(3);
  const CMat t = effective_rows(inst.psi, inst.sc.channels);
  for (int k = 0; k < 2; ++k) {
    const CMat row = inst.sc.channels.users.col(k).adjoint() * inst.psi * inst.sc.channels.feed;
    REQUIRE((t.row(k) - row).norm() < 1e-14);
  }
}

TEST_CASE("fim blocks are hermitian and the assembled matrix is symmetric") {
  const Instance inst = make_instance(4);
  const FimBlocks fb = fim_blocks(inst.sc.bundle, inst.psi, inst.sc.channels.feed, inst.w.cov());
  REQUIRE((fb.f11 - fb.f11.adjoint()).cwiseAbs().maxCoeff() <
          1e-10 * fb.f11.cwiseAbs().maxCoeff());
  REQUIRE((fb.f22 - fb.f22.adjoint()).cwiseAbs().maxCoeff() <
          1e-10 * fb.f22.cwiseAbs().maxCoeff());
  REQUIRE((fb.f33 - fb.f33.adjoint()).cwiseAbs().maxCoeff() <
          1e-10 * fb.f33.cwiseAbs().maxCoeff());

  const RMat f = assemble_fim(fb, inst.sc.cfg.cpi_len, inst.sc.cfg.noise_sense);
  REQUIRE(f.rows() == 8);
  REQUIRE((f - f.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * f.cwiseAbs().maxCoeff());

  Eigen::SelfAdjointEigenSolver<RMat> es(f, Eigen::EigenvaluesOnly);
  REQUIRE(es.eigenvalues().minCoeff() > -1e-8 * es.eigenvalues().maxCoeff());
}

TEST_CASE("fim scales linearly in cpi length and inversely in noise") {
  const Instance inst = make_instance(5);
  const FimBlocks fb = fim_blocks(inst.sc.bundle, inst.psi, inst.sc.channels.feed, inst.w.cov());
  const RMat f1 = assemble_fim(fb, 16, 1e-3);
  const RMat f2 = assemble_fim(fb, 32, 1e-3);
  const RMat f3 = assemble_fim(fb, 16, 2e-3);
  REQUIRE((f2 - 2.0 * f1).cwiseAbs().maxCoeff() < 1e-12 * f1.cwiseAbs().maxCoeff());
  REQUIRE((f3 - 0.5 * f1).cwiseAbs().maxCoeff() < 1e-12 * f1.cwiseAbs().maxCoeff());
}

TEST_CASE("fim matches the numeric-jacobian oracle") {
  for (std::uint64_t seed : {6u, 7u, 8u}) {
    const Instance inst = make_instance(seed);
    const RMat f = assemble_fim(
        fim_blocks(inst.sc.bundle, inst.psi, inst.sc.channels.feed, inst.w.cov()),
        inst.sc.cfg.cpi_len, inst.sc.cfg.noise_sense);
    const RMat fn = selfcheck::fim_numeric(inst.sc.geometry, inst.sc.targets, inst.psi,
                                           inst.sc.channels.feed, inst.w.cov(),
                                           inst.sc.cfg.cpi_len, inst.sc.cfg.noise_sense);
    REQUIRE((f - fn).norm() / fn.norm() < 1e-4);
  }
}

TEST_CASE("fisher state inverts the fim and squares the inverse") {
  const Instance inst = make_instance(9);
  const FisherState fs = fisher_state(inst.sc.bundle, inst.psi, inst.sc.channels.feed,
                                      inst.w.cov(), inst.sc.cfg.cpi_len,
                                      inst.sc.cfg.noise_sense);
  const Eigen::Index n = fs.fim.rows();
  REQUIRE((fs.finv * fs.fim - RMat::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE((fs.j - fs.finv * fs.finv).cwiseAbs().maxCoeff() <=
          1e-12 * fs.j.cwiseAbs().maxCoeff());
  REQUIRE(std::abs(fs.crb_trace - fs.finv.trace()) < 1e-12 * std::abs(fs.crb_trace));
  REQUIRE(fs.crb_trace > 0.0);
  // tr(J F) collapses back to the CRB trace
  REQUIRE(std::abs((fs.j * fs.fim).trace() - fs.crb_trace) < 1e-8 * std::abs(fs.crb_trace));
}

TEST_CASE("degenerate sensing geometry aborts instead of regularizing") {
  ScenarioConfig cfg;
  cfg.n_ris = 4;
  cfg.n_tx = 2;
  cfg.n_sensor = 3;
  cfg.n_users = 2;
  cfg.n_targets = 2;
  cfg.cpi_len = 16;
  cfg.topology = TopologySpec::fully(4);
  cfg.target_angles_deg = {{10.0, -45.0}, {10.0, -45.0}};  // coincident targets
  const Scenario sc = make_scenario(cfg);
  Rng rng(31);
  const CMat psi = project_scattering(rng.cgaussian_matrix(4, 4), cfg.topology);
  Beamformer w;
  w.comm = rng.cgaussian_matrix(2, 2);
  w.sense = rng.cgaussian_matrix(2, 2);
  w = Beamformer::split(project_power(w.full(), cfg.power_budget), 2);

  REQUIRE_THROWS_AS(
      fisher_state(sc.bundle, psi, sc.channels.feed, w.cov(), cfg.cpi_len, cfg.noise_sense),
      numerical_error);

  // an all-zero transmit covariance carries no information at all
  REQUIRE_THROWS_AS(fisher_state(sc.bundle, psi, sc.channels.feed,
                                 CMat::Zero(2, 2), cfg.cpi_len, cfg.noise_sense),
                    numerical_error);
}

TEST_CASE("endpoint weights skip the disabled term entirely") {
  // coincident targets make the FIM singular, so a pure-comm evaluation only
  // succeeds if the sensing path is never touched
  ScenarioConfig cfg;
  cfg.n_ris = 4;
  cfg.n_tx = 2;
  cfg.n_sensor = 3;
  cfg.n_users = 2;
  cfg.n_targets = 2;
  cfg.cpi_len = 16;
  cfg.topology = TopologySpec::fully(4);
  cfg.target_angles_deg = {{10.0, -45.0}, {10.0, -45.0}};
  const Scenario sc = make_scenario(cfg);
  Rng rng(32);
  const CMat psi = project_scattering(rng.cgaussian_matrix(4, 4), cfg.topology);
  Beamformer w;
  w.comm = rng.cgaussian_matrix(2, 2);
  w.sense = rng.cgaussian_matrix(2, 2);
  w = Beamformer::split(project_power(w.full(), cfg.power_budget), 2);

  const PointEval ev = evaluate_point(sc.bundle, sc.channels, psi, w, Weights::pure_comm(),
                                      cfg.cpi_len, cfg.noise_comm, cfg.noise_sense);
  REQUIRE(ev.has_fisher == false);
  REQUIRE(ev.r_nats > 0.0);
  REQUIRE(ev.objective == ev.r_nats);

  // pure sensing with a zero comm block never touches the rate path
  Beamformer ws = w;
  ws.comm.setZero();
  const Instance inst = make_instance(33);
  const PointEval ev2 =
      evaluate_point(inst.sc.bundle, inst.sc.channels, inst.psi, ws, Weights::pure_sense(),
                     inst.sc.cfg.cpi_len, inst.sc.cfg.noise_comm, inst.sc.cfg.noise_sense);
  REQUIRE(ev2.has_fisher);
  REQUIRE(ev2.r_nats == 0.0);
  REQUIRE(ev2.objective == -ev2.fisher.crb_trace);
}

TEST_CASE("internal objective equals the reported normalized objective") {
  const Instance inst = make_instance(34);
  const Normalizers nz{5.0, 0.02};
  const double rho = 0.66;
  const Weights wt = Weights::tradeoff(rho, nz);
  const PointEval ev =
      evaluate_point(inst.sc.bundle, inst.sc.channels, inst.psi, inst.w, wt,
                     inst.sc.cfg.cpi_len, inst.sc.cfg.noise_comm, inst.sc.cfg.noise_sense);
  const double reported = objective_value(ev.r_bits, ev.fisher.crb_trace, rho, nz);
  REQUIRE(std::abs(ev.objective - reported) < 1e-12 * std::max(1.0, std::abs(reported)));
}

TEST_CASE("dbm conversions") {
  REQUIRE(std::abs(dbm_to_watt(0.0) - 1e-3) < 1e-18);
  REQUIRE(std::abs(dbm_to_watt(30.0) - 1.0) < 1e-15);
  REQUIRE(std::abs(db_to_linear(3.0) - std::pow(10.0, 0.3)) < 1e-15);
}
