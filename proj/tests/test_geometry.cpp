#include "bdisac/geometry.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace bdisac;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.n_ris = 8;
  cfg.n_tx = 2;
  cfg.n_sensor = 3;
  cfg.n_users = 2;
  cfg.n_targets = 2;
  cfg.topology = TopologySpec::fully(8);
  return cfg;
}

}  // namespace

TEST_CASE("upa factorization picks the most square grid") {
  REQUIRE(upa_factor(32) == std::pair<int, int>{4, 8});
  REQUIRE(upa_factor(8) == std::pair<int, int>{2, 4});
  REQUIRE(upa_factor(4) == std::pair<int, int>{2, 2});
  REQUIRE(upa_factor(16) == std::pair<int, int>{4, 4});
  REQUIRE(upa_factor(7) == std::pair<int, int>{1, 7});
  REQUIRE(upa_factor(1) == std::pair<int, int>{1, 1});
}

TEST_CASE("surface grid is centered with half-wavelength spacing") {
  const ScenarioConfig cfg = small_config();
  const ArrayGeometry g = build_geometry(cfg);
  const double d = 0.5 * cfg.wavelength();

  REQUIRE(g.ris_y.size() == 8);
  REQUIRE(std::abs(g.ris_y.mean()) < 1e-18);
  REQUIRE(std::abs(g.ris_z.mean()) < 1e-18);
  // 2 x 4 grid: columns along y, rows along z, row-major element order
  REQUIRE(std::abs(g.ris_y(0) - (-1.5 * d)) < 1e-15);
  REQUIRE(std::abs(g.ris_y(3) - (1.5 * d)) < 1e-15);
  REQUIRE(std::abs(g.ris_y(4) - (-1.5 * d)) < 1e-15);
  REQUIRE(std::abs(g.ris_z(0) - (-0.5 * d)) < 1e-15);
  REQUIRE(std::abs(g.ris_z(4) - (0.5 * d)) < 1e-15);

  REQUIRE(g.sensor_y.size() == 3);
  REQUIRE(std::abs(g.sensor_y(1)) < 1e-18);
  REQUIRE(std::abs(g.sensor_y(2) - g.sensor_y(1) - d) < 1e-15);

  // feed line sits broadside at the configured offset, vertically centered
  for (int t = 0; t < cfg.n_tx; ++t) {
    REQUIRE(std::abs(g.feed_pos(t, 0) - cfg.feed_offset_wl * g.wavelength) < 1e-12);
    REQUIRE(std::abs(g.feed_pos(t, 2)) < 1e-18);
  }
  REQUIRE(std::abs(g.feed_pos(0, 1) + g.feed_pos(1, 1)) < 1e-18);
}

TEST_CASE("steering phase at broadside and at the y endfire reference") {
  ArrayGeometry g;
  g.wavelength = 0.01;
  g.ris_y.resize(1);
  g.ris_z.resize(1);
  g.sensor_y.resize(1);
  g.ris_y(0) = 0.5 * g.wavelength;  // single element half a wavelength up the y axis
  g.ris_z(0) = 0.0;
  g.sensor_y(0) = 0.0;

  const CVec broadside = steering_surface(g, 0.0, 0.0);
  REQUIRE(std::abs(broadside(0) - cxd(1.0, 0.0)) < 1e-15);

  // theta = 90 deg: phase -2pi/lambda * lambda/2 = -pi, so the entry is -1
  const CVec endfire = steering_surface(g, kPi / 2.0, 0.0);
  REQUIRE(std::abs(endfire(0) - cxd(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("steering vectors are unit modulus and derivatives match finite differences") {
  const ScenarioConfig cfg = small_config();
  const ArrayGeometry g = build_geometry(cfg);
  Rng rng(5);

  TargetParams tp;
  tp.azimuth.resize(2);
  tp.elevation.resize(2);
  tp.coeff = sample_reflection_coeffs(2, rng);
  tp.azimuth << deg_to_rad(-30.0), deg_to_rad(42.0);
  tp.elevation << deg_to_rad(15.0), deg_to_rad(-61.0);

  const SteeringBundle sb = steering(g, tp);
  for (int t = 0; t < 2; ++t) {
    for (int i = 0; i < cfg.n_ris; ++i) REQUIRE(std::abs(std::abs(sb.a(i, t)) - 1.0) < 1e-14);
    for (int i = 0; i < cfg.n_sensor; ++i) REQUIRE(std::abs(std::abs(sb.b(i, t)) - 1.0) < 1e-14);
    // derivative of a unit-modulus phase ramp is the ramp times an imaginary factor
    for (int i = 0; i < cfg.n_ris; ++i) {
      const cxd ratio = sb.da_theta(i, t) / sb.a(i, t);
      REQUIRE(std::abs(ratio.real()) < 1e-14);
    }
  }

  const double eps = 1e-7;
  for (int t = 0; t < 2; ++t) {
    TargetParams tp_p = tp, tp_m = tp;
    tp_p.azimuth(t) += eps;
    tp_m.azimuth(t) -= eps;
    const CMat fd_a =
        (steering(g, tp_p).a.col(t) - steering(g, tp_m).a.col(t)) / (2.0 * eps);
    REQUIRE((fd_a - sb.da_theta.col(t)).norm() / sb.da_theta.col(t).norm() < 1e-7);
    const CMat fd_b =
        (steering(g, tp_p).b.col(t) - steering(g, tp_m).b.col(t)) / (2.0 * eps);
    REQUIRE((fd_b - sb.db_theta.col(t)).norm() / (sb.db_theta.col(t).norm() + 1e-30) < 1e-6);

    tp_p = tp;
    tp_m = tp;
    tp_p.elevation(t) += eps;
    tp_m.elevation(t) -= eps;
    const CMat fd_ap =
        (steering(g, tp_p).a.col(t) - steering(g, tp_m).a.col(t)) / (2.0 * eps);
    REQUIRE((fd_ap - sb.da_phi.col(t)).norm() / sb.da_phi.col(t).norm() < 1e-7);
    const CMat fd_bp =
        (steering(g, tp_p).b.col(t) - steering(g, tp_m).b.col(t)) / (2.0 * eps);
    REQUIRE((fd_bp - sb.db_phi.col(t)).norm() / (sb.db_phi.col(t).norm() + 1e-30) < 1e-6);
  }

  REQUIRE(sb.u(0, 0) == tp.coeff(0));
  REQUIRE(sb.u(0, 1) == cxd(0.0, 0.0));
}

TEST_CASE("feed channel entry reduces to 1/(4 pi) at unit-wavelength distance") {
  ScenarioConfig cfg = small_config();
  cfg.n_ris = 1;
  cfg.n_tx = 1;
  cfg.topology = TopologySpec::fully(1);
  cfg.feed_offset_wl = 1.0;
  cfg.gain_active_db = 0.0;
  cfg.gain_passive_db = 0.0;
  cfg.power_eff = 1.0;

  const ArrayGeometry g = build_geometry(cfg);
  const CMat h = feed_channel(cfg, g);
  REQUIRE(h.rows() == 1);
  REQUIRE(std::abs(h(0, 0) - cxd(1.0 / (4.0 * kPi), 0.0)) < 1e-12);
}

TEST_CASE("feed channel decays with distance and scales with the gain product") {
  ScenarioConfig cfg = small_config();
  const ArrayGeometry g = build_geometry(cfg);
  const CMat h1 = feed_channel(cfg, g);

  ScenarioConfig cfg2 = cfg;
  cfg2.feed_offset_wl = 20.0;
  const CMat h2 = feed_channel(cfg2, build_geometry(cfg2));
  REQUIRE(h2.cwiseAbs().maxCoeff() < h1.cwiseAbs().minCoeff());

  ScenarioConfig cfg3 = cfg;
  cfg3.gain_active_db = 6.0;
  const CMat h3 = feed_channel(cfg3, g);
  const double ratio = std::abs(h3(0, 0)) / std::abs(h1(0, 0));
  REQUIRE(std::abs(ratio - std::sqrt(db_to_linear(3.0))) < 1e-12);
}

TEST_CASE("reflection coefficient map hits the frozen midpoint value") {
  const cxd a = alpha_from_uniform(0.5);
  REQUIRE(std::abs(a - cxd(-1.1, 0.0)) < 1e-12);
  REQUIRE(std::abs(alpha_from_uniform(0.0) - cxd(1.0, 0.0)) < 1e-15);

  Rng rng(17);
  const CVec draws = sample_reflection_coeffs(2000, rng);
  for (int i = 0; i < draws.size(); ++i) {
    REQUIRE(std::abs(draws(i)) >= 1.0 - 1e-12);
    REQUIRE(std::abs(draws(i)) <= 1.2 + 1e-12);
  }
}

TEST_CASE("user channels are unit-variance circular Gaussian and seed-stable") {
  ScenarioConfig cfg = small_config();
  cfg.n_ris = 64;
  cfg.n_users = 40;
  cfg.topology = TopologySpec::fully(64);

  Rng rng_a(123), rng_b(123), rng_c(124);
  const CMat h = sample_user_channels(cfg, rng_a);
  const CMat h_same = sample_user_channels(cfg, rng_b);
  const CMat h_other = sample_user_channels(cfg, rng_c);
  REQUIRE((h - h_same).norm() == 0.0);
  REQUIRE((h - h_other).norm() > 0.0);

  const double n = static_cast<double>(h.size());
  const cxd mean = h.sum() / n;
  const double var = h.squaredNorm() / n;
  REQUIRE(std::abs(mean) < 0.03);
  REQUIRE(std::abs(var - 1.0) < 0.03);

  double re2 = 0.0, im2 = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      re2 += h(i, j).real() * h(i, j).real();
      im2 += h(i, j).imag() * h(i, j).imag();
    }
  REQUIRE(std::abs(re2 / n - 0.5) < 0.03);  // circular symmetry splits power evenly
  REQUIRE(std::abs(im2 / n - 0.5) < 0.03);
}

TEST_CASE("target construction converts degrees and validates count") {
  ScenarioConfig cfg = small_config();
  cfg.n_targets = 3;
  Rng rng(9);
  const TargetParams tp = make_targets(cfg, rng);
  REQUIRE(tp.azimuth.size() == 3);
  REQUIRE(std::abs(tp.azimuth(0) - deg_to_rad(-30.0)) < 1e-15);
  REQUIRE(std::abs(tp.elevation(1) - deg_to_rad(-45.0)) < 1e-15);
  REQUIRE(std::abs(tp.elevation(2) - deg_to_rad(-75.0)) < 1e-15);

  cfg.n_targets = 4;
  REQUIRE_THROWS_AS(cfg.validate(), config_error);
}
