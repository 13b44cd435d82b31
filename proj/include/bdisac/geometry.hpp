#pragma once

#include "bdisac/rng.hpp"
#include "bdisac/types.hpp"

namespace bdisac {

/// Element positions for the scattering surface (uniform planar array in the
/// y-z plane), the sensor line array (along y) and the feed line array
/// (along y at x = feed_offset wavelengths). All coordinates in meters,
/// arrays centered on the origin of their own axis.
struct ArrayGeometry {
  RVec ris_y, ris_z;  // n_ris
  RVec sensor_y;      // n_sensor
  RMat feed_pos;      // n_tx x 3
  double wavelength = 0.0;
};

/// Target parameters: azimuth/elevation in radians plus the complex
/// reflection coefficient of each target.
struct TargetParams {
  RVec azimuth;    // n_targets
  RVec elevation;  // n_targets
  CVec coeff;      // n_targets
};

/// Steering matrices of the current target set together with their angle
/// derivatives, plus U = diag(coeff). Columns index targets.
struct SteeringBundle {
  CMat a;         // surface side, n_ris x q
  CMat b;         // sensor side, n_sensor x q
  CMat da_theta, da_phi;
  CMat db_theta, db_phi;
  CMat u;         // q x q diagonal
};

/// Static channels of one realization: the feed-to-surface matrix and the
/// user downlink channels seen at the surface.
struct ChannelSet {
  CMat feed;   // n_ris x n_tx
  CMat users;  // n_ris x n_users
};

/// Factor n into rows x cols with rows <= cols and rows as large as possible
/// (8 -> 2x4, 32 -> 4x8, primes degenerate to 1xn).
inline std::pair<int, int> upa_factor(int n) {
  int rows = 1;
  for (int r = 1; r * r <= n; ++r)
    if (n % r == 0) rows = r;
  return {rows, n / rows};
}

/// Centered coordinates k*spacing - (count-1)*spacing/2 for k = 0..count-1.
inline RVec centered_line(int count, double spacing) {
  RVec x(count);
  for (int k = 0; k < count; ++k) x(k) = (k - 0.5 * (count - 1)) * spacing;
  return x;
}

inline ArrayGeometry build_geometry(const ScenarioConfig& cfg) {
  ArrayGeometry g;
  g.wavelength = cfg.wavelength();
  const double d = 0.5 * g.wavelength;

  auto [rows, cols] = upa_factor(cfg.n_ris);
  RVec ys = centered_line(cols, d);
  RVec zs = centered_line(rows, d);
  g.ris_y.resize(cfg.n_ris);
  g.ris_z.resize(cfg.n_ris);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      g.ris_y(r * cols + c) = ys(c);
      g.ris_z(r * cols + c) = zs(r);
    }

  g.sensor_y = centered_line(cfg.n_sensor, d);

  RVec fy = centered_line(cfg.n_tx, d);
  g.feed_pos.resize(cfg.n_tx, 3);
  for (int t = 0; t < cfg.n_tx; ++t) {
    g.feed_pos(t, 0) = cfg.feed_offset_wl * g.wavelength;
    g.feed_pos(t, 1) = fy(t);
    g.feed_pos(t, 2) = 0.0;
  }
  return g;
}

/// Surface steering vector for azimuth theta, elevation phi:
/// exp(-j 2pi/lambda (y sin(theta)cos(phi) + z sin(phi))) per element.
inline CVec steering_surface(const ArrayGeometry& g, double theta, double phi) {
  const double k = 2.0 * kPi / g.wavelength;
  const double sy = std::sin(theta) * std::cos(phi);
  const double sz = std::sin(phi);
  CVec a(g.ris_y.size());
  for (Eigen::Index n = 0; n < a.size(); ++n)
    a(n) = std::polar(1.0, -k * (g.ris_y(n) * sy + g.ris_z(n) * sz));
  return a;
}

/// Sensor steering vector (line array along y, no z extent).
inline CVec steering_sensor(const ArrayGeometry& g, double theta, double phi) {
  const double k = 2.0 * kPi / g.wavelength;
  const double sy = std::sin(theta) * std::cos(phi);
  CVec b(g.sensor_y.size());
  for (Eigen::Index n = 0; n < b.size(); ++n) b(n) = std::polar(1.0, -k * g.sensor_y(n) * sy);
  return b;
}

/// Steering matrices and closed-form angle derivatives for all targets. The
/// phase of element n is psi_n(theta,phi) = -k (y_n sin(theta)cos(phi) +
/// z_n sin(phi)), so d a_n/d theta = a_n * (-j k y_n cos(theta)cos(phi)) and
/// d a_n/d phi = a_n * (-j k (-y_n sin(theta)sin(phi) + z_n cos(phi))).
inline SteeringBundle steering(const ArrayGeometry& g, const TargetParams& tp) {
  const int q = static_cast<int>(tp.azimuth.size());
  const int ni = static_cast<int>(g.ris_y.size());
  const int ns = static_cast<int>(g.sensor_y.size());
  const double k = 2.0 * kPi / g.wavelength;

  SteeringBundle sb;
  sb.a.resize(ni, q);
  sb.da_theta.resize(ni, q);
  sb.da_phi.resize(ni, q);
  sb.b.resize(ns, q);
  sb.db_theta.resize(ns, q);
  sb.db_phi.resize(ns, q);
  sb.u = CMat::Zero(q, q);

  for (int t = 0; t < q; ++t) {
    const double th = tp.azimuth(t), ph = tp.elevation(t);
    sb.a.col(t) = steering_surface(g, th, ph);
    sb.b.col(t) = steering_sensor(g, th, ph);
    const cxd jk(0.0, -k);
    for (int n = 0; n < ni; ++n) {
      const double dth = g.ris_y(n) * std::cos(th) * std::cos(ph);
      const double dph = -g.ris_y(n) * std::sin(th) * std::sin(ph) + g.ris_z(n) * std::cos(ph);
      sb.da_theta(n, t) = sb.a(n, t) * jk * dth;
      sb.da_phi(n, t) = sb.a(n, t) * jk * dph;
    }
    for (int n = 0; n < ns; ++n) {
      sb.db_theta(n, t) = sb.b(n, t) * jk * g.sensor_y(n) * std::cos(th) * std::cos(ph);
      sb.db_phi(n, t) = sb.b(n, t) * jk * (-g.sensor_y(n) * std::sin(th) * std::sin(ph));
    }
    sb.u(t, t) = tp.coeff(t);
  }
  return sb;
}

/// Deterministic near-field feed channel. Entry (i,j) couples feed antenna j
/// to surface element i over the free-space link of length d_ij:
///   lambda * sqrt(eff * g_a * g_p) / (4 pi d_ij) * exp(-j 2 pi d_ij / lambda).
inline CMat feed_channel(const ScenarioConfig& cfg, const ArrayGeometry& g) {
  const double lam = g.wavelength;
  const double amp_gain = std::sqrt(cfg.power_eff * db_to_linear(cfg.gain_active_db) *
                                    db_to_linear(cfg.gain_passive_db));
  CMat h(cfg.n_ris, cfg.n_tx);
  for (int i = 0; i < cfg.n_ris; ++i)
    for (int j = 0; j < cfg.n_tx; ++j) {
      const double dx = g.feed_pos(j, 0);
      const double dy = g.feed_pos(j, 1) - g.ris_y(i);
      const double dz = g.feed_pos(j, 2) - g.ris_z(i);
      const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
      h(i, j) = lam * amp_gain / (4.0 * kPi * dist) * std::polar(1.0, -2.0 * kPi * dist / lam);
    }
  return h;
}

/// i.i.d. CN(0,1) user channels, one column per user.
inline CMat sample_user_channels(const ScenarioConfig& cfg, Rng& rng) {
  return rng.cgaussian_matrix(cfg.n_ris, cfg.n_users);
}

/// Reflection coefficient map (1 + 0.2 n) exp(j 2 pi n) for n in [0,1).
inline cxd alpha_from_uniform(double n) { return (1.0 + 0.2 * n) * std::polar(1.0, 2.0 * kPi * n); }

/// One independent uniform draw per target through alpha_from_uniform.
inline CVec sample_reflection_coeffs(int n_targets, Rng& rng) {
  CVec alpha(n_targets);
  for (int t = 0; t < n_targets; ++t) alpha(t) = alpha_from_uniform(rng.uniform());
  return alpha;
}

inline TargetParams make_targets(const ScenarioConfig& cfg, Rng& rng) {
  TargetParams tp;
  tp.azimuth.resize(cfg.n_targets);
  tp.elevation.resize(cfg.n_targets);
  for (int t = 0; t < cfg.n_targets; ++t) {
    tp.azimuth(t) = deg_to_rad(cfg.target_angles_deg[static_cast<size_t>(t)][0]);
    tp.elevation(t) = deg_to_rad(cfg.target_angles_deg[static_cast<size_t>(t)][1]);
  }
  tp.coeff = sample_reflection_coeffs(cfg.n_targets, rng);
  return tp;
}

}  // namespace bdisac
