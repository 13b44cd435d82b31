#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdisac {

using cxd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kLn2 = 0.69314718055994530942;

/// Raised when a run degenerates numerically (singular FIM, zero projection
/// argument). The CLI maps this to exit code 2.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on invalid configuration; maps to exit code 1.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Circuit topology of the scattering network. A group-connected surface is
/// block-diagonal with symmetric-unitary blocks; single/fully connected are
/// the two extreme groupings.
struct TopologySpec {
  std::vector<int> group_sizes;

  static TopologySpec single(int n) { return TopologySpec{std::vector<int>(static_cast<size_t>(n), 1)}; }
  static TopologySpec fully(int n) { return TopologySpec{{n}}; }
  static TopologySpec groups(std::vector<int> sizes) { return TopologySpec{std::move(sizes)}; }
  /// g equal groups of n/g ports each; n must be divisible by g.
  static TopologySpec equal_groups(int n, int g) {
    if (g < 1 || n % g != 0)
      throw config_error("topology: cannot split " + std::to_string(n) + " ports into " +
                         std::to_string(g) + " equal groups");
    return TopologySpec{std::vector<int>(static_cast<size_t>(g), n / g)};
  }

  int total() const { return std::accumulate(group_sizes.begin(), group_sizes.end(), 0); }
  bool is_single() const {
    for (int s : group_sizes)
      if (s != 1) return false;
    return !group_sizes.empty();
  }
  bool is_fully() const { return group_sizes.size() == 1; }

  std::string label() const {
    if (is_single()) return "single";
    if (is_fully()) return "fully";
    std::string out = "group:";
    for (size_t i = 0; i < group_sizes.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(group_sizes[i]);
    }
    return out;
  }

  void validate(int n_ris) const {
    if (group_sizes.empty()) throw config_error("topology: empty group list");
    for (int s : group_sizes)
      if (s < 1) throw config_error("topology: group sizes must be positive");
    if (total() != n_ris)
      throw config_error("topology: group sizes sum to " + std::to_string(total()) +
                         ", expected n_ris=" + std::to_string(n_ris));
  }
};

/// All physical and algorithmic scalars of one scenario. Power and noise are
/// configured in dBm and converted to Watts exactly once (at load; the *_dbm
/// fields are kept for reporting only). Angles cross the config boundary in
/// degrees and are radians everywhere else.
struct ScenarioConfig {
  int n_tx = 4;       // active feed antennas
  int n_ris = 32;     // scattering elements
  int n_sensor = 6;   // sensor elements at the surface
  int n_users = 4;
  int n_targets = 2;
  int cpi_len = 128;  // samples per coherent processing interval

  double power_dbm = 6.0;
  double noise_comm_dbm = 0.0;
  double noise_sense_dbm = 0.0;
  double power_budget = dbm_to_watt(6.0);   // Watts
  double noise_comm = dbm_to_watt(0.0);     // Watts
  double noise_sense = dbm_to_watt(0.0);    // Watts

  double weight_rho = 0.8;                  // in (0,1)
  double carrier_ghz = 30.0;
  TopologySpec topology = TopologySpec::fully(32);

  double feed_offset_wl = 10.0;             // feed array offset, wavelengths
  double power_eff = 1.0;
  double gain_active_db = 3.0;
  double gain_passive_db = 3.0;

  std::uint64_t rng_seed = 1;

  // azimuth/elevation per target, degrees; first n_targets entries are used
  std::vector<std::array<double, 2>> target_angles_deg = {{-30.0, 15.0}, {10.0, -45.0}, {-60.0, -75.0}};

  bool random_psi_init = false;  // skip the matched-direction seed, start from a random feasible point

  double wavelength() const { return kSpeedOfLight / (carrier_ghz * 1e9); }

  void sync_watts() {
    power_budget = dbm_to_watt(power_dbm);
    noise_comm = dbm_to_watt(noise_comm_dbm);
    noise_sense = dbm_to_watt(noise_sense_dbm);
  }

  void validate() const {
    if (n_tx < 1) throw config_error("scenario.n_tx must be a positive integer");
    if (n_ris < 1) throw config_error("scenario.n_ris must be a positive integer");
    if (n_sensor < 1) throw config_error("scenario.n_sensor must be a positive integer");
    if (n_users < 1) throw config_error("scenario.n_users must be a positive integer");
    if (n_targets < 1) throw config_error("scenario.n_targets must be a positive integer");
    if (cpi_len < 1) throw config_error("scenario.cpi_len must be >= 1");
    if (!(power_budget > 0.0)) throw config_error("scenario.power_dbm: power budget must be positive");
    if (!(noise_comm > 0.0)) throw config_error("scenario.noise_comm_dbm: noise power must be positive");
    if (!(noise_sense > 0.0)) throw config_error("scenario.noise_sense_dbm: noise power must be positive");
    if (!(weight_rho > 0.0 && weight_rho < 1.0))
      throw config_error("scenario.weight_rho must lie strictly in (0,1)");
    if (!(carrier_ghz > 0.0)) throw config_error("scenario.carrier_ghz must be positive");
    if (!(feed_offset_wl > 0.0)) throw config_error("scenario.feed_offset_wl must be positive");
    if (!(power_eff > 0.0)) throw config_error("scenario.power_eff must be positive");
    topology.validate(n_ris);
    if (static_cast<size_t>(n_targets) > target_angles_deg.size())
      throw config_error("scenario.n_targets exceeds the number of configured target angles (" +
                         std::to_string(target_angles_deg.size()) + ")");
    for (const auto& ae : target_angles_deg) {
      if (!(ae[0] > -90.0 && ae[0] < 90.0 && ae[1] > -90.0 && ae[1] < 90.0))
        throw config_error("scenario.target_angles_deg entries must lie in (-90,90) degrees");
    }
  }
};

/// Stopping rules shared by the alternating loop and both inner solvers.
struct SolverSettings {
  double outer_tol = 1e-3;   // absolute |delta objective| across outer iterations
  double inner_tol = 1e-5;   // relative |delta objective| inside a subproblem
  int max_outer = 200;
  int max_inner = 100;
  double mu_multiplier = 1.0;  // >= 1, scales the eigenvalue lift

  void validate() const {
    if (!(outer_tol > 0.0)) throw config_error("solver.outer_tol must be positive");
    if (!(inner_tol > 0.0)) throw config_error("solver.inner_tol must be positive");
    if (max_outer < 1) throw config_error("solver.max_outer must be >= 1");
    if (max_inner < 1) throw config_error("solver.max_inner must be >= 1");
    if (!(mu_multiplier >= 1.0)) throw config_error("solver.mu_multiplier must be >= 1");
  }
};

}  // namespace bdisac
