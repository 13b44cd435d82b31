#include "bdisac/bdisac.hpp"
#include "bdisac/selfcheck.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& format, int workers, std::uint64_t seed_offset, bool timing) {
  const bdisac::RunSpec spec = bdisac::load_config(config_path);
  bdisac::SweepOptions opt;
  opt.workers = workers;
  opt.seed_offset = seed_offset;
  opt.timing = timing;
  const std::vector<bdisac::ResultRow> rows = bdisac::run_sweep(spec, opt);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw bdisac::config_error("cannot open output file '" + out_path + "'");
    os = &file;
  }
  if (format == "csv")
    bdisac::emit_csv(rows, *os);
  else
    bdisac::emit_jsonl(rows, *os);
  os->flush();
  return kExitOk;
}

/// One row per channel realization in the sweep. The tradeoff weight never
/// enters the endpoint problems, so rho values share a realization and only
/// (seed, topology) pairs are listed.
int cmd_normalize(const std::string& config_path) {
  const bdisac::RunSpec spec = bdisac::load_config(config_path);
  std::cout << "seed,topology,v_comm_bits,v_sense\n";
  for (std::uint64_t seed : spec.sweep.seeds) {
    for (const std::string& topo : spec.sweep.topologies) {
      bdisac::ScenarioConfig cfg = spec.scenario;
      cfg.rng_seed = seed;
      cfg.topology = bdisac::parse_topology(topo, cfg.n_ris);
      cfg.validate();
      const bdisac::Normalizers nz =
          bdisac::compute_normalizers(bdisac::make_scenario(cfg), spec.solver);
      std::cout << seed << ',' << bdisac::detail::csv_field(cfg.topology.label()) << ','
                << bdisac::format_double(nz.vc_bits) << ',' << bdisac::format_double(nz.vs)
                << "\n";
    }
  }
  std::cout.flush();
  return kExitOk;
}

struct CheckReport {
  int failures = 0;
  void line(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s  %s (%s)\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    if (!pass) ++failures;
  }
};

/// Invariant and oracle spot checks on a small instance; exercised by the
/// `check` subcommand and kept cheap enough for a few seconds of runtime.
int cmd_check() {
  using namespace bdisac;
  CheckReport rep;
  char detail[160];

  ScenarioConfig cfg;
  cfg.n_ris = 4;
  cfg.n_tx = 2;
  cfg.n_sensor = 3;
  cfg.n_users = 2;
  cfg.n_targets = 2;
  cfg.cpi_len = 16;
  cfg.topology = TopologySpec::fully(4);
  cfg.rng_seed = 7;
  const Scenario sc = make_scenario(cfg);

  {
    double worst = 0.0;
    for (int t = 0; t < cfg.n_targets; ++t)
      for (int i = 0; i < cfg.n_ris; ++i)
        worst = std::max(worst, std::abs(std::abs(sc.bundle.a(i, t)) - 1.0));
    std::snprintf(detail, sizeof(detail), "max modulus error %.2e", worst);
    rep.line("steering vectors are unit modulus", worst < 1e-12, detail);
  }

  Rng rng(99);
  const CMat psi = project_scattering(rng.cgaussian_matrix(4, 4), cfg.topology);
  Beamformer w;
  w.comm = rng.cgaussian_matrix(2, 2);
  w.sense = rng.cgaussian_matrix(2, 2);
  w = Beamformer::split(project_power(w.full(), cfg.power_budget), cfg.n_users);

  {
    const RMat f = assemble_fim(fim_blocks(sc.bundle, psi, sc.channels.feed, w.cov()),
                                cfg.cpi_len, cfg.noise_sense);
    const RMat fn = selfcheck::fim_numeric(sc.geometry, sc.targets, psi, sc.channels.feed,
                                           w.cov(), cfg.cpi_len, cfg.noise_sense);
    const double rel = (f - fn).norm() / fn.norm();
    std::snprintf(detail, sizeof(detail), "relative error %.2e", rel);
    rep.line("FIM matches numeric-Jacobian oracle", rel < 1e-4, detail);
  }

  {
    const FisherState fs =
        fisher_state(sc.bundle, psi, sc.channels.feed, w.cov(), cfg.cpi_len, cfg.noise_sense);
    const CMat sig = sigma_kernel(sc.bundle, fs.j, cfg.cpi_len, cfg.noise_sense);
    const CMat c = sc.channels.feed * w.cov() * sc.channels.feed.adjoint();
    const double lhs = (psi * c * psi.adjoint() * sig).trace().real();
    const double rhs = (fs.j * fs.fim).trace();
    const double rel = std::abs(lhs - rhs) / std::abs(rhs);
    std::snprintf(detail, sizeof(detail), "relative mismatch %.2e", rel);
    rep.line("sensing kernel identity", rel < 1e-8, detail);
  }

  {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const CMat q = rng.cgaussian_matrix(4, 4);
      worst = std::max(worst, scattering_residual(symuni(q), TopologySpec::fully(4)));
    }
    std::snprintf(detail, sizeof(detail), "max residual %.2e", worst);
    rep.line("symmetric-unitary projection residuals", worst < 1e-10, detail);
  }

  {
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const cxd s0 = rng.cgaussian(), s = rng.cgaussian();
      const double n0 = 0.1 + rng.uniform(), n = 0.1 + rng.uniform();
      worst = std::max(worst, selfcheck::rate_bound_gap(s0, n0, s, n));
      worst = std::max(worst, selfcheck::trace_bound_gap(selfcheck::random_spd(4, rng),
                                                         selfcheck::random_spd(4, rng)));
      worst = std::max(
          worst, selfcheck::quad_bound_gap(rng.cgaussian_matrix(3, 3), rng.cgaussian_matrix(3, 3),
                                           selfcheck::random_psd(3, rng),
                                           selfcheck::random_psd(3, rng)));
    }
    std::snprintf(detail, sizeof(detail), "max violation %.2e", worst);
    rep.line("surrogate bounds hold at random points", worst <= 1e-10, detail);
  }

  {
    SolverSettings st;
    st.max_outer = 30;
    const RunResult res = run(sc, st);
    double worst = -1e300;
    double prev = -1e300;
    for (const OuterRecord& r : res.trace) {
      worst = std::max(worst, prev - r.objective_after_psi);
      worst = std::max(worst, r.objective_after_psi - r.objective_after_w);
      prev = r.objective_after_w;
    }
    const double res_psi = scattering_residual(res.psi, cfg.topology);
    const double res_pow = std::abs(res.w.power() - cfg.power_budget) / cfg.power_budget;
    std::snprintf(detail, sizeof(detail),
                  "max objective drop %.2e, feasibility %.2e / %.2e, %d outer iters", worst,
                  res_psi, res_pow, res.outer_iterations);
    rep.line("alternating loop ascends and stays feasible",
             worst <= 1e-8 && res_psi < 1e-10 && res_pow < 1e-12, detail);
  }

  if (rep.failures) {
    std::printf("%d check(s) failed\n", rep.failures);
    return kExitNumerical;
  }
  std::printf("all checks passed\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BD-RIS transmitter joint communication/sensing designer"};
  app.require_subcommand(1);

  std::string config_path, out_path, format = "csv";
  int workers = 1;
  std::uint64_t seed_offset = 0;
  bool timing = false;

  CLI::App* run_cmd = app.add_subcommand("run", "run the configured sweep and emit result rows");
  run_cmd->add_option("--config", config_path, "JSON config file")->required();
  run_cmd->add_option("--out", out_path, "output path (default: stdout)");
  run_cmd->add_option("--format", format, "output format")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  run_cmd->add_option("--workers", workers, "worker threads")
      ->check(CLI::Range(1, std::numeric_limits<int>::max()));
  run_cmd->add_option("--seed-offset", seed_offset, "added to every sweep seed");
  run_cmd->add_flag("--timing", timing, "report real wall-clock times (breaks byte determinism)");

  CLI::App* norm_cmd = app.add_subcommand(
      "normalize", "print per-realization normalization constants V_c and V_s as CSV");
  norm_cmd->add_option("--config", config_path, "JSON config file")->required();

  CLI::App* check_cmd =
      app.add_subcommand("check", "run oracle and invariant self-tests on a small instance");

  try {
    app.parse(argc, argv);
    if (run_cmd->parsed())
      return cmd_run(config_path, out_path, format, workers, seed_offset, timing);
    if (norm_cmd->parsed()) return cmd_normalize(config_path);
    if (check_cmd->parsed()) return cmd_check();
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  } catch (const bdisac::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bdisac::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
