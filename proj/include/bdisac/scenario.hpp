#pragma once

#include "bdisac/ao_driver.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace bdisac {

using json = nlohmann::json;

/// Monte Carlo sweep: one axis, a list of values, seeds and topologies. The
/// row order is values x seeds x topologies, innermost last.
struct SweepSpec {
  std::string axis = "rho";
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> topologies;

  static const std::vector<std::string>& axes() {
    static const std::vector<std::string> a = {"rho", "power_dbm", "n_ris", "n_sensor",
                                               "n_targets"};
    return a;
  }

  void validate() const {
    const auto& ax = axes();
    if (std::find(ax.begin(), ax.end(), axis) == ax.end())
      throw config_error("sweep.axis: unknown axis '" + axis + "'");
    if (values.empty()) throw config_error("sweep.values must not be empty");
    if (seeds.empty()) throw config_error("sweep.seeds must not be empty");
    if (topologies.empty()) throw config_error("sweep.topologies must not be empty");
    if (axis.rfind("n_", 0) == 0)
      for (double v : values)
        if (v != std::floor(v) || v < 1.0)
          throw config_error("sweep.values: axis " + axis + " takes positive integers");
  }
};

/// A fully resolved run specification: base scenario, solver settings and
/// sweep. Defaults reproduce the reference setup.
struct RunSpec {
  ScenarioConfig scenario;
  SolverSettings solver;
  SweepSpec sweep;
};

inline TopologySpec parse_topology(const std::string& s, int n_ris) {
  if (s == "single") return TopologySpec::single(n_ris);
  if (s == "fully") return TopologySpec::fully(n_ris);
  if (s.rfind("groups:", 0) == 0) {
    int g = 0;
    const char* b = s.data() + 7;
    auto [p, ec] = std::from_chars(b, s.data() + s.size(), g);
    if (ec != std::errc() || p != s.data() + s.size())
      throw config_error("topology: cannot parse group count in '" + s + "'");
    return TopologySpec::equal_groups(n_ris, g);
  }
  if (s.rfind("group:", 0) == 0) {
    std::vector<int> sizes;
    std::stringstream ss(s.substr(6));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        sizes.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw config_error("topology: cannot parse group size '" + tok + "' in '" + s + "'");
      }
    }
    TopologySpec t = TopologySpec::groups(sizes);
    t.validate(n_ris);
    return t;
  }
  throw config_error("topology: expected 'single', 'fully', 'groups:<g>' or 'group:<s1,s2,...>', got '" +
                     s + "'");
}

namespace detail {

inline void reject_unknown_keys(const json& j, const std::string& section,
                                std::initializer_list<const char*> known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw config_error(section + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(section + "." + key + ": wrong value type");
  }
}

}  // namespace detail

inline RunSpec parse_config(const json& root) {
  if (!root.is_object()) throw config_error("config root must be a JSON object");
  detail::reject_unknown_keys(root, "config", {"scenario", "solver", "sweep"});

  RunSpec spec;
  ScenarioConfig& c = spec.scenario;
  std::string topo_str = "fully";

  if (root.contains("scenario")) {
    const json& s = root.at("scenario");
    if (!s.is_object()) throw config_error("scenario must be a JSON object");
    detail::reject_unknown_keys(
        s, "scenario",
        {"n_tx", "n_ris", "n_sensor", "n_users", "n_targets", "cpi_len", "power_dbm",
         "noise_comm_dbm", "noise_sense_dbm", "weight_rho", "carrier_ghz", "topology",
         "feed_offset_wl", "power_eff", "gain_active_db", "gain_passive_db", "rng_seed",
         "target_angles_deg", "random_psi_init"});
    c.n_tx = detail::get_or(s, "n_tx", c.n_tx, "scenario");
    c.n_ris = detail::get_or(s, "n_ris", c.n_ris, "scenario");
    c.n_sensor = detail::get_or(s, "n_sensor", c.n_sensor, "scenario");
    c.n_users = detail::get_or(s, "n_users", c.n_users, "scenario");
    c.n_targets = detail::get_or(s, "n_targets", c.n_targets, "scenario");
    c.cpi_len = detail::get_or(s, "cpi_len", c.cpi_len, "scenario");
    c.power_dbm = detail::get_or(s, "power_dbm", c.power_dbm, "scenario");
    c.noise_comm_dbm = detail::get_or(s, "noise_comm_dbm", c.noise_comm_dbm, "scenario");
    c.noise_sense_dbm = detail::get_or(s, "noise_sense_dbm", c.noise_sense_dbm, "scenario");
    c.weight_rho = detail::get_or(s, "weight_rho", c.weight_rho, "scenario");
    c.carrier_ghz = detail::get_or(s, "carrier_ghz", c.carrier_ghz, "scenario");
    c.feed_offset_wl = detail::get_or(s, "feed_offset_wl", c.feed_offset_wl, "scenario");
    c.power_eff = detail::get_or(s, "power_eff", c.power_eff, "scenario");
    c.gain_active_db = detail::get_or(s, "gain_active_db", c.gain_active_db, "scenario");
    c.gain_passive_db = detail::get_or(s, "gain_passive_db", c.gain_passive_db, "scenario");
    c.rng_seed = detail::get_or(s, "rng_seed", c.rng_seed, "scenario");
    c.random_psi_init = detail::get_or(s, "random_psi_init", c.random_psi_init, "scenario");
    topo_str = detail::get_or<std::string>(s, "topology", topo_str, "scenario");
    if (s.contains("target_angles_deg")) {
      c.target_angles_deg =
          detail::get_or(s, "target_angles_deg", c.target_angles_deg, "scenario");
    }
  }
  c.sync_watts();
  c.topology = parse_topology(topo_str, c.n_ris);

  if (root.contains("solver")) {
    const json& s = root.at("solver");
    if (!s.is_object()) throw config_error("solver must be a JSON object");
    detail::reject_unknown_keys(
        s, "solver", {"outer_tol", "inner_tol", "max_outer", "max_inner", "mu_multiplier"});
    SolverSettings& st = spec.solver;
    st.outer_tol = detail::get_or(s, "outer_tol", st.outer_tol, "solver");
    st.inner_tol = detail::get_or(s, "inner_tol", st.inner_tol, "solver");
    st.max_outer = detail::get_or(s, "max_outer", st.max_outer, "solver");
    st.max_inner = detail::get_or(s, "max_inner", st.max_inner, "solver");
    st.mu_multiplier = detail::get_or(s, "mu_multiplier", st.mu_multiplier, "solver");
  }

  SweepSpec& sw = spec.sweep;
  sw.values = {c.weight_rho};
  sw.seeds = {c.rng_seed};
  sw.topologies = {c.topology.label()};
  if (root.contains("sweep")) {
    const json& s = root.at("sweep");
    if (!s.is_object()) throw config_error("sweep must be a JSON object");
    detail::reject_unknown_keys(s, "sweep", {"axis", "values", "seeds", "topologies"});
    sw.axis = detail::get_or<std::string>(s, "axis", sw.axis, "sweep");
    sw.values = detail::get_or(s, "values", sw.values, "sweep");
    sw.seeds = detail::get_or(s, "seeds", sw.seeds, "sweep");
    sw.topologies = detail::get_or(s, "topologies", sw.topologies, "sweep");
  }

  spec.scenario.validate();
  spec.solver.validate();
  spec.sweep.validate();
  return spec;
}

inline RunSpec load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw config_error("config parse error in '" + path + "': " + e.what());
  }
  return parse_config(root);
}

inline json to_json(const ScenarioConfig& c) {
  json s;
  s["n_tx"] = c.n_tx;
  s["n_ris"] = c.n_ris;
  s["n_sensor"] = c.n_sensor;
  s["n_users"] = c.n_users;
  s["n_targets"] = c.n_targets;
  s["cpi_len"] = c.cpi_len;
  s["power_dbm"] = c.power_dbm;
  s["noise_comm_dbm"] = c.noise_comm_dbm;
  s["noise_sense_dbm"] = c.noise_sense_dbm;
  s["weight_rho"] = c.weight_rho;
  s["carrier_ghz"] = c.carrier_ghz;
  s["topology"] = c.topology.label();
  s["feed_offset_wl"] = c.feed_offset_wl;
  s["power_eff"] = c.power_eff;
  s["gain_active_db"] = c.gain_active_db;
  s["gain_passive_db"] = c.gain_passive_db;
  s["rng_seed"] = c.rng_seed;
  s["target_angles_deg"] = c.target_angles_deg;
  s["random_psi_init"] = c.random_psi_init;
  return s;
}

inline json to_json(const RunSpec& spec) {
  json root;
  root["scenario"] = to_json(spec.scenario);
  root["solver"] = {{"outer_tol", spec.solver.outer_tol},
                    {"inner_tol", spec.solver.inner_tol},
                    {"max_outer", spec.solver.max_outer},
                    {"max_inner", spec.solver.max_inner},
                    {"mu_multiplier", spec.solver.mu_multiplier}};
  root["sweep"] = {{"axis", spec.sweep.axis},
                   {"values", spec.sweep.values},
                   {"seeds", spec.sweep.seeds},
                   {"topologies", spec.sweep.topologies}};
  return root;
}

/// One output row: the resolved per-run scalars plus the converged metrics.
/// status is "ok" for successful rows; failed rows carry the error text and
/// NaN metrics.
struct ResultRow {
  ScenarioConfig cfg;
  double r_sum_bits = std::numeric_limits<double>::quiet_NaN();
  double crb_avg = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  int outer_iters = 0;
  double wall_ms = 0.0;
  bool converged = false;
  std::string status = "ok";
};

inline ScenarioConfig row_config(const RunSpec& spec, double value, std::uint64_t seed,
                                 const std::string& topo) {
  ScenarioConfig c = spec.scenario;
  if (spec.sweep.axis == "rho") {
    c.weight_rho = value;
  } else if (spec.sweep.axis == "power_dbm") {
    c.power_dbm = value;
  } else if (spec.sweep.axis == "n_ris") {
    c.n_ris = static_cast<int>(value);
  } else if (spec.sweep.axis == "n_sensor") {
    c.n_sensor = static_cast<int>(value);
  } else if (spec.sweep.axis == "n_targets") {
    c.n_targets = static_cast<int>(value);
  }
  c.sync_watts();
  c.rng_seed = seed;
  c.topology = parse_topology(topo, c.n_ris);
  c.validate();
  return c;
}

/// Serialized scenario minus the tradeoff weight: normalizers are shared by
/// every rho at fixed realization, topology and solver settings.
inline std::string normalizer_cache_key(const ScenarioConfig& cfg, const SolverSettings& st) {
  ScenarioConfig c = cfg;
  c.weight_rho = 0.5;
  json j = to_json(c);
  j["__solver"] = {st.outer_tol, st.inner_tol, st.max_outer, st.max_inner, st.mu_multiplier};
  return j.dump();
}

/// Concurrent once-per-key normalizer store. The first thread to claim a key
/// computes; the rest wait on the shared future. Exceptions propagate to all
/// waiters.
class NormalizerCache {
 public:
  template <class Factory>
  Normalizers get(const std::string& key, Factory&& make) {
    std::shared_future<Normalizers> fut;
    std::promise<Normalizers> prom;
    bool owner = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it == cache_.end()) {
        fut = prom.get_future().share();
        cache_.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        prom.set_value(make());
      } catch (...) {
        prom.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_future<Normalizers>> cache_;
};

struct SweepOptions {
  int workers = 1;
  std::uint64_t seed_offset = 0;
  bool timing = false;  // when off, wall_ms is reported as 0 so output is byte-stable
};

/// Run the whole sweep. Rows are computed independently (worker threads pull
/// from a shared index) and stored by index, so the output order and content
/// are independent of the worker count.
inline std::vector<ResultRow> run_sweep(const RunSpec& spec, const SweepOptions& opt) {
  struct Cell {
    double value;
    std::uint64_t seed;
    std::string topo;
  };
  std::vector<Cell> cells;
  for (double v : spec.sweep.values)
    for (std::uint64_t s : spec.sweep.seeds)
      for (const std::string& t : spec.sweep.topologies)
        cells.push_back({v, s + opt.seed_offset, t});

  std::vector<ResultRow> rows(cells.size());
  NormalizerCache cache;
  std::atomic<size_t> next{0};

  auto work = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      ResultRow& row = rows[i];
      try {
        row.cfg = row_config(spec, cells[i].value, cells[i].seed, cells[i].topo);
        const Scenario sc = make_scenario(row.cfg);
        const std::string key = normalizer_cache_key(row.cfg, spec.solver);
        const Normalizers nz =
            cache.get(key, [&]() { return compute_normalizers(sc, spec.solver); });
        const RunResult res = run_with_normalizers(sc, spec.solver, nz);
        row.r_sum_bits = res.r_sum_bits;
        row.crb_avg = res.crb_trace / row.cfg.n_targets;
        row.objective = objective_value(res.r_sum_bits, res.crb_trace, row.cfg.weight_rho, nz);
        row.outer_iters = res.outer_iterations;
        row.wall_ms = opt.timing ? res.wall_ms : 0.0;
        row.converged = res.converged;
        row.status = "ok";
      } catch (const std::exception& e) {
        row.cfg = spec.scenario;  // keep something printable in the config columns
        try {
          row.cfg = row_config(spec, cells[i].value, cells[i].seed, cells[i].topo);
        } catch (const std::exception&) {
          row.cfg.rng_seed = cells[i].seed;
        }
        row.status = e.what();
        row.converged = false;
      }
    }
  };

  const int n = std::max(1, std::min(opt.workers, static_cast<int>(cells.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return rows;
}

/// Shortest round-trip decimal form, identical across runs.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "n_tx",        "n_ris",          "n_sensor",       "n_users",       "n_targets",
      "cpi_len",     "power_dbm",      "noise_comm_dbm", "noise_sense_dbm", "weight_rho",
      "carrier_ghz", "feed_offset_wl", "power_eff",      "gain_active_db", "gain_passive_db",
      "seed",        "topology",       "r_sum_bits",     "crb_avg",        "objective",
      "outer_iters", "wall_ms",        "converged",      "status"};
  return cols;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += '"';
  return out;
}

/// Field values in column order; numeric NaN renders as the empty string so
/// both emitters can substitute their own missing marker.
inline std::vector<std::string> row_fields(const ResultRow& r) {
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  const ScenarioConfig& c = r.cfg;
  return {std::to_string(c.n_tx),
          std::to_string(c.n_ris),
          std::to_string(c.n_sensor),
          std::to_string(c.n_users),
          std::to_string(c.n_targets),
          std::to_string(c.cpi_len),
          format_double(c.power_dbm),
          format_double(c.noise_comm_dbm),
          format_double(c.noise_sense_dbm),
          format_double(c.weight_rho),
          format_double(c.carrier_ghz),
          format_double(c.feed_offset_wl),
          format_double(c.power_eff),
          format_double(c.gain_active_db),
          format_double(c.gain_passive_db),
          std::to_string(c.rng_seed),
          c.topology.label(),
          num(r.r_sum_bits),
          num(r.crb_avg),
          num(r.objective),
          std::to_string(r.outer_iters),
          format_double(r.wall_ms),
          r.converged ? "true" : "false",
          r.status};
}

}  // namespace detail

inline void emit_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
  const auto& cols = result_columns();
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) os << ',';
    os << cols[i];
  }
  os << '\n';
  for (const ResultRow& r : rows) {
    const auto f = detail::row_fields(r);
    for (size_t i = 0; i < f.size(); ++i) {
      if (i) os << ',';
      os << detail::csv_field(f[i]);
    }
    os << '\n';
  }
}

inline void emit_jsonl(const std::vector<ResultRow>& rows, std::ostream& os) {
  const auto& cols = result_columns();
  // columns holding quoted string values; everything else prints raw
  auto is_string = [](const std::string& c) { return c == "topology" || c == "status"; };
  auto is_bool = [](const std::string& c) { return c == "converged"; };
  for (const ResultRow& r : rows) {
    const auto f = detail::row_fields(r);
    os << '{';
    for (size_t i = 0; i < cols.size(); ++i) {
      if (i) os << ',';
      os << '"' << cols[i] << "\":";
      if (is_string(cols[i]))
        os << detail::json_string(f[i]);
      else if (is_bool(cols[i]) || !f[i].empty())
        os << f[i];
      else
        os << "null";
    }
    os << "}\n";
  }
}

}  // namespace bdisac
