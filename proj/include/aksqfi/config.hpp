#pragma once

// JSON run configuration. Every section and key is optional; unknown keys are
// rejected so that typos do not silently fall back to defaults.

#include <json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aksqfi/harness.hpp"

namespace aksqfi {

struct DecaySpec {
  int n_qubits = 4;
  double p_phi = 0.12;
  int k_from = 2;  // F_1 = 0 identically, so K = 1 sits off the exponential trend
  int k_max = 8;
};

struct Config {
  GridSpec grid;
  StopConfig stop;
  BootstrapConfig boot;
  SeedSource seed_source = SeedSource::exact_state;
  AblationSpec ablation;
  int calibration_k_max = 16;
  std::optional<std::string> calibration_csv;
  DecaySpec decay;
  nlohmann::json source = nlohmann::json::object();

  void validate() const {
    grid.validate();
    stop.validate();
    boot.validate();
    if (calibration_k_max < 1) throw ConfigError("calibration k_max must be >= 1");
    if (decay.k_from < 1 || decay.k_max < decay.k_from + 2) throw ConfigError("decay needs k_max >= k_from + 2");
    if (decay.n_qubits < 1 || decay.n_qubits > kMaxQubits) throw ConfigError("decay n_qubits must be in [1, 12]");
  }

  /// Stable digest of the effective configuration for CSV metadata.
  std::uint64_t digest() const;
  nlohmann::json effective() const;
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& section, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
  }
}

template <typename T>
void read(const json& obj, const std::string& section, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + section + "." + key + "': " + e.what());
  }
}

}  // namespace config_detail

inline nlohmann::json Config::effective() const {
  using nlohmann::json;
  json rules = json::array();
  for (StopRule r : grid.rules) rules.push_back(to_string(r));
  json g = {{"n_qubits", grid.n_qubits}, {"p_phi", grid.p_phi_list}, {"p_dep", grid.p_dep},
            {"alpha", grid.alpha},        {"replicates", grid.replicates}, {"rules", rules},
            {"base_seed", grid.base_seed}};
  if (grid.epsilon_rel) g["epsilon_rel"] = *grid.epsilon_rel;
  json s = {{"epsilon", stop.epsilon},   {"delta", stop.delta},       {"k_min_stop", stop.k_min_stop},
            {"m_min_stop", stop.m_min_stop}, {"patience", stop.patience}, {"k_max", stop.k_max},
            {"m_max", stop.m_max},       {"k0", stop.k0},             {"m0", stop.m0},
            {"rule", to_string(stop.rule)}, {"fixed_k", stop.fixed_k}, {"j_max", stop.j_max},
            {"spending", to_string(stop.spending)}, {"m_conf", stop.m_conf}, {"m_schedule", stop.m_schedule}};
  json b = {{"replicates", boot.replicates}, {"level", boot.level}, {"seed", boot.seed}};
  json a = {{"p_phi", ablation.p_phi}, {"k_min", ablation.k_min_set}, {"m_min", ablation.m_min_set},
            {"patience", ablation.patience_set}};
  json c = {{"k_max", calibration_k_max}};
  if (calibration_csv) c["csv"] = *calibration_csv;
  json d = {{"n_qubits", decay.n_qubits}, {"p_phi", decay.p_phi}, {"k_from", decay.k_from}, {"k_max", decay.k_max}};
  return json{{"grid", g},        {"stop", s},        {"bootstrap", b}, {"estimator", {{"seed_source", to_string(seed_source)}}},
              {"ablation", a},    {"calibration", c}, {"decay", d}};
}

inline std::uint64_t Config::digest() const {
  const std::string text = effective().dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline Config config_from_json(const nlohmann::json& j) {
  using config_detail::check_keys;
  using config_detail::read;
  Config c;
  c.source = j;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "root", {"grid", "stop", "bootstrap", "estimator", "ablation", "calibration", "decay", "comment"});

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid", {"n_qubits", "p_phi", "p_dep", "alpha", "replicates", "rules", "epsilon_rel", "base_seed",
                           "calibration_k_max"});
    if (g.contains("n_qubits")) {
      if (g.at("n_qubits").is_number_integer()) {
        c.grid.n_qubits = {g.at("n_qubits").get<int>()};
      } else {
        read(g, "grid", "n_qubits", c.grid.n_qubits);
      }
    }
    read(g, "grid", "p_phi", c.grid.p_phi_list);
    read(g, "grid", "p_dep", c.grid.p_dep);
    read(g, "grid", "alpha", c.grid.alpha);
    read(g, "grid", "replicates", c.grid.replicates);
    read(g, "grid", "base_seed", c.grid.base_seed);
    read(g, "grid", "calibration_k_max", c.grid.calibration_k_max);
    if (g.contains("rules")) {
      std::vector<std::string> names;
      read(g, "grid", "rules", names);
      c.grid.rules.clear();
      for (const auto& n : names) c.grid.rules.push_back(parse_rule(n));
    }
    if (g.contains("epsilon_rel")) {
      double e = 0.0;
      read(g, "grid", "epsilon_rel", e);
      c.grid.epsilon_rel = e;
    }
  }
  if (j.contains("stop")) {
    const auto& s = j.at("stop");
    check_keys(s, "stop", {"epsilon", "delta", "k_min_stop", "m_min_stop", "patience", "k_max", "m_max", "k0", "m0",
                           "rule", "fixed_k", "j_max", "spending", "m_conf", "m_schedule"});
    read(s, "stop", "epsilon", c.stop.epsilon);
    read(s, "stop", "delta", c.stop.delta);
    read(s, "stop", "k_min_stop", c.stop.k_min_stop);
    read(s, "stop", "m_min_stop", c.stop.m_min_stop);
    read(s, "stop", "patience", c.stop.patience);
    read(s, "stop", "k_max", c.stop.k_max);
    read(s, "stop", "m_max", c.stop.m_max);
    read(s, "stop", "k0", c.stop.k0);
    read(s, "stop", "m0", c.stop.m0);
    read(s, "stop", "fixed_k", c.stop.fixed_k);
    read(s, "stop", "j_max", c.stop.j_max);
    read(s, "stop", "m_conf", c.stop.m_conf);
    read(s, "stop", "m_schedule", c.stop.m_schedule);
    if (s.contains("rule")) {
      std::string r;
      read(s, "stop", "rule", r);
      c.stop.rule = parse_rule(r);
    }
    if (s.contains("spending")) {
      std::string sp;
      read(s, "stop", "spending", sp);
      c.stop.spending = parse_spending(sp);
    }
  }
  if (j.contains("bootstrap")) {
    const auto& b = j.at("bootstrap");
    check_keys(b, "bootstrap", {"replicates", "level", "seed"});
    read(b, "bootstrap", "replicates", c.boot.replicates);
    read(b, "bootstrap", "level", c.boot.level);
    read(b, "bootstrap", "seed", c.boot.seed);
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e, "estimator", {"seed_source"});
    if (e.contains("seed_source")) {
      std::string s;
      read(e, "estimator", "seed_source", s);
      c.seed_source = parse_seed_source(s);
    }
  }
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    check_keys(a, "ablation", {"p_phi", "k_min", "m_min", "patience"});
    read(a, "ablation", "p_phi", c.ablation.p_phi);
    read(a, "ablation", "k_min", c.ablation.k_min_set);
    read(a, "ablation", "m_min", c.ablation.m_min_set);
    read(a, "ablation", "patience", c.ablation.patience_set);
  }
  if (j.contains("calibration")) {
    const auto& k = j.at("calibration");
    check_keys(k, "calibration", {"k_max", "csv"});
    read(k, "calibration", "k_max", c.calibration_k_max);
    if (k.contains("csv")) {
      std::string path;
      read(k, "calibration", "csv", path);
      c.calibration_csv = path;
    }
  }
  if (j.contains("decay")) {
    const auto& d = j.at("decay");
    check_keys(d, "decay", {"n_qubits", "p_phi", "k_from", "k_max"});
    read(d, "decay", "n_qubits", c.decay.n_qubits);
    read(d, "decay", "p_phi", c.decay.p_phi);
    read(d, "decay", "k_from", c.decay.k_from);
    read(d, "decay", "k_max", c.decay.k_max);
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace aksqfi
