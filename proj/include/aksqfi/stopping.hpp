#pragma once

// Stopping policies, held-out certification, closed-form threshold
// calibrators and Wilson score intervals.

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aksqfi/estimator.hpp"

namespace aksqfi {

enum class StopRule {
  width_only,
  component_aware,
  sample_schedule,
  seq_heldout_width,
  fixedK_heldout,
  heldout_component_aware,
};

inline const std::vector<StopRule>& all_rules() {
  static const std::vector<StopRule> rules = {StopRule::width_only,        StopRule::component_aware,
                                              StopRule::sample_schedule,   StopRule::seq_heldout_width,
                                              StopRule::fixedK_heldout,    StopRule::heldout_component_aware};
  return rules;
}

inline std::string to_string(StopRule r) {
  switch (r) {
    case StopRule::width_only: return "width_only";
    case StopRule::component_aware: return "component_aware";
    case StopRule::sample_schedule: return "sample_schedule";
    case StopRule::seq_heldout_width: return "seq_heldout_width";
    case StopRule::fixedK_heldout: return "fixedK_heldout";
    case StopRule::heldout_component_aware: return "heldout_component_aware";
  }
  return "unknown";
}

inline StopRule parse_rule(const std::string& s) {
  for (StopRule r : all_rules()) {
    if (to_string(r) == s) return r;
  }
  throw ConfigError("unknown stopping rule '" + s + "'");
}

inline bool is_heldout(StopRule r) {
  return r == StopRule::seq_heldout_width || r == StopRule::fixedK_heldout || r == StopRule::heldout_component_aware;
}

enum class Spending { bonferroni, summable };

inline std::string to_string(Spending s) { return s == Spending::bonferroni ? "bonferroni" : "summable"; }

inline Spending parse_spending(const std::string& s) {
  if (s == "bonferroni") return Spending::bonferroni;
  if (s == "summable") return Spending::summable;
  throw ConfigError("unknown alpha spending '" + s + "' (expected bonferroni or summable)");
}

struct StopConfig {
  double epsilon = 0.2;
  double delta = 0.1;
  int k_min_stop = 4;
  std::size_t m_min_stop = 128;
  int patience = 2;
  int k_max = 8;
  std::size_t m_max = 512;
  int k0 = 1;
  std::size_t m0 = 16;
  StopRule rule = StopRule::component_aware;

  int fixed_k = 4;            // fixedK_heldout and sample_schedule
  int j_max = 0;              // 0: remaining sample-count levels at the first candidate
  Spending spending = Spending::bonferroni;
  std::size_t m_conf = 0;     // 0: candidate M
  std::vector<std::size_t> m_schedule;  // sample_schedule; empty: m0 * 2^i up to m_max

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive and finite");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must be in (0, 1)");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (k0 < 1 || k_max < k0) throw ConfigError("need 1 <= k0 <= k_max");
    if (m0 < 2 || m_max < m0) throw ConfigError("need 2 <= m0 <= m_max");
    std::size_t m = m0;
    while (m < m_max) m *= 2;
    if (m != m_max) throw ConfigError("m_max must be m0 times a power of two");
    if (rule == StopRule::component_aware || rule == StopRule::heldout_component_aware) {
      if (k_min_stop > k_max) throw ConfigError("k_min_stop exceeds k_max");
      if (m_min_stop > m_max) throw ConfigError("m_min_stop exceeds m_max");
    }
    if (fixed_k < 1) throw ConfigError("fixed_k must be >= 1");
    if (j_max < 0) throw ConfigError("j_max must be >= 0");
    for (std::size_t i = 0; i < m_schedule.size(); ++i) {
      if (m_schedule[i] < 2) throw ConfigError("schedule sample counts must be >= 2");
      if (i > 0 && m_schedule[i] <= m_schedule[i - 1]) throw ConfigError("m_schedule must be strictly increasing");
    }
  }

  /// Sample-count levels used by the schedule rule.
  std::vector<std::size_t> schedule() const {
    if (!m_schedule.empty()) return m_schedule;
    std::vector<std::size_t> out;
    for (std::size_t m = m0; m <= m_max; m *= 2) out.push_back(m);
    return out;
  }
};

struct GateTrace {
  bool eligible_k = false;
  bool eligible_m = false;
  bool krylov_gate = false;
  bool sampling_gate = false;
  int patience_count = 0;
};

struct CertificateRecord {
  double r_trunc = 0.0;
  double r_stat = 0.0;
  double delta_j = 0.0;
  int attempt_index = 0;
  int j_max = 0;
  double conf_estimate = 0.0;
  std::size_t conf_m = 0;
  double conf_lower = 0.0;
  double conf_upper = 0.0;
  bool accepted = false;
};

enum class Outcome { success, resource_limit };

inline std::string to_string(Outcome o) { return o == Outcome::success ? "success" : "resource_limit"; }

inline Outcome parse_outcome(const std::string& s) {
  if (s == "success") return Outcome::success;
  if (s == "resource_limit") return Outcome::resource_limit;
  throw ValidationError("unknown outcome '" + s + "'");
}

struct StopDecision {
  Outcome outcome = Outcome::resource_limit;
  int k_final = 0;
  std::size_t m_final = 0;
  double f_hat = 0.0;
  double width = 0.0;
  Stability d_k = Stability::infinite();
  GateTrace gate_trace;
  std::optional<CertificateRecord> certificate;
};

/// max{d_K, w_M} <= epsilon; never true while d_K is the sentinel.
inline bool width_only_test(const EstimateBundle& b, const StopConfig& cfg) {
  if (b.d_k.is_infinite()) return false;
  return b.severity() <= cfg.epsilon;
}

/// Gate evaluation for one step, given the patience count carried in.
inline GateTrace component_aware_test(const EstimateBundle& b, const StopConfig& cfg, int patience_in) {
  GateTrace t;
  t.eligible_k = b.k >= cfg.k_min_stop;
  t.eligible_m = b.m >= cfg.m_min_stop;
  t.krylov_gate = (!b.d_k.is_infinite() && b.d_k.value() <= cfg.epsilon) || b.k == cfg.k_max;
  t.sampling_gate = b.width <= cfg.epsilon;
  const bool pass = t.eligible_k && t.eligible_m && t.krylov_gate && t.sampling_gate;
  t.patience_count = pass ? patience_in + 1 : 0;
  return t;
}

inline bool component_aware_success(const GateTrace& t, const StopConfig& cfg) {
  return t.patience_count >= cfg.patience;
}

/// Widths observed so far at successive schedule levels. Success when the
/// latest level passes and either the previous level also passed or the
/// latest level is the terminal one.
inline bool sample_schedule_test(const std::vector<double>& widths, const StopConfig& cfg, bool at_terminal_level) {
  if (widths.empty()) return false;
  const bool now = widths.back() <= cfg.epsilon;
  if (!now) return false;
  if (at_terminal_level) return true;
  return widths.size() >= 2 && widths[widths.size() - 2] <= cfg.epsilon;
}

inline bool sample_schedule_test(const std::vector<EstimateBundle>& history, const StopConfig& cfg,
                                 bool at_terminal_level) {
  std::vector<double> widths;
  widths.reserve(history.size());
  for (const auto& b : history) widths.push_back(b.width);
  return sample_schedule_test(widths, cfg, at_terminal_level);
}

/// Per-attempt risk budget. Both schedules keep sum_j delta_j <= delta.
inline double spend_delta(double delta, int attempt, int j_max, Spending scheme) {
  if (attempt < 1) throw ValidationError("spend_delta: attempts are numbered from 1");
  if (scheme == Spending::bonferroni) {
    if (j_max < 1 || attempt > j_max) throw ValidationError("spend_delta: attempt exceeds J");
    return delta / static_cast<double>(j_max);
  }
  const double j = attempt;
  return 6.0 * delta / (std::numbers::pi * std::numbers::pi * j * j);
}

/// Pre-registered truncation radii |B_K| keyed by (n, p_phi, p_dep, K).
class CalibrationTable {
 public:
  struct Row {
    int n = 0;
    double p_phi = 0.0;
    double p_dep = 0.0;
    int k = 0;
    double f_k = 0.0;
    double b_abs = 0.0;
  };

  void add(const Row& r) { rows_.push_back(r); }
  const std::vector<Row>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  double truncation_radius(int n, double p_phi, double p_dep, int k) const {
    for (const Row& r : rows_) {
      if (r.n == n && r.k == k && std::abs(r.p_phi - p_phi) < 1e-12 && std::abs(r.p_dep - p_dep) < 1e-12) {
        return r.b_abs;
      }
    }
    throw ConfigError("calibration table has no row for n=" + std::to_string(n) + " p_phi=" + std::to_string(p_phi) +
                      " p_dep=" + std::to_string(p_dep) + " K=" + std::to_string(k));
  }

 private:
  std::vector<Row> rows_;
};

/// Confirmation step: estimate at order k on an independent batch, bootstrap
/// at level 1 - delta_j, and accept iff r_trunc + r_stat <= epsilon with
/// r_stat the larger half-width around the confirmation estimate.
inline CertificateRecord heldout_certificate(const PlugInEstimator& est, int k, double r_trunc,
                                             const ShadowBatch& conf_batch, const StopConfig& cfg, int attempt,
                                             int j_max, int replicates, std::uint64_t boot_seed) {
  if (!(r_trunc >= 0.0)) throw ValidationError("heldout_certificate: truncation radius must be >= 0");
  CertificateRecord rec;
  rec.r_trunc = r_trunc;
  rec.attempt_index = attempt;
  rec.j_max = j_max;
  rec.delta_j = spend_delta(cfg.delta, attempt, j_max, cfg.spending);
  rec.conf_m = conf_batch.size();
  rec.conf_estimate = est.estimate(conf_batch, k, conf_batch.size());
  const Interval iv = est.bootstrap_interval(conf_batch, k, conf_batch.size(), replicates, 1.0 - rec.delta_j,
                                             boot_seed, rec.conf_estimate);
  rec.conf_lower = iv.lower;
  rec.conf_upper = iv.upper;
  rec.r_stat = std::max(std::abs(rec.conf_estimate - iv.lower), std::abs(iv.upper - rec.conf_estimate));
  rec.accepted = rec.r_trunc + rec.r_stat <= cfg.epsilon;
  return rec;
}

/// max{1, ceil(log(2C/eps) / log(1/mu))}.
inline int k_min_formula(double c_trunc, double mu, double epsilon) {
  if (!(c_trunc > 0.0) || !(epsilon > 0.0) || !(mu > 0.0)) {
    throw ValidationError("k_min_formula: C, mu and epsilon must be positive");
  }
  if (mu >= 1.0) throw DivergenceError("k_min_formula: K_min diverges for mu >= 1");
  const double ratio = std::log(2.0 * c_trunc / epsilon) / std::log(1.0 / mu);
  return std::max(1, static_cast<int>(std::ceil(ratio)));
}

/// ceil(2 sigma^2 log(2/delta) / (eps/2 - beta_bar)^2); equals
/// ceil(8 sigma^2 log(2/delta) / eps^2) when beta_bar = 0.
inline long long m_min_formula(double sigma, double epsilon, double delta, double beta_bar = 0.0) {
  if (!(sigma > 0.0) || !(epsilon > 0.0)) throw ValidationError("m_min_formula: sigma and epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("m_min_formula: delta must be in (0, 1)");
  if (!(beta_bar >= 0.0)) throw ValidationError("m_min_formula: bias bound must be >= 0");
  const double slack = epsilon / 2.0 - beta_bar;
  if (!(slack > 0.0)) throw DivergenceError("m_min_formula: bias bound >= eps/2, more samples cannot certify");
  return static_cast<long long>(std::ceil(2.0 * sigma * sigma * std::log(2.0 / delta) / (slack * slack)));
}

inline double patience_model(double p_bad, int patience) {
  if (!(p_bad >= 0.0 && p_bad <= 1.0)) throw ValidationError("patience_model: probability outside [0, 1]");
  if (patience < 1) throw ValidationError("patience_model: patience must be >= 1");
  return std::pow(p_bad, patience);
}

inline std::pair<double, double> wilson_interval(long long successes, long long trials, double level = 0.95) {
  if (trials < 1 || successes < 0 || successes > trials) {
    throw ValidationError("wilson_interval: need 0 <= successes <= trials and trials >= 1");
  }
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("wilson_interval: level must be in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct ErrorEnvelope {
  double i_trunc = 0.0;
  double i_stat = 0.0;

  /// Both radii at most eps/2.
  bool certified(double epsilon) const { return i_trunc <= epsilon / 2.0 && i_stat <= epsilon / 2.0; }
};

/// I_trunc = C mu^K and I_stat = beta + sigma sqrt(2 log(2/delta) / M).
inline ErrorEnvelope error_envelope(double c_trunc, double mu, double sigma, double beta, int k, long long m,
                                    double delta) {
  if (!(c_trunc > 0.0) || !(sigma > 0.0) || !(beta >= 0.0) || k < 1 || m < 1) {
    throw ValidationError("error_envelope: parameters must be positive");
  }
  if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("error_envelope: mu must be in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("error_envelope: delta must be in (0, 1)");
  ErrorEnvelope e;
  e.i_trunc = c_trunc * std::pow(mu, k);
  e.i_stat = beta + sigma * std::sqrt(2.0 * std::log(2.0 / delta) / static_cast<double>(m));
  return e;
}

}  // namespace aksqfi
