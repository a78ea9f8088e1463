#pragma once

// Adaptive (K, M) controller. One shadow batch of size m_max is drawn per run
// and every evaluation reads a nested prefix of it, so runs that share a seed
// see the same snapshots regardless of rule.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "aksqfi/benchmark_family.hpp"
#include "aksqfi/estimator.hpp"
#include "aksqfi/shadow.hpp"
#include "aksqfi/stopping.hpp"

namespace aksqfi {

/// XOR-ed into the run seed for confirmation batches.
inline constexpr std::uint64_t kConfirmationSalt = 0xC0F1D3A7E5B9D2C4ULL;
inline constexpr std::uint64_t kBootstrapSalt = 0x5EEDB0075EEDB007ULL;

enum class Action { inc_k, double_m, final_k_pass, final_m_pass, stop_success, stop_resource_limit };

inline std::string to_string(Action a) {
  switch (a) {
    case Action::inc_k: return "inc_k";
    case Action::double_m: return "double_m";
    case Action::final_k_pass: return "final_k_pass";
    case Action::final_m_pass: return "final_m_pass";
    case Action::stop_success: return "stop_success";
    case Action::stop_resource_limit: return "stop_resource_limit";
  }
  return "unknown";
}

struct TrajectoryStep {
  int iteration = 0;
  int k = 0;
  std::size_t m = 0;
  EstimateBundle bundle;
  GateTrace gate_trace;
  Action action = Action::inc_k;
  std::optional<CertificateRecord> certificate;  // set when a confirmation was attempted here
  std::string error;                             // numerical failure, treated as a failed gate
};

struct RunResult {
  std::vector<TrajectoryStep> steps;
  StopDecision decision;
  int n_eval = 0;
  std::size_t m_final = 0;
  std::uint64_t seed = 0;
  int certificate_attempts = 0;
  int degenerate_bootstrap_count = 0;
};

struct RunOptions {
  SeedSource seed_source = SeedSource::exact_state;
  const CalibrationTable* calibration = nullptr;  // required by heldout_component_aware
};

/// (k_max - k0) + ceil(log2(m_max / m0)) + 1.
inline int n_eval_bound(const StopConfig& cfg) {
  int levels = 0;
  for (std::size_t m = cfg.m0; m < cfg.m_max; m *= 2) ++levels;
  return (cfg.k_max - cfg.k0) + levels + 1;
}

namespace controller_detail {

inline PlugInEstimator make_estimator(const BenchmarkInstance& inst, SeedSource src) {
  return src == SeedSource::exact_state ? PlugInEstimator(inst.generator, inst.rho) : PlugInEstimator(inst.generator);
}

inline BootstrapConfig step_bootstrap(const BootstrapConfig& boot, std::uint64_t seed, int k, std::size_t m) {
  BootstrapConfig b = boot;
  b.seed = hash_words({boot.seed ^ kBootstrapSalt, seed, static_cast<std::uint64_t>(k), m});
  return b;
}

/// Bundle with numerical failures mapped to an all-gates-fail placeholder.
inline EstimateBundle safe_bundle(const PlugInEstimator& est, const ShadowBatch& batch, int k, std::size_t m,
                                  const BootstrapConfig& boot, std::string& error) {
  try {
    return est.bundle(batch, k, m, boot);
  } catch (const DegenerateInputError& e) {
    error = e.what();
    EstimateBundle b;
    b.k = k;
    b.m = m;
    b.f_hat = std::numeric_limits<double>::quiet_NaN();
    b.width = std::numeric_limits<double>::infinity();
    b.boot_lower = b.f_hat;
    b.boot_upper = b.f_hat;
    b.boot_level = boot.level;
    return b;
  }
}

inline int default_attempts(const StopConfig& cfg, std::size_t m) {
  int levels = 1;
  for (std::size_t x = m; x < cfg.m_max; x *= 2) ++levels;
  return levels;
}

inline StopDecision decide(Outcome o, const TrajectoryStep& s) {
  StopDecision d;
  d.outcome = o;
  d.k_final = s.k;
  d.m_final = s.m;
  d.f_hat = s.bundle.f_hat;
  d.width = s.bundle.width;
  d.d_k = s.bundle.d_k;
  d.gate_trace = s.gate_trace;
  return d;
}

}  // namespace controller_detail

/// Fixed order, declared sample-count sequence: success when the width passes
/// at two consecutive levels, or at the terminal level.
inline RunResult run_sample_schedule(const BenchmarkInstance& inst, int fixed_k, const std::vector<std::size_t>& schedule,
                                     const StopConfig& cfg, const BootstrapConfig& boot, std::uint64_t seed,
                                     const RunOptions& opts = {}) {
  cfg.validate();
  boot.validate();
  if (schedule.empty()) throw ConfigError("sample schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 2 || (i > 0 && schedule[i] <= schedule[i - 1])) {
      throw ConfigError("sample schedule must be strictly increasing with entries >= 2");
    }
  }
  if (fixed_k < 1 || fixed_k > inst.generator.dim()) throw ConfigError("fixed_k must be in [1, 2^n]");

  const PlugInEstimator est = controller_detail::make_estimator(inst, opts.seed_source);
  const ShadowBatch batch = draw_snapshots(inst.rho, schedule.back(), seed);
  RunResult res;
  res.seed = seed;
  std::vector<double> widths;
  for (std::size_t level = 0; level < schedule.size(); ++level) {
    TrajectoryStep step;
    step.iteration = static_cast<int>(level) + 1;
    step.k = fixed_k;
    step.m = schedule[level];
    step.bundle = controller_detail::safe_bundle(est, batch, fixed_k, step.m,
                                                 controller_detail::step_bootstrap(boot, seed, fixed_k, step.m),
                                                 step.error);
    res.degenerate_bootstrap_count += step.bundle.degenerate_count;
    widths.push_back(step.bundle.width);
    const bool terminal = level + 1 == schedule.size();
    const bool ok = sample_schedule_test(widths, cfg, terminal);
    step.gate_trace.eligible_k = true;
    step.gate_trace.eligible_m = true;
    step.gate_trace.krylov_gate = true;
    step.gate_trace.sampling_gate = step.bundle.width <= cfg.epsilon;
    step.gate_trace.patience_count = 0;
    for (auto it = widths.rbegin(); it != widths.rend() && *it <= cfg.epsilon; ++it) ++step.gate_trace.patience_count;
    step.action = ok ? Action::stop_success : (terminal ? Action::stop_resource_limit : Action::double_m);
    res.steps.push_back(step);
    if (ok || terminal) break;
  }
  const TrajectoryStep& last = res.steps.back();
  res.decision = controller_detail::decide(
      last.action == Action::stop_success ? Outcome::success : Outcome::resource_limit, last);
  res.n_eval = static_cast<int>(res.steps.size());
  res.m_final = last.m;
  return res;
}

/// Adaptive run under cfg.rule.
inline RunResult run(const BenchmarkInstance& inst, const StopConfig& cfg, const BootstrapConfig& boot,
                     std::uint64_t seed, const RunOptions& opts = {}) {
  cfg.validate();
  boot.validate();
  if (cfg.rule == StopRule::sample_schedule) {
    return run_sample_schedule(inst, cfg.fixed_k, cfg.schedule(), cfg, boot, seed, opts);
  }
  const bool heldout = is_heldout(cfg.rule);
  const bool fixed_k_mode = cfg.rule == StopRule::fixedK_heldout;
  if (fixed_k_mode && cfg.fixed_k > inst.generator.dim()) throw ConfigError("fixed_k exceeds the Hilbert dimension");
  if (cfg.rule == StopRule::heldout_component_aware && (opts.calibration == nullptr || opts.calibration->empty())) {
    throw ConfigError("heldout_component_aware needs a calibration table");
  }

  const PlugInEstimator est = controller_detail::make_estimator(inst, opts.seed_source);
  const ShadowBatch batch = draw_snapshots(inst.rho, cfg.m_max, seed);
  const int k_limit = fixed_k_mode ? cfg.fixed_k : cfg.k_max;

  RunResult res;
  res.seed = seed;
  int k = fixed_k_mode ? cfg.fixed_k : cfg.k0;
  std::size_t m = cfg.m0;
  int patience = 0;
  int attempts = 0;
  int j_max = cfg.j_max;

  for (int iteration = 1;; ++iteration) {
    TrajectoryStep step;
    step.iteration = iteration;
    step.k = k;
    step.m = m;
    step.bundle = controller_detail::safe_bundle(est, batch, k, m, controller_detail::step_bootstrap(boot, seed, k, m),
                                                 step.error);
    res.degenerate_bootstrap_count += step.bundle.degenerate_count;
    const EstimateBundle& b = step.bundle;
    const double d = b.d_k.value();
    const double w = b.width;

    bool candidate = false;
    switch (cfg.rule) {
      case StopRule::component_aware:
      case StopRule::heldout_component_aware:
        step.gate_trace = component_aware_test(b, cfg, patience);
        patience = step.gate_trace.patience_count;
        candidate = component_aware_success(step.gate_trace, cfg);
        break;
      case StopRule::fixedK_heldout:
        step.gate_trace.eligible_k = step.gate_trace.eligible_m = step.gate_trace.krylov_gate = true;
        step.gate_trace.sampling_gate = w <= cfg.epsilon;
        candidate = step.gate_trace.sampling_gate;
        step.gate_trace.patience_count = candidate ? 1 : 0;
        break;
      default:
        step.gate_trace.eligible_k = step.gate_trace.eligible_m = true;
        step.gate_trace.krylov_gate = d <= cfg.epsilon;
        step.gate_trace.sampling_gate = w <= cfg.epsilon;
        candidate = width_only_test(b, cfg);
        step.gate_trace.patience_count = candidate ? 1 : 0;
        break;
    }
    if (!step.error.empty()) candidate = false;

    if (candidate && !heldout) {
      step.action = Action::stop_success;
      res.steps.push_back(step);
      res.decision = controller_detail::decide(Outcome::success, step);
      break;
    }
    if (candidate && heldout) {
      if (j_max == 0) j_max = controller_detail::default_attempts(cfg, m);
      if (attempts < j_max || cfg.spending == Spending::summable) {
        ++attempts;
        const double r_trunc = cfg.rule == StopRule::heldout_component_aware
                                   ? opts.calibration->truncation_radius(inst.config.n_qubits, inst.config.p_phi,
                                                                         inst.config.p_dep, k)
                                   : 0.0;
        const std::size_t m_conf = cfg.m_conf > 0 ? cfg.m_conf : m;
        const std::uint64_t conf_seed = hash_words({seed ^ kConfirmationSalt, static_cast<std::uint64_t>(attempts)});
        try {
          const ShadowBatch conf = draw_snapshots(inst.rho, m_conf, conf_seed);
          step.certificate = heldout_certificate(est, k, r_trunc, conf, cfg, attempts, j_max, boot.replicates,
                                                 hash_words({conf_seed, kBootstrapSalt}));
        } catch (const DegenerateInputError& e) {
          step.error = e.what();
        }
        if (step.certificate && step.certificate->accepted) {
          step.action = Action::stop_success;
          res.steps.push_back(step);
          res.decision = controller_detail::decide(Outcome::success, step);
          res.decision.f_hat = step.certificate->conf_estimate;
          res.decision.certificate = step.certificate;
          break;
        }
        patience = 0;
        step.gate_trace.patience_count = 0;
      }
    }

    if (k >= k_limit && m >= cfg.m_max) {
      step.action = Action::stop_resource_limit;
      res.steps.push_back(step);
      res.decision = controller_detail::decide(Outcome::resource_limit, step);
      break;
    }
    if (d > cfg.epsilon && k < k_limit) {
      step.action = Action::inc_k;
      ++k;
    } else if (w > cfg.epsilon && m < cfg.m_max) {
      step.action = Action::double_m;
      m *= 2;
    } else if (k < k_limit) {
      step.action = Action::final_k_pass;
      ++k;
    } else if (m < cfg.m_max) {
      step.action = Action::final_m_pass;
      m *= 2;
    } else {
      step.action = Action::stop_resource_limit;
      res.steps.push_back(step);
      res.decision = controller_detail::decide(Outcome::resource_limit, step);
      break;
    }
    res.steps.push_back(step);
  }

  // Keep the last attempted certificate on a resource-limit record for audit.
  if (!res.decision.certificate) {
    for (auto it = res.steps.rbegin(); it != res.steps.rend(); ++it) {
      if (it->certificate) {
        res.decision.certificate = it->certificate;
        break;
      }
    }
  }
  res.certificate_attempts = attempts;
  res.n_eval = static_cast<int>(res.steps.size());
  res.m_final = res.steps.back().m;
  return res;
}

}  // namespace aksqfi
