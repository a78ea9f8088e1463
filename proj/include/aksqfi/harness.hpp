#pragma once

// Replicate grids, FSR/SR/SP aggregation, threshold ablation, Krylov decay
// fits and calibration tables.

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "aksqfi/benchmark_family.hpp"
#include "aksqfi/controller.hpp"
#include "aksqfi/krylov.hpp"
#include "aksqfi/stopping.hpp"

namespace aksqfi {

struct GridSpec {
  std::vector<int> n_qubits = {4};
  std::vector<double> p_phi_list = {0.0, 0.06, 0.12, 0.18, 0.24};
  double p_dep = 0.03;
  double alpha = kDefaultEntanglingAngle;
  int replicates = 50;
  std::vector<StopRule> rules = {StopRule::width_only, StopRule::component_aware};
  std::optional<double> epsilon_rel;  // when set, epsilon = epsilon_rel * F_ref per instance
  std::uint64_t base_seed = 20240917;
  int calibration_k_max = 0;          // 0: stop.k_max

  void validate() const {
    if (n_qubits.empty()) throw ConfigError("grid needs at least one qubit count");
    for (int n : n_qubits) {
      if (n < 1 || n > kMaxQubits) throw ConfigError("grid n_qubits must be in [1, 12]");
    }
    if (p_phi_list.empty()) throw ConfigError("grid needs at least one p_phi value");
    for (double p : p_phi_list) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("grid p_phi values must be in [0, 1]");
    }
    if (!(p_dep >= 0.0 && p_dep <= 1.0)) throw ConfigError("grid p_dep must be in [0, 1]");
    if (replicates < 1) throw ConfigError("grid replicates must be >= 1");
    if (rules.empty()) throw ConfigError("grid needs at least one rule");
    if (epsilon_rel && !(*epsilon_rel > 0.0)) throw ConfigError("epsilon_rel must be positive");
    if (calibration_k_max < 0) throw ConfigError("calibration k_max must be >= 0");
  }
};

struct RunRecord {
  long long run_id = 0;
  StopRule rule = StopRule::width_only;
  int n = 0;
  double p_phi = 0.0;
  double p_dep = 0.0;
  double epsilon = 0.0;
  int k_final = 0;
  std::size_t m_final = 0;
  double f_hat = 0.0;
  double f_ref = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double width = 0.0;
  Stability d_k = Stability::infinite();
  Outcome outcome = Outcome::resource_limit;
  bool false_stop = false;
  int n_eval = 0;
  std::uint64_t seed = 0;
  std::optional<CertificateRecord> certificate;
  int degenerate_bootstrap_count = 0;
  std::string error;
};

struct SummaryRow {
  StopRule rule = StopRule::width_only;
  int n = 0;
  double p_phi = 0.0;
  long long runs = 0;
  long long successes = 0;
  long long false_stops = 0;
  double fsr = 0.0;
  double fsr_lower = 0.0;
  double fsr_upper = 0.0;
  double sr = 0.0;
  double sr_lower = 0.0;
  double sr_upper = 0.0;
  std::optional<double> sp;
  double median_abs_err = 0.0;
  double median_m_final = 0.0;
  double iqr_m_final = 0.0;
};

struct GridResult {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<std::vector<TrajectoryStep>> trajectories;  // parallel to records
};

/// Replicate seed shared by every rule, so rules see matched draws.
inline std::uint64_t replicate_seed(std::uint64_t base_seed, int n, double p_phi, int replicate) {
  return hash_words({base_seed, static_cast<std::uint64_t>(n), std::bit_cast<std::uint64_t>(p_phi),
                     static_cast<std::uint64_t>(replicate)});
}

/// Runs task(i) for i in [0, count) on `jobs` threads. The first exception is
/// rethrown after all workers finish.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

inline double iqr_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

/// Aggregates records by (rule, n, p_phi) in first-appearance order.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  using Key = std::tuple<int, int, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) {
    const Key key{static_cast<int>(r.rule), r.n, r.p_phi};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const Key& key : order) {
    const auto& g = groups[key];
    SummaryRow s;
    s.rule = g.front()->rule;
    s.n = g.front()->n;
    s.p_phi = g.front()->p_phi;
    s.runs = static_cast<long long>(g.size());
    std::vector<double> errs;
    std::vector<double> ms;
    for (const RunRecord* r : g) {
      if (r->outcome == Outcome::success) ++s.successes;
      if (r->false_stop) ++s.false_stops;
      errs.push_back(r->abs_err);
      ms.push_back(static_cast<double>(r->m_final));
    }
    const double n = static_cast<double>(s.runs);
    s.fsr = static_cast<double>(s.false_stops) / n;
    s.sr = static_cast<double>(s.successes) / n;
    std::tie(s.fsr_lower, s.fsr_upper) = wilson_interval(s.false_stops, s.runs);
    std::tie(s.sr_lower, s.sr_upper) = wilson_interval(s.successes, s.runs);
    if (s.successes > 0) {
      s.sp = static_cast<double>(s.successes - s.false_stops) / static_cast<double>(s.successes);
    }
    s.median_abs_err = median_of(errs);
    s.median_m_final = median_of(ms);
    s.iqr_m_final = iqr_of(ms);
    out.push_back(s);
  }
  return out;
}

inline RunRecord make_record(const RunResult& res, StopRule rule, const BenchmarkInstance& inst, double epsilon) {
  RunRecord r;
  r.rule = rule;
  r.n = inst.config.n_qubits;
  r.p_phi = inst.config.p_phi;
  r.p_dep = inst.config.p_dep;
  r.epsilon = epsilon;
  r.k_final = res.decision.k_final;
  r.m_final = res.m_final;
  r.f_hat = res.decision.f_hat;
  r.f_ref = inst.f_ref;
  r.abs_err = std::abs(r.f_hat - r.f_ref);
  r.rel_err = r.f_ref > 0.0 ? r.abs_err / r.f_ref : std::numeric_limits<double>::quiet_NaN();
  r.width = res.decision.width;
  r.d_k = res.decision.d_k;
  r.outcome = res.decision.outcome;
  r.false_stop = r.outcome == Outcome::success && r.abs_err > epsilon;
  r.n_eval = res.n_eval;
  r.seed = res.seed;
  r.certificate = res.decision.certificate;
  r.degenerate_bootstrap_count = res.degenerate_bootstrap_count;
  for (const auto& s : res.steps) {
    if (!s.error.empty()) r.error = s.error;
  }
  return r;
}

inline CalibrationTable calibration_for(const std::vector<BenchmarkInstance>& instances, int k_max) {
  CalibrationTable table;
  for (const BenchmarkInstance& inst : instances) {
    for (const PopulationRow& row : population_table(inst, k_max)) {
      table.add({inst.config.n_qubits, inst.config.p_phi, inst.config.p_dep, row.k, row.f_k, row.b_abs});
    }
  }
  return table;
}

inline std::vector<BenchmarkInstance> build_grid_instances(const GridSpec& spec) {
  std::vector<BenchmarkInstance> out;
  for (int n : spec.n_qubits) {
    for (double p : spec.p_phi_list) {
      NoiseConfig c;
      c.n_qubits = n;
      c.p_phi = p;
      c.p_dep = spec.p_dep;
      c.alpha = spec.alpha;
      out.push_back(build_instance(c));
    }
  }
  return out;
}

struct GridOptions {
  int jobs = 1;
  SeedSource seed_source = SeedSource::exact_state;
  const CalibrationTable* calibration = nullptr;  // computed from the grid when null and needed
  bool keep_trajectories = false;
};

/// One record per (rule, n, p_phi, replicate), ordered in that nesting.
inline GridResult run_grid(const GridSpec& spec, const StopConfig& stop, const BootstrapConfig& boot,
                           const GridOptions& opts = {}) {
  spec.validate();
  boot.validate();
  const std::vector<BenchmarkInstance> instances = build_grid_instances(spec);

  CalibrationTable own_table;
  const CalibrationTable* table = opts.calibration;
  const bool needs_table = std::find(spec.rules.begin(), spec.rules.end(), StopRule::heldout_component_aware) !=
                           spec.rules.end();
  if (needs_table && table == nullptr) {
    own_table = calibration_for(instances, spec.calibration_k_max > 0 ? spec.calibration_k_max : stop.k_max);
    table = &own_table;
  }

  struct Task {
    StopRule rule;
    std::size_t instance;
    int replicate;
  };
  std::vector<Task> tasks;
  for (StopRule rule : spec.rules) {
    for (std::size_t i = 0; i < instances.size(); ++i) {
      for (int r = 0; r < spec.replicates; ++r) tasks.push_back({rule, i, r});
    }
  }
  for (StopRule rule : spec.rules) {
    StopConfig cfg = stop;
    cfg.rule = rule;
    cfg.validate();
  }

  GridResult out;
  out.records.resize(tasks.size());
  if (opts.keep_trajectories) out.trajectories.resize(tasks.size());
  parallel_for(tasks.size(), opts.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    const BenchmarkInstance& inst = instances[task.instance];
    StopConfig cfg = stop;
    cfg.rule = task.rule;
    if (spec.epsilon_rel) cfg.epsilon = *spec.epsilon_rel * inst.f_ref;
    const std::uint64_t seed = replicate_seed(spec.base_seed, inst.config.n_qubits, inst.config.p_phi, task.replicate);
    RunRecord rec;
    RunResult res;
    try {
      res = run(inst, cfg, boot, seed, RunOptions{opts.seed_source, table});
      rec = make_record(res, task.rule, inst, cfg.epsilon);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      // Counted as a resource-limit termination with the failure recorded.
      rec.rule = task.rule;
      rec.n = inst.config.n_qubits;
      rec.p_phi = inst.config.p_phi;
      rec.p_dep = inst.config.p_dep;
      rec.epsilon = cfg.epsilon;
      rec.f_hat = std::numeric_limits<double>::quiet_NaN();
      rec.f_ref = inst.f_ref;
      rec.abs_err = rec.rel_err = rec.f_hat;
      rec.width = std::numeric_limits<double>::infinity();
      rec.seed = seed;
      rec.error = e.what();
    }
    rec.run_id = static_cast<long long>(t);
    out.records[t] = std::move(rec);
    if (opts.keep_trajectories) out.trajectories[t] = std::move(res.steps);
  });
  out.summary = summarize(out.records);
  return out;
}

struct AblationCell {
  int k_min_stop = 0;
  std::size_t m_min_stop = 0;
  int patience = 0;
  long long runs = 0;
  long long successes = 0;
  long long false_stops = 0;
  double fsr = 0.0;
  double sr = 0.0;
  double fsr_lower = 0.0;
  double fsr_upper = 0.0;
  bool is_default = false;
};

struct AblationSpec {
  double p_phi = 0.12;
  std::vector<int> k_min_set = {2, 4, 6};
  std::vector<std::size_t> m_min_set = {32, 128, 256};
  std::vector<int> patience_set = {1, 2, 3};
};

/// Component-aware stop index along an exploration trajectory, or -1. The
/// allocation rule never reads the gates, so a run under any (K_min, M_min,
/// P) follows the exploration path until its own stop.
inline int replay_component_aware(const std::vector<TrajectoryStep>& steps, const StopConfig& cfg) {
  int patience = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!steps[i].error.empty()) {
      patience = 0;
      continue;
    }
    const GateTrace t = component_aware_test(steps[i].bundle, cfg, patience);
    patience = t.patience_count;
    if (component_aware_success(t, cfg)) return static_cast<int>(i);
  }
  return -1;
}

/// Runs the component-aware rule over every (K_min, M_min, P) cell at one
/// noise point. Each replicate's trajectory is computed once with gates that
/// can never fire, then replayed per cell.
inline std::vector<AblationCell> run_ablation(const GridSpec& base, const AblationSpec& abl, const StopConfig& stop,
                                              const BootstrapConfig& boot, int jobs = 1,
                                              SeedSource seed_source = SeedSource::exact_state) {
  base.validate();
  boot.validate();
  if (abl.k_min_set.empty() || abl.m_min_set.empty() || abl.patience_set.empty()) {
    throw ConfigError("ablation sets must be non-empty");
  }
  const int n = base.n_qubits.front();
  NoiseConfig c;
  c.n_qubits = n;
  c.p_phi = abl.p_phi;
  c.p_dep = base.p_dep;
  c.alpha = base.alpha;
  const BenchmarkInstance inst = build_instance(c);
  StopConfig explore = stop;
  explore.rule = StopRule::component_aware;
  explore.k_min_stop = explore.k_max;
  explore.m_min_stop = explore.m_max;
  explore.patience = std::numeric_limits<int>::max();
  const double eps = base.epsilon_rel ? *base.epsilon_rel * inst.f_ref : stop.epsilon;
  explore.epsilon = eps;

  std::vector<RunResult> paths(static_cast<std::size_t>(base.replicates));
  parallel_for(paths.size(), jobs, [&](std::size_t r) {
    paths[r] = run(inst, explore, boot, replicate_seed(base.base_seed, n, abl.p_phi, static_cast<int>(r)),
                   RunOptions{seed_source, nullptr});
  });

  std::vector<AblationCell> cells;
  for (int kmin : abl.k_min_set) {
    for (std::size_t mmin : abl.m_min_set) {
      for (int p : abl.patience_set) {
        StopConfig cfg = stop;
        cfg.rule = StopRule::component_aware;
        cfg.k_min_stop = kmin;
        cfg.m_min_stop = mmin;
        cfg.patience = p;
        cfg.epsilon = eps;
        cfg.validate();
        AblationCell cell;
        cell.k_min_stop = kmin;
        cell.m_min_stop = mmin;
        cell.patience = p;
        cell.is_default = kmin == 4 && mmin == 128 && p == 2;
        for (const RunResult& path : paths) {
          ++cell.runs;
          const int idx = replay_component_aware(path.steps, cfg);
          if (idx >= 0) {
            ++cell.successes;
            if (std::abs(path.steps[static_cast<std::size_t>(idx)].bundle.f_hat - inst.f_ref) > eps) ++cell.false_stops;
          }
        }
        cell.fsr = static_cast<double>(cell.false_stops) / static_cast<double>(cell.runs);
        cell.sr = static_cast<double>(cell.successes) / static_cast<double>(cell.runs);
        std::tie(cell.fsr_lower, cell.fsr_upper) = wilson_interval(cell.false_stops, cell.runs);
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

struct DecayFit {
  double mu_hat = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double c_hat = 0.0;
  int points = 0;
  bool divergent = false;  // mu_hat >= 1: K_min has no finite value
};

/// OLS of log(value) on K; mu_hat = exp(slope) with a 95% t-interval on the
/// slope mapped through exp. Non-positive values are dropped.
inline DecayFit fit_decay(const std::vector<std::pair<double, double>>& series, double level = 0.95) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [k, v] : series) {
    if (v > 0.0 && std::isfinite(v)) {
      xs.push_back(k);
      ys.push_back(std::log(v));
    }
  }
  if (xs.size() < 3) throw ValidationError("fit_decay: need at least 3 positive values");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit_decay: K values must not all coincide");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - intercept - slope * xs[i];
    sse += r * r;
  }
  const double se = std::sqrt(sse / (n - 2.0) / sxx);
  const double t = boost::math::quantile(boost::math::students_t_distribution<double>(n - 2.0), 0.5 + level / 2.0);
  DecayFit f;
  f.mu_hat = std::exp(slope);
  f.ci_lower = std::exp(slope - t * se);
  f.ci_upper = std::exp(slope + t * se);
  f.c_hat = std::exp(intercept);
  f.points = static_cast<int>(xs.size());
  f.divergent = f.mu_hat >= 1.0;
  return f;
}

/// Population |B_K| rows over K in [k_from, k_max] as a decay series.
inline std::vector<std::pair<double, double>> truncation_series(const std::vector<PopulationRow>& rows, int k_from) {
  std::vector<std::pair<double, double>> out;
  for (const PopulationRow& r : rows) {
    if (r.k >= k_from) out.emplace_back(r.k, r.b_abs);
  }
  return out;
}

/// Exact-state analogue of d_K: |F_K - F_{K-1}| for K in [max(2, k_from), k_max].
inline std::vector<std::pair<double, double>> stability_series(const std::vector<PopulationRow>& rows, int k_from) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].k >= k_from) out.emplace_back(rows[i].k, std::abs(rows[i].f_k - rows[i - 1].f_k));
  }
  return out;
}

inline CalibrationTable make_calibration_table(const GridSpec& spec, int k_max) {
  spec.validate();
  if (k_max < 1) throw ConfigError("calibration k_max must be >= 1");
  return calibration_for(build_grid_instances(spec), k_max);
}

}  // namespace aksqfi
