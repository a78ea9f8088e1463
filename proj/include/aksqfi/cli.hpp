#pragma once

// Command-line front end: estimate, grid, ablation, calibrate, decay-fit,
// report. Exit status 0 on success, 1 on usage or configuration errors, 2 on
// runtime failures.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aksqfi/config.hpp"
#include "aksqfi/csv.hpp"
#include "aksqfi/harness.hpp"

namespace aksqfi {

namespace cli_detail {

struct Globals {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string rule;
  std::optional<double> eps;
};

inline Config resolve_config(const Globals& g) {
  Config c = g.config_path.empty() ? Config{} : load_config(g.config_path);
  if (g.seed) c.grid.base_seed = *g.seed;
  if (!g.rule.empty()) {
    c.stop.rule = parse_rule(g.rule);
    c.grid.rules = {c.stop.rule};
  }
  if (g.eps) {
    c.stop.epsilon = *g.eps;
    c.grid.epsilon_rel.reset();
  }
  if (g.jobs < 1) throw ConfigError("--jobs must be >= 1");
  c.validate();
  return c;
}

inline std::string metadata(const Config& c) {
  return "aksqfi format=1 config=" + hex64(c.digest()) + " base_seed=" + std::to_string(c.grid.base_seed) +
         " qubit_order=q0_leftmost";
}

inline std::filesystem::path out_path(const Globals& g, const std::string& fallback, const std::string& file) {
  const std::filesystem::path dir = g.out_dir.empty() ? std::filesystem::path(fallback) : std::filesystem::path(g.out_dir);
  std::filesystem::create_directories(dir);
  return dir / file;
}

inline std::optional<CalibrationTable> external_calibration(const Config& c) {
  if (!c.calibration_csv) return std::nullopt;
  return parse_calibration(read_csv(*c.calibration_csv));
}

inline std::string decision_line(const RunResult& res, const BenchmarkInstance& inst, StopRule rule, double eps) {
  const RunRecord r = make_record(res, rule, inst, eps);
  std::ostringstream os;
  os << "outcome=" << to_string(r.outcome) << " rule=" << to_string(rule) << " n=" << r.n
     << " p_phi=" << format_double(r.p_phi) << " epsilon=" << format_double(eps) << " K=" << r.k_final
     << " M=" << r.m_final << " f_hat=" << format_double(r.f_hat) << " width=" << format_double(r.width)
     << " d_k=" << (r.d_k.is_infinite() ? "inf" : format_double(r.d_k.value())) << " f_ref=" << format_double(r.f_ref)
     << " abs_err=" << format_double(r.abs_err) << " false_stop=" << (r.false_stop ? 1 : 0)
     << " n_eval=" << r.n_eval << " seed=" << r.seed;
  if (r.certificate) {
    os << " r_trunc=" << format_double(r.certificate->r_trunc) << " r_stat=" << format_double(r.certificate->r_stat)
       << " delta_j=" << format_double(r.certificate->delta_j) << " attempt=" << r.certificate->attempt_index;
  }
  return os.str();
}

}  // namespace cli_detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Krylov-shadow QFI estimation with adaptive stopping", "aksqfi"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  double eps_value = 0.0;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--out", g.out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed_value, "base seed");
  app.add_option("--jobs", g.jobs, "parallel replicate workers");
  app.add_option("--rule", g.rule, "stopping rule");
  auto* eps_opt = app.add_option("--eps", eps_value, "absolute tolerance");

  auto* estimate = app.add_subcommand("estimate", "single adaptive run, prints the stop decision");
  int est_n = 0;
  double est_p = -1.0;
  estimate->add_option("--n", est_n, "qubit count (default: first grid entry)");
  estimate->add_option("--p-phi", est_p, "dephasing probability (default: first grid entry)");
  bool est_steps = false;
  estimate->add_flag("--steps", est_steps, "also print the trajectory");

  auto* grid = app.add_subcommand("grid", "replicate grid, writes runs.csv and summary.csv");
  bool grid_traj = false;
  grid->add_flag("--trajectories", grid_traj, "also write trajectories.csv");

  auto* ablation = app.add_subcommand("ablation", "component-aware threshold sweep, writes ablation.csv");
  auto* calibrate = app.add_subcommand("calibrate", "population truncation table, writes calibration.csv");
  int cal_k_max = 0;
  calibrate->add_option("--k-max", cal_k_max, "largest Krylov order (default from config)");

  auto* decay = app.add_subcommand("decay-fit", "exponential fit of |B_K| and exact-state d_K");
  int dec_n = 0;
  double dec_p = -1.0;
  int dec_kmin = 0;
  int dec_kmax = 0;
  decay->add_option("--n", dec_n, "qubit count");
  decay->add_option("--p-phi", dec_p, "dephasing probability");
  decay->add_option("--k-min", dec_kmin, "smallest K in the fit (default 2)");
  decay->add_option("--k-max", dec_kmax, "largest K in the fit (default 8)");

  auto* report = app.add_subcommand("report", "recompute the summary from a runs.csv");
  std::string report_in;
  report->add_option("runs_csv", report_in, "runs.csv produced by grid")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  if (seed_opt->count()) g.seed = seed_value;
  if (eps_opt->count()) g.eps = eps_value;

  Config cfg;
  try {
    cfg = resolve_config(g);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  }

  try {
    const std::string meta = metadata(cfg);
    if (estimate->parsed()) {
      NoiseConfig nc;
      nc.n_qubits = est_n > 0 ? est_n : cfg.grid.n_qubits.front();
      nc.p_phi = est_p >= 0.0 ? est_p : cfg.grid.p_phi_list.front();
      nc.p_dep = cfg.grid.p_dep;
      nc.alpha = cfg.grid.alpha;
      try {
        nc.validate();
      } catch (const ValidationError& e) {
        throw ConfigError(e.what());
      }
      const BenchmarkInstance inst = build_instance(nc);
      StopConfig stop = cfg.stop;
      if (cfg.grid.epsilon_rel) stop.epsilon = *cfg.grid.epsilon_rel * inst.f_ref;
      CalibrationTable table;
      if (stop.rule == StopRule::heldout_component_aware) {
        auto ext = external_calibration(cfg);
        table = ext ? *ext : calibration_for({inst}, cfg.grid.calibration_k_max > 0 ? cfg.grid.calibration_k_max
                                                                                       : stop.k_max);
      }
      const std::uint64_t seed = replicate_seed(cfg.grid.base_seed, nc.n_qubits, nc.p_phi, 0);
      const RunResult res = run(inst, stop, cfg.boot, seed, RunOptions{cfg.seed_source, &table});
      if (est_steps) {
        for (const auto& s : res.steps) {
          out << "step=" << s.iteration << " K=" << s.k << " M=" << s.m << " f_hat=" << format_double(s.bundle.f_hat)
              << " width=" << format_double(s.bundle.width)
              << " d_k=" << (s.bundle.d_k.is_infinite() ? "inf" : format_double(s.bundle.d_k.value()))
              << " patience=" << s.gate_trace.patience_count << " action=" << to_string(s.action) << '\n';
        }
      }
      out << decision_line(res, inst, stop.rule, stop.epsilon) << '\n';
    } else if (grid->parsed()) {
      auto ext = external_calibration(cfg);
      GridOptions opts;
      opts.jobs = g.jobs;
      opts.seed_source = cfg.seed_source;
      opts.calibration = ext ? &*ext : nullptr;
      opts.keep_trajectories = grid_traj;
      GridSpec spec = cfg.grid;
      if (spec.calibration_k_max == 0) spec.calibration_k_max = cfg.calibration_k_max;
      const GridResult res = run_grid(spec, cfg.stop, cfg.boot, opts);
      write_text(out_path(g, "results", "runs.csv").string(), runs_csv(res.records, meta));
      write_text(out_path(g, "results", "summary.csv").string(), summary_csv(res.summary, meta));
      if (grid_traj) {
        write_text(out_path(g, "results", "trajectories.csv").string(),
                   trajectories_csv(res.records, res.trajectories, meta));
      }
      out << summary_table(res.summary);
    } else if (ablation->parsed()) {
      const auto cells = run_ablation(cfg.grid, cfg.ablation, cfg.stop, cfg.boot, g.jobs, cfg.seed_source);
      write_text(out_path(g, "results", "ablation.csv").string(), ablation_csv(cells, meta));
      out << " K_min  M_min  P    FSR  [95% CI]        SR\n";
      for (const auto& c : cells) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s%5d  %5zu  %d   %.2f  [%.2f, %.2f]  %.2f\n", c.is_default ? "*" : " ",
                      c.k_min_stop, c.m_min_stop, c.patience, c.fsr, c.fsr_lower, c.fsr_upper, c.sr);
        out << line;
      }
    } else if (calibrate->parsed()) {
      const CalibrationTable table = make_calibration_table(cfg.grid, cal_k_max > 0 ? cal_k_max : cfg.calibration_k_max);
      const auto path = out_path(g, "results", "calibration.csv");
      write_text(path.string(), calibration_csv(table, meta));
      out << "wrote " << table.rows().size() << " rows to " << path.string() << '\n';
    } else if (decay->parsed()) {
      DecaySpec d = cfg.decay;
      if (dec_n > 0) d.n_qubits = dec_n;
      if (dec_p >= 0.0) d.p_phi = dec_p;
      if (dec_kmin > 0) d.k_from = dec_kmin;
      if (dec_kmax > 0) d.k_max = dec_kmax;
      if (d.k_max < d.k_from + 2) throw ConfigError("decay-fit needs k_max >= k_min + 2");
      NoiseConfig nc;
      nc.n_qubits = d.n_qubits;
      nc.p_phi = d.p_phi;
      nc.p_dep = cfg.grid.p_dep;
      nc.alpha = cfg.grid.alpha;
      try {
        nc.validate();
      } catch (const ValidationError& e) {
        throw ConfigError(e.what());
      }
      const BenchmarkInstance inst = build_instance(nc);
      const auto rows = population_table(inst, d.k_max);
      const DecayFit fb = fit_decay(truncation_series(rows, d.k_from));
      out << "n=" << d.n_qubits << " p_phi=" << format_double(d.p_phi) << " f_ref=" << format_double(inst.f_ref)
          << " K=" << d.k_from << ".." << d.k_max << '\n';
      out << "B_K: mu_hat=" << format_double(fb.mu_hat) << " ci95=[" << format_double(fb.ci_lower) << ", "
          << format_double(fb.ci_upper) << "] C_hat=" << format_double(fb.c_hat)
          << (fb.divergent ? " divergent" : "") << '\n';
      try {
        const DecayFit fd = fit_decay(stability_series(rows, std::max(2, d.k_from)));
        out << "d_K (exact state): mu_hat=" << format_double(fd.mu_hat) << " ci95=[" << format_double(fd.ci_lower)
            << ", " << format_double(fd.ci_upper) << "]" << (fd.divergent ? " divergent" : "") << '\n';
      } catch (const ValidationError& e) {
        out << "d_K (exact state): " << e.what() << '\n';
      }
      if (!g.out_dir.empty()) {
        std::ostringstream os;
        os << "# " << meta << '\n' << "K,F_K,B_abs,d_K,effective_rank\n";
        for (std::size_t i = 0; i < rows.size(); ++i) {
          os << rows[i].k << ',' << format_double(rows[i].f_k) << ',' << format_double(rows[i].b_abs) << ','
             << (i == 0 ? std::string("inf") : format_double(std::abs(rows[i].f_k - rows[i - 1].f_k))) << ','
             << rows[i].effective_rank << '\n';
        }
        write_text(out_path(g, "results", "decay.csv").string(), os.str());
      }
    } else if (report->parsed()) {
      const CsvTable t = read_csv(report_in);
      const auto records = parse_runs(t);
      if (records.empty()) throw ValidationError("report: no runs in '" + report_in + "'");
      const auto rows = summarize(records);
      if (!g.out_dir.empty()) {
        write_text(out_path(g, "results", "summary.csv").string(),
                   summary_csv(rows, t.metadata.empty() ? meta : t.metadata));
      }
      out << summary_table(rows);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace aksqfi
