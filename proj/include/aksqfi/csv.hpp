#pragma once

// CSV persistence. Doubles are written in shortest round-trip form so that
// reading a file back reproduces every value bit for bit. Each file starts
// with one '#' metadata line.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "aksqfi/harness.hpp"

namespace aksqfi {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("csv: cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("csv: cannot parse integer '" + std::string(s) + "'");
  }
  return v;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// FNV-1a, stable across platforms (std::hash is not).
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Commas and line breaks would break the row layout.
inline std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvTable {
  std::string metadata;  // the '#' line without the marker, empty if absent
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ValidationError("csv: missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!have_header && t.metadata.empty()) t.metadata = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
      continue;
    }
    if (!have_header) {
      t.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw ValidationError("csv: row with " + std::to_string(row.size()) + " fields, header has " +
                            std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw ValidationError("csv: '" + path + "' has no header row");
  return t;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// runs.csv

inline const std::vector<std::string>& runs_columns() {
  static const std::vector<std::string> cols = {
      "run_id",        "rule",           "n",           "p_phi",       "p_dep",          "epsilon",
      "k_final",       "m_final",        "f_hat",       "f_ref",       "abs_err",        "rel_err",
      "width",         "d_k",            "outcome",     "false_stop",  "n_eval",         "seed",
      "cert_r_trunc",  "cert_r_stat",    "cert_delta_j", "cert_attempt", "cert_j_max",   "cert_conf_estimate",
      "cert_conf_m",   "cert_accepted",  "degenerate_bootstrap_count", "error"};
  return cols;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

inline std::string runs_csv(const std::vector<RunRecord>& records, const std::string& metadata) {
  std::ostringstream os;
  os << "# " << metadata << '\n' << join(runs_columns()) << '\n';
  for (const RunRecord& r : records) {
    std::vector<std::string> f = {std::to_string(r.run_id),
                                  to_string(r.rule),
                                  std::to_string(r.n),
                                  format_double(r.p_phi),
                                  format_double(r.p_dep),
                                  format_double(r.epsilon),
                                  std::to_string(r.k_final),
                                  std::to_string(r.m_final),
                                  format_double(r.f_hat),
                                  format_double(r.f_ref),
                                  format_double(r.abs_err),
                                  format_double(r.rel_err),
                                  format_double(r.width),
                                  r.d_k.is_infinite() ? "inf" : format_double(r.d_k.value()),
                                  to_string(r.outcome),
                                  r.false_stop ? "1" : "0",
                                  std::to_string(r.n_eval),
                                  std::to_string(r.seed)};
    if (r.certificate) {
      const CertificateRecord& c = *r.certificate;
      for (const std::string& s : {format_double(c.r_trunc), format_double(c.r_stat), format_double(c.delta_j),
                                   std::to_string(c.attempt_index), std::to_string(c.j_max),
                                   format_double(c.conf_estimate), std::to_string(c.conf_m),
                                   std::string(c.accepted ? "1" : "0")}) {
        f.push_back(s);
      }
    } else {
      for (int i = 0; i < 8; ++i) f.emplace_back();
    }
    f.push_back(std::to_string(r.degenerate_bootstrap_count));
    f.push_back(csv_safe(r.error));
    os << join(f) << '\n';
  }
  return os.str();
}

inline std::vector<RunRecord> parse_runs(const CsvTable& t) {
  std::vector<std::size_t> idx;
  for (const std::string& c : runs_columns()) idx.push_back(t.column(c));
  std::vector<RunRecord> out;
  for (const auto& row : t.rows) {
    auto at = [&](std::size_t i) -> const std::string& { return row[idx[i]]; };
    RunRecord r;
    r.run_id = parse_int<long long>(at(0));
    r.rule = parse_rule(at(1));
    r.n = parse_int<int>(at(2));
    r.p_phi = parse_double(at(3));
    r.p_dep = parse_double(at(4));
    r.epsilon = parse_double(at(5));
    r.k_final = parse_int<int>(at(6));
    r.m_final = parse_int<std::size_t>(at(7));
    r.f_hat = parse_double(at(8));
    r.f_ref = parse_double(at(9));
    r.abs_err = parse_double(at(10));
    r.rel_err = parse_double(at(11));
    r.width = parse_double(at(12));
    r.d_k = at(13) == "inf" ? Stability::infinite() : Stability::of(parse_double(at(13)));
    r.outcome = parse_outcome(at(14));
    r.false_stop = at(15) == "1";
    r.n_eval = parse_int<int>(at(16));
    r.seed = parse_int<std::uint64_t>(at(17));
    if (!at(18).empty()) {
      CertificateRecord c;
      c.r_trunc = parse_double(at(18));
      c.r_stat = parse_double(at(19));
      c.delta_j = parse_double(at(20));
      c.attempt_index = parse_int<int>(at(21));
      c.j_max = parse_int<int>(at(22));
      c.conf_estimate = parse_double(at(23));
      c.conf_m = parse_int<std::size_t>(at(24));
      c.accepted = at(25) == "1";
      r.certificate = c;
    }
    r.degenerate_bootstrap_count = parse_int<int>(at(26));
    r.error = at(27);
    out.push_back(std::move(r));
  }
  return out;
}

// summary.csv

inline std::string summary_csv(const std::vector<SummaryRow>& rows, const std::string& metadata) {
  std::ostringstream os;
  os << "# " << metadata << '\n'
     << "rule,n,p_phi,runs,successes,false_stops,fsr,fsr_lower,fsr_upper,sr,sr_lower,sr_upper,sp,"
        "median_abs_err,median_m_final,iqr_m_final\n";
  for (const SummaryRow& s : rows) {
    os << join({to_string(s.rule), std::to_string(s.n), format_double(s.p_phi), std::to_string(s.runs),
                std::to_string(s.successes), std::to_string(s.false_stops), format_double(s.fsr),
                format_double(s.fsr_lower), format_double(s.fsr_upper), format_double(s.sr), format_double(s.sr_lower),
                format_double(s.sr_upper), s.sp ? format_double(*s.sp) : "na", format_double(s.median_abs_err),
                format_double(s.median_m_final), format_double(s.iqr_m_final)})
       << '\n';
  }
  return os.str();
}

/// Human-readable table for the terminal.
inline std::string summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "rule" << std::setw(4) << "n" << std::setw(7) << "p_phi" << std::setw(6)
     << "runs" << std::setw(22) << "FSR [95% CI]" << std::setw(22) << "SR [95% CI]" << std::setw(7) << "SP"
     << std::setw(12) << "med|err|" << "med M\n";
  os << std::fixed;
  for (const SummaryRow& s : rows) {
    std::ostringstream fsr;
    std::ostringstream sr;
    fsr << std::fixed << std::setprecision(2) << s.fsr << " [" << s.fsr_lower << "," << s.fsr_upper << "]";
    sr << std::fixed << std::setprecision(2) << s.sr << " [" << s.sr_lower << "," << s.sr_upper << "]";
    std::ostringstream sp;
    if (s.sp) {
      sp << std::fixed << std::setprecision(2) << *s.sp;
    } else {
      sp << "na";
    }
    os << std::setw(24) << to_string(s.rule) << std::setw(4) << s.n << std::setw(7) << std::setprecision(2)
       << s.p_phi << std::setw(6) << s.runs << std::setw(22) << fsr.str() << std::setw(22) << sr.str()
       << std::setw(7) << sp.str() << std::setw(12) << std::setprecision(4) << s.median_abs_err
       << std::setprecision(0) << s.median_m_final << '\n';
  }
  return os.str();
}

// calibration.csv

inline std::string calibration_csv(const CalibrationTable& table, const std::string& metadata) {
  std::ostringstream os;
  os << "# " << metadata << '\n' << "n,p_phi,p_dep,K,F_K,B_abs\n";
  for (const auto& r : table.rows()) {
    os << join({std::to_string(r.n), format_double(r.p_phi), format_double(r.p_dep), std::to_string(r.k),
                format_double(r.f_k), format_double(r.b_abs)})
       << '\n';
  }
  return os.str();
}

inline CalibrationTable parse_calibration(const CsvTable& t) {
  const std::size_t cn = t.column("n");
  const std::size_t cp = t.column("p_phi");
  const std::size_t cd = t.column("p_dep");
  const std::size_t ck = t.column("K");
  const std::size_t cf = t.column("F_K");
  const std::size_t cb = t.column("B_abs");
  CalibrationTable table;
  for (const auto& row : t.rows) {
    table.add({parse_int<int>(row[cn]), parse_double(row[cp]), parse_double(row[cd]), parse_int<int>(row[ck]),
               parse_double(row[cf]), parse_double(row[cb])});
  }
  return table;
}

// ablation.csv

inline std::string ablation_csv(const std::vector<AblationCell>& cells, const std::string& metadata) {
  std::ostringstream os;
  os << "# " << metadata << '\n'
     << "k_min_stop,m_min_stop,patience,runs,successes,false_stops,fsr,fsr_lower,fsr_upper,sr,is_default\n";
  for (const AblationCell& c : cells) {
    os << join({std::to_string(c.k_min_stop), std::to_string(c.m_min_stop), std::to_string(c.patience),
                std::to_string(c.runs), std::to_string(c.successes), std::to_string(c.false_stops),
                format_double(c.fsr), format_double(c.fsr_lower), format_double(c.fsr_upper), format_double(c.sr),
                c.is_default ? "1" : "0"})
       << '\n';
  }
  return os.str();
}

// trajectories.csv: one row per controller step

inline std::string trajectories_csv(const std::vector<RunRecord>& records,
                                    const std::vector<std::vector<TrajectoryStep>>& steps,
                                    const std::string& metadata) {
  std::ostringstream os;
  os << "# " << metadata << '\n'
     << "run_id,rule,p_phi,iteration,k,m,f_hat,boot_lower,boot_upper,width,d_k,eligible_k,eligible_m,krylov_gate,"
        "sampling_gate,patience,action,error\n";
  for (std::size_t i = 0; i < records.size() && i < steps.size(); ++i) {
    for (const TrajectoryStep& s : steps[i]) {
      os << join({std::to_string(records[i].run_id), to_string(records[i].rule), format_double(records[i].p_phi),
                  std::to_string(s.iteration), std::to_string(s.k), std::to_string(s.m), format_double(s.bundle.f_hat),
                  format_double(s.bundle.boot_lower), format_double(s.bundle.boot_upper), format_double(s.bundle.width),
                  s.bundle.d_k.is_infinite() ? "inf" : format_double(s.bundle.d_k.value()),
                  s.gate_trace.eligible_k ? "1" : "0", s.gate_trace.eligible_m ? "1" : "0",
                  s.gate_trace.krylov_gate ? "1" : "0", s.gate_trace.sampling_gate ? "1" : "0",
                  std::to_string(s.gate_trace.patience_count), to_string(s.action), csv_safe(s.error)})
         << '\n';
    }
  }
  return os.str();
}

}  // namespace aksqfi
