#pragma once

// Classical shadows from random local Pauli measurements.
//
// Each shot picks a uniform basis in {X, Y, Z} per qubit, samples the full
// 2^n outcome distribution of the rotated state exactly, and inverts the
// measurement channel factor by factor: (x)_j (3 |phi_j><phi_j| - I).
//
// A shot is stored as a base-6 type code (3 bases x 2 outcomes per qubit).
// Shots with the same code have the same snapshot matrix, so means and
// bootstrap resamples are weighted sums over the distinct codes present.
// Types are numbered in order of first appearance, which makes any prefix
// use a leading block of the type table.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "aksqfi/linalg.hpp"
#include "aksqfi/rng.hpp"

namespace aksqfi {

enum class PauliBasis : std::uint8_t { X = 0, Y = 1, Z = 2 };

struct Snapshot {
  std::vector<PauliBasis> bases;
  std::vector<std::uint8_t> outcomes;
  ComplexMatrix snapshot_matrix;
};

namespace shadow_detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

/// Row o of the measurement rotation is <phi_o| for the given basis.
inline std::array<Complex, 4> rotation(PauliBasis b) {
  switch (b) {
    case PauliBasis::X:
      return {kInvSqrt2, kInvSqrt2, kInvSqrt2, -kInvSqrt2};
    case PauliBasis::Y:
      return {kInvSqrt2, Complex(0.0, -kInvSqrt2), kInvSqrt2, Complex(0.0, kInvSqrt2)};
    case PauliBasis::Z:
    default:
      return {1.0, 0.0, 0.0, 1.0};
  }
}

/// 3 |phi_o><phi_o| - I, row-major 2x2.
inline std::array<Complex, 4> inverted_factor(PauliBasis b, std::uint8_t outcome) {
  const std::array<Complex, 4> w = rotation(b);
  const Complex a0 = std::conj(w[2 * outcome]);
  const Complex a1 = std::conj(w[2 * outcome + 1]);
  return {3.0 * a0 * std::conj(a0) - 1.0, 3.0 * a0 * std::conj(a1), 3.0 * a1 * std::conj(a0),
          3.0 * a1 * std::conj(a1) - 1.0};
}

inline std::uint32_t pow_u32(std::uint32_t base, int exp) {
  std::uint32_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// Per-qubit symbol in [0, 6): basis * 2 + outcome. Qubit 0 is the most
/// significant base-6 digit.
inline std::vector<std::uint8_t> decode_symbols(std::uint32_t code, int n) {
  std::vector<std::uint8_t> sym(static_cast<std::size_t>(n));
  for (int q = n - 1; q >= 0; --q) {
    sym[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(code % 6);
    code /= 6;
  }
  return sym;
}

/// Writes the (column-major) snapshot matrix of a type code into `out`.
inline void expand_snapshot(std::uint32_t code, int n, Complex* out) {
  const std::vector<std::uint8_t> sym = decode_symbols(code, n);
  std::vector<std::array<Complex, 4>> factors;
  factors.reserve(sym.size());
  for (std::uint8_t s : sym) factors.push_back(inverted_factor(static_cast<PauliBasis>(s / 2), s % 2));
  const Eigen::Index dim = Eigen::Index{1} << n;
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) {
      Complex v(1.0, 0.0);
      for (int q = 0; q < n; ++q) {
        const int shift = n - 1 - q;
        const int rb = static_cast<int>((r >> shift) & 1);
        const int cb = static_cast<int>((c >> shift) & 1);
        v *= factors[static_cast<std::size_t>(q)][2 * rb + cb];
      }
      out[c * dim + r] = v;
    }
  }
}

/// diag(W rho W^dagger) for W = (x)_q rotation(bases[q]), applied qubit by qubit.
inline std::vector<double> outcome_probabilities(const ComplexMatrix& rho,
                                                 const std::vector<PauliBasis>& bases) {
  const int n = static_cast<int>(bases.size());
  ComplexMatrix m = rho;
  const Eigen::Index dim = m.rows();
  for (int q = 0; q < n; ++q) {
    if (bases[static_cast<std::size_t>(q)] == PauliBasis::Z) continue;
    const std::array<Complex, 4> w = rotation(bases[static_cast<std::size_t>(q)]);
    const Eigen::Index mask = Eigen::Index{1} << (n - 1 - q);
    for (Eigen::Index r0 = 0; r0 < dim; ++r0) {
      if (r0 & mask) continue;
      const Eigen::Index r1 = r0 | mask;
      for (Eigen::Index c = 0; c < dim; ++c) {
        const Complex a = m(r0, c);
        const Complex b = m(r1, c);
        m(r0, c) = w[0] * a + w[1] * b;
        m(r1, c) = w[2] * a + w[3] * b;
      }
    }
    for (Eigen::Index c0 = 0; c0 < dim; ++c0) {
      if (c0 & mask) continue;
      const Eigen::Index c1 = c0 | mask;
      for (Eigen::Index r = 0; r < dim; ++r) {
        const Complex a = m(r, c0);
        const Complex b = m(r, c1);
        m(r, c0) = a * std::conj(w[0]) + b * std::conj(w[1]);
        m(r, c1) = a * std::conj(w[2]) + b * std::conj(w[3]);
      }
    }
  }
  std::vector<double> p(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] = std::max(m(i, i).real(), 0.0);
  return p;
}

/// Inverse-CDF draw; u in [0, 1).
inline std::uint32_t sample_index(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  const auto idx = static_cast<std::size_t>(it - cumulative.begin());
  return static_cast<std::uint32_t>(std::min(idx, cumulative.size() - 1));
}

inline constexpr std::size_t kMaterializeBudget = std::size_t{1} << 23;  // complex entries

}  // namespace shadow_detail

inline ComplexMatrix snapshot_matrix(const std::vector<PauliBasis>& bases,
                                     const std::vector<std::uint8_t>& outcomes) {
  if (bases.size() != outcomes.size() || bases.empty()) {
    throw ValidationError("snapshot_matrix: bases and outcomes must have equal non-zero length");
  }
  ComplexMatrix out = ComplexMatrix::Ones(1, 1);
  for (std::size_t q = 0; q < bases.size(); ++q) {
    const auto f = shadow_detail::inverted_factor(bases[q], outcomes[q]);
    ComplexMatrix local(2, 2);
    local << f[0], f[1], f[2], f[3];
    out = kron(out, local);
  }
  return out;
}

/// Measures rho once in the given product basis; `u` is the uniform draw that
/// selects the outcome bitstring.
inline Snapshot measure_in_basis(const DensityMatrix& rho, const std::vector<PauliBasis>& bases, double u) {
  const int n = rho.n_qubits();
  if (n < 1 || static_cast<int>(bases.size()) != n) {
    throw ValidationError("measure_in_basis: basis list does not match the qubit count");
  }
  std::vector<double> cdf = shadow_detail::outcome_probabilities(rho.matrix(), bases);
  for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
  const std::uint32_t bits = shadow_detail::sample_index(cdf, u);
  Snapshot s;
  s.bases = bases;
  s.outcomes.resize(bases.size());
  for (int q = 0; q < n; ++q) s.outcomes[static_cast<std::size_t>(q)] = (bits >> (n - 1 - q)) & 1U;
  s.snapshot_matrix = snapshot_matrix(s.bases, s.outcomes);
  return s;
}

class ShadowBatch {
 public:
  int n_qubits() const { return n_qubits_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return codes_.size(); }
  Eigen::Index dim() const { return Eigen::Index{1} << n_qubits_; }

  const std::vector<std::uint32_t>& codes() const { return codes_; }
  /// Index into the distinct-type table for every shot.
  const std::vector<std::uint32_t>& type_of_shot() const { return type_of_shot_; }
  std::size_t distinct_types() const { return type_codes_.size(); }
  /// Number of distinct types that occur in the first m shots.
  std::size_t types_in_prefix(std::size_t m) const { return m == 0 ? 0 : prefix_types_[m - 1]; }

  Snapshot snapshot(std::size_t shot) const {
    const std::vector<std::uint8_t> sym = shadow_detail::decode_symbols(codes_.at(shot), n_qubits_);
    Snapshot s;
    for (std::uint8_t v : sym) {
      s.bases.push_back(static_cast<PauliBasis>(v / 2));
      s.outcomes.push_back(static_cast<std::uint8_t>(v % 2));
    }
    s.snapshot_matrix = snapshot_matrix(s.bases, s.outcomes);
    return s;
  }

  /// sum_t weights[t] * S_t / total over the first weights.size() types.
  ComplexMatrix weighted_mean(const std::vector<double>& weights, double total) const {
    const Eigen::Index dim = this->dim();
    const auto used = static_cast<Eigen::Index>(weights.size());
    ComplexVector flat;
    if (table_) {
      const Eigen::Map<const Eigen::VectorXd> w(weights.data(), used);
      flat = table_->leftCols(used) * w.cast<Complex>();
    } else {
      flat = ComplexVector::Zero(dim * dim);
      ComplexVector scratch(dim * dim);
      for (Eigen::Index t = 0; t < used; ++t) {
        if (weights[static_cast<std::size_t>(t)] == 0.0) continue;
        shadow_detail::expand_snapshot(type_codes_[static_cast<std::size_t>(t)], n_qubits_, scratch.data());
        flat += weights[static_cast<std::size_t>(t)] * scratch;
      }
    }
    flat /= total;
    return Eigen::Map<const ComplexMatrix>(flat.data(), dim, dim);
  }

  /// Per-type shot counts over the first m shots.
  std::vector<double> prefix_counts(std::size_t m) const {
    std::vector<double> counts(types_in_prefix(m), 0.0);
    for (std::size_t i = 0; i < m; ++i) counts[type_of_shot_[i]] += 1.0;
    return counts;
  }

  friend ShadowBatch draw_snapshots(const DensityMatrix& rho, std::size_t m, std::uint64_t seed);
  friend ShadowBatch make_batch_from_codes(int n_qubits, std::uint64_t seed, std::vector<std::uint32_t> codes);

 private:
  void index_types() {
    std::unordered_map<std::uint32_t, std::uint32_t> seen;
    type_of_shot_.resize(codes_.size());
    prefix_types_.resize(codes_.size());
    for (std::size_t i = 0; i < codes_.size(); ++i) {
      auto [it, inserted] = seen.try_emplace(codes_[i], static_cast<std::uint32_t>(type_codes_.size()));
      if (inserted) type_codes_.push_back(codes_[i]);
      type_of_shot_[i] = it->second;
      prefix_types_[i] = type_codes_.size();
    }
    const Eigen::Index dim = this->dim();
    const auto entries = static_cast<std::size_t>(dim * dim);
    if (entries * type_codes_.size() <= shadow_detail::kMaterializeBudget) {
      auto table = std::make_shared<ComplexMatrix>(dim * dim, static_cast<Eigen::Index>(type_codes_.size()));
      for (std::size_t t = 0; t < type_codes_.size(); ++t) {
        shadow_detail::expand_snapshot(type_codes_[t], n_qubits_, table->col(static_cast<Eigen::Index>(t)).data());
      }
      table_ = std::move(table);
    }
  }

  int n_qubits_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint32_t> codes_;
  std::vector<std::uint32_t> type_of_shot_;
  std::vector<std::size_t> prefix_types_;
  std::vector<std::uint32_t> type_codes_;
  std::shared_ptr<const ComplexMatrix> table_;  // flattened snapshot per type, immutable
};

/// Builds a batch from explicit type codes (tests and replay).
inline ShadowBatch make_batch_from_codes(int n_qubits, std::uint64_t seed, std::vector<std::uint32_t> codes) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw ValidationError("make_batch_from_codes: bad qubit count");
  const std::uint32_t limit = shadow_detail::pow_u32(6, n_qubits);
  for (std::uint32_t c : codes) {
    if (c >= limit) throw ValidationError("make_batch_from_codes: code out of range");
  }
  ShadowBatch b;
  b.n_qubits_ = n_qubits;
  b.seed_ = seed;
  b.codes_ = std::move(codes);
  b.index_types();
  return b;
}

/// Draws m shots. Shot i depends only on (seed, i), so a smaller m with the
/// same seed yields a prefix of a larger batch.
inline ShadowBatch draw_snapshots(const DensityMatrix& rho, std::size_t m, std::uint64_t seed) {
  const int n = rho.n_qubits();
  if (n < 1) throw ValidationError("draw_snapshots: state dimension is not a power of two");
  if (n > kMaxQubits) throw ValidationError("draw_snapshots: more than 12 qubits");
  if (m == 0) throw ValidationError("draw_snapshots: need at least one shot");

  std::unordered_map<std::uint32_t, std::vector<double>> cdf_by_setting;
  std::vector<std::uint32_t> codes(m);
  std::vector<PauliBasis> bases(static_cast<std::size_t>(n));
  for (std::size_t shot = 0; shot < m; ++shot) {
    Stream rng(seed, shot);
    std::uint32_t setting = 0;
    for (int q = 0; q < n; ++q) {
      const auto b = static_cast<std::uint32_t>(rng.below(3));
      bases[static_cast<std::size_t>(q)] = static_cast<PauliBasis>(b);
      setting = setting * 3 + b;
    }
    auto it = cdf_by_setting.find(setting);
    if (it == cdf_by_setting.end()) {
      std::vector<double> cdf = shadow_detail::outcome_probabilities(rho.matrix(), bases);
      for (std::size_t i = 1; i < cdf.size(); ++i) cdf[i] += cdf[i - 1];
      it = cdf_by_setting.emplace(setting, std::move(cdf)).first;
    }
    const std::uint32_t bits = shadow_detail::sample_index(it->second, rng.uniform());
    std::uint32_t code = 0;
    for (int q = 0; q < n; ++q) {
      const std::uint32_t bit = (bits >> (n - 1 - q)) & 1U;
      code = code * 6 + static_cast<std::uint32_t>(bases[static_cast<std::size_t>(q)]) * 2 + bit;
    }
    codes[shot] = code;
  }
  ShadowBatch batch;
  batch.n_qubits_ = n;
  batch.seed_ = seed;
  batch.codes_ = std::move(codes);
  batch.index_types();
  return batch;
}

/// Arithmetic mean of the first m_prefix snapshots. Hermitian with unit trace,
/// generally not PSD.
inline ComplexMatrix mean_estimate(const ShadowBatch& batch, std::size_t m_prefix) {
  if (m_prefix == 0) throw ValidationError("mean_estimate: empty prefix");
  if (m_prefix > batch.size()) throw ValidationError("mean_estimate: prefix longer than the batch");
  return batch.weighted_mean(batch.prefix_counts(m_prefix), static_cast<double>(m_prefix));
}

/// Bootstrap replicate b as per-type counts over the prefix; equivalent to
/// resample_bootstrap()[b] but without materializing the index list.
inline std::vector<double> bootstrap_type_counts(const ShadowBatch& batch, std::size_t m_prefix,
                                                 std::uint64_t seed, std::uint64_t replicate) {
  std::vector<double> counts(batch.types_in_prefix(m_prefix), 0.0);
  Stream rng(seed, replicate);
  const auto& type_of = batch.type_of_shot();
  for (std::size_t i = 0; i < m_prefix; ++i) counts[type_of[rng.below(m_prefix)]] += 1.0;
  return counts;
}

/// b_replicates index multisets, each of size m_prefix, drawn uniformly with
/// replacement from [0, m_prefix).
inline std::vector<std::vector<std::uint32_t>> resample_bootstrap(const ShadowBatch& batch, std::size_t m_prefix,
                                                                  std::size_t b_replicates, std::uint64_t seed) {
  if (m_prefix == 0 || m_prefix > batch.size()) {
    throw ValidationError("resample_bootstrap: prefix must be in [1, batch size]");
  }
  std::vector<std::vector<std::uint32_t>> out(b_replicates);
  for (std::size_t b = 0; b < b_replicates; ++b) {
    Stream rng(seed, b);
    out[b].resize(m_prefix);
    for (auto& idx : out[b]) idx = static_cast<std::uint32_t>(rng.below(m_prefix));
  }
  return out;
}

}  // namespace aksqfi
