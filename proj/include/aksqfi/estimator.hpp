#pragma once

// Plug-in estimate F_hat_{K,M} = Phi_K(rho_hat_M, G), the equal-tailed
// bootstrap interval and its width w_M, and the Krylov stability
// d_K = |F_hat_{K,M} - F_hat_{K-1,M}| on the same prefix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aksqfi/krylov.hpp"
#include "aksqfi/rng.hpp"
#include "aksqfi/shadow.hpp"

namespace aksqfi {

/// Where the Krylov seed vector v0 comes from on the estimator path.
enum class SeedSource { exact_state, shadow_estimate };

inline std::string to_string(SeedSource s) {
  return s == SeedSource::exact_state ? "exact_state" : "shadow_estimate";
}

inline SeedSource parse_seed_source(const std::string& s) {
  if (s == "exact_state") return SeedSource::exact_state;
  if (s == "shadow_estimate") return SeedSource::shadow_estimate;
  throw ConfigError("unknown seed_source '" + s + "' (expected exact_state or shadow_estimate)");
}

struct BootstrapConfig {
  int replicates = 200;
  double level = 0.90;
  std::uint64_t seed = 0;

  void validate() const {
    if (replicates < 50) throw ConfigError("bootstrap replicates must be >= 50");
    if (!(level > 0.5 && level < 1.0)) throw ConfigError("bootstrap level must be in (0.5, 1)");
  }
};

/// d_K, or the "force one Krylov increase" sentinel at K = 1.
class Stability {
 public:
  static Stability infinite() { return Stability(0.0, true); }
  static Stability of(double v) { return Stability(v, false); }

  bool is_infinite() const { return infinite_; }
  /// +inf for the sentinel, so comparisons against a tolerance fail naturally.
  double value() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

  bool operator==(const Stability& o) const { return infinite_ == o.infinite_ && value_ == o.value_; }

 private:
  Stability(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;
  int degenerate = 0;  // replicates imputed with the point estimate
};

struct EstimateBundle {
  double f_hat = 0.0;
  int k = 1;
  std::size_t m = 0;
  double boot_lower = 0.0;
  double boot_upper = 0.0;
  double width = 0.0;
  Stability d_k = Stability::infinite();
  double boot_level = 0.90;
  int degenerate_count = 0;

  /// max{d_K, w_M}; infinite while d_K is the sentinel.
  double severity() const { return std::max(d_k.value(), width); }
};

/// Linear-interpolation empirical quantile of sorted data, q in [0, 1].
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Equal-tailed interval at `level` from bootstrap replicate values.
inline Interval percentile_interval(std::vector<double> values, double level) {
  std::sort(values.begin(), values.end());
  const double alpha = 1.0 - level;
  Interval iv;
  iv.lower = quantile_sorted(values, alpha / 2.0);
  iv.upper = quantile_sorted(values, 1.0 - alpha / 2.0);
  iv.width = std::max(iv.upper - iv.lower, 0.0);
  return iv;
}

/// Evaluates Phi_K on shadow means of one generator. The mean is first
/// projected to the density cone in the full space, then compressed.
///
/// With SeedSource::exact_state the seed vector is fixed, so Krylov bases are
/// built once per order and cached; an instance is therefore not meant to be
/// shared between threads.
class PlugInEstimator {
 public:
  /// Seeds v0 from the cone-projected estimate at each evaluation.
  explicit PlugInEstimator(HermitianOperator g)
      : g_(std::move(g)), source_(SeedSource::shadow_estimate), g_norm_(spectral_norm(g_)) {}

  /// Seeds v0 from a known state (the noisy base state in the benchmark).
  PlugInEstimator(HermitianOperator g, const DensityMatrix& seed_state)
      : g_(std::move(g)),
        source_(SeedSource::exact_state),
        fixed_seed_(dominant_eigvec_seed(seed_state)),
        g_norm_(spectral_norm(g_)) {
    if (seed_state.dim() != g_.dim()) throw ValidationError("PlugInEstimator: seed state dimension mismatch");
  }

  const HermitianOperator& generator() const { return g_; }
  SeedSource seed_source() const { return source_; }

  /// Phi_K of an already cone-projected full-space state.
  double evaluate_projected(const DensityMatrix& rho_cone, int k) const {
    if (k < 1) throw ValidationError("estimate: order must be >= 1");
    if (k == 1) return 0.0;
    if (k >= g_.dim()) return phi_on_basis(rho_cone.matrix(), g_, full_space_basis(g_.dim(), k));
    if (source_ == SeedSource::exact_state) return phi_on_basis(rho_cone.matrix(), g_, cached_basis(k));
    return phi_on_basis(rho_cone.matrix(), g_, build_basis(g_, dominant_eigvec_seed(rho_cone), k, g_norm_));
  }

  double evaluate_mean(const ComplexMatrix& mean, int k) const {
    return evaluate_projected(project_to_density_cone(mean), k);
  }

  double estimate(const ShadowBatch& batch, int k, std::size_t m_prefix) const {
    check_batch(batch, m_prefix);
    return evaluate_mean(mean_estimate(batch, m_prefix), k);
  }

  Stability stability(const ShadowBatch& batch, int k, std::size_t m_prefix) const {
    check_batch(batch, m_prefix);
    if (k < 1) throw ValidationError("stability: order must be >= 1");
    if (k == 1) return Stability::infinite();
    const DensityMatrix rho_cone = project_to_density_cone(mean_estimate(batch, m_prefix));
    return Stability::of(std::abs(evaluate_projected(rho_cone, k) - evaluate_projected(rho_cone, k - 1)));
  }

  /// Replicate b resamples the prefix with Stream(stream_seed, b). A replicate
  /// whose projection degenerates is imputed with `point`.
  Interval bootstrap_interval(const ShadowBatch& batch, int k, std::size_t m_prefix, int replicates, double level,
                              std::uint64_t stream_seed, double point) const {
    check_batch(batch, m_prefix);
    if (m_prefix < 2) throw ValidationError("bootstrap_interval: need at least two snapshots");
    if (replicates < 1) throw ValidationError("bootstrap_interval: need at least one replicate");
    std::vector<double> values(static_cast<std::size_t>(replicates));
    int degenerate = 0;
    for (int b = 0; b < replicates; ++b) {
      const std::vector<double> w = bootstrap_type_counts(batch, m_prefix, stream_seed, static_cast<std::uint64_t>(b));
      try {
        values[static_cast<std::size_t>(b)] =
            evaluate_mean(batch.weighted_mean(w, static_cast<double>(m_prefix)), k);
      } catch (const DegenerateInputError&) {
        values[static_cast<std::size_t>(b)] = point;
        ++degenerate;
      }
    }
    Interval iv = percentile_interval(std::move(values), level);
    iv.degenerate = degenerate;
    return iv;
  }

  Interval bootstrap_interval(const ShadowBatch& batch, int k, std::size_t m_prefix, const BootstrapConfig& cfg) const {
    return bootstrap_interval(batch, k, m_prefix, cfg.replicates, cfg.level, cfg.seed, estimate(batch, k, m_prefix));
  }

  /// Point estimate, d_K and bootstrap interval from one pass over the prefix.
  EstimateBundle bundle(const ShadowBatch& batch, int k, std::size_t m_prefix, const BootstrapConfig& cfg) const {
    check_batch(batch, m_prefix);
    if (k < 1) throw ValidationError("bundle: order must be >= 1");
    const DensityMatrix rho_cone = project_to_density_cone(mean_estimate(batch, m_prefix));
    EstimateBundle out;
    out.k = k;
    out.m = m_prefix;
    out.boot_level = cfg.level;
    out.f_hat = evaluate_projected(rho_cone, k);
    out.d_k = k == 1 ? Stability::infinite()
                     : Stability::of(std::abs(out.f_hat - evaluate_projected(rho_cone, k - 1)));
    const Interval iv = bootstrap_interval(batch, k, m_prefix, cfg.replicates, cfg.level, cfg.seed, out.f_hat);
    out.boot_lower = iv.lower;
    out.boot_upper = iv.upper;
    out.width = iv.width;
    out.degenerate_count = iv.degenerate;
    return out;
  }

 private:
  void check_batch(const ShadowBatch& batch, std::size_t m_prefix) const {
    if (batch.dim() != g_.dim()) throw ValidationError("estimator: batch and generator dimensions differ");
    if (m_prefix == 0 || m_prefix > batch.size()) throw ValidationError("estimator: prefix outside [1, batch size]");
  }

  const KrylovBasis& cached_basis(int k) const {
    auto it = bases_.find(k);
    if (it == bases_.end()) it = bases_.emplace(k, build_basis(g_, *fixed_seed_, k, g_norm_)).first;
    return it->second;
  }

  HermitianOperator g_;
  SeedSource source_;
  std::optional<ComplexVector> fixed_seed_;
  double g_norm_;
  mutable std::map<int, KrylovBasis> bases_;
};

// Free-function forms. These seed v0 from the cone-projected shadow estimate,
// the only choice available without access to the underlying state.

inline double estimate(const ShadowBatch& batch, const HermitianOperator& g, int k, std::size_t m_prefix) {
  return PlugInEstimator(g).estimate(batch, k, m_prefix);
}

inline Interval bootstrap_interval(const ShadowBatch& batch, const HermitianOperator& g, int k, std::size_t m_prefix,
                                   const BootstrapConfig& cfg) {
  return PlugInEstimator(g).bootstrap_interval(batch, k, m_prefix, cfg);
}

inline Stability stability(const ShadowBatch& batch, const HermitianOperator& g, int k, std::size_t m_prefix) {
  return PlugInEstimator(g).stability(batch, k, m_prefix);
}

inline EstimateBundle bundle(const ShadowBatch& batch, const HermitianOperator& g, int k, std::size_t m_prefix,
                             const BootstrapConfig& cfg) {
  return PlugInEstimator(g).bundle(batch, k, m_prefix, cfg);
}

}  // namespace aksqfi
