#pragma once

// Noisy mixed-state benchmark family:
//   |psi_a> = exp(-i a H_ent) |+>^n,  H_ent = sum Z_j Z_{j+1} + 0.35 sum X_j
//   rho     = E_dep(p_dep) o E_deph(p_phi) (|psi_a><psi_a|)
//   G       = 1/2 sum Z_j + 0.08 sum X_j X_{j+1}
// Qubit 0 is the leftmost tensor factor. theta is fixed at 0.

#include <cmath>
#include <cstdint>

#include "aksqfi/linalg.hpp"
#include "aksqfi/qfi.hpp"

namespace aksqfi {

inline constexpr double kEntanglerFieldWeight = 0.35;
inline constexpr double kGeneratorCouplingWeight = 0.08;
inline constexpr double kDefaultEntanglingAngle = 0.25;

struct NoiseConfig {
  int n_qubits = 4;
  double p_phi = 0.0;
  double p_dep = 0.03;
  double alpha = kDefaultEntanglingAngle;

  void validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw ValidationError("NoiseConfig: n_qubits must be in [1, 12]");
    }
    if (!(p_phi >= 0.0 && p_phi <= 1.0)) throw ValidationError("NoiseConfig: p_phi outside [0,1]");
    if (!(p_dep >= 0.0 && p_dep <= 1.0)) throw ValidationError("NoiseConfig: p_dep outside [0,1]");
    if (!std::isfinite(alpha)) throw ValidationError("NoiseConfig: alpha must be finite");
  }
};

struct BenchmarkInstance {
  DensityMatrix rho;
  HermitianOperator generator;
  NoiseConfig config;
  double f_ref = 0.0;
};

inline HermitianOperator build_entangling_hamiltonian(int n) {
  const Eigen::Index dim = Eigen::Index{1} << n;
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  for (int j = 0; j + 1 < n; ++j) {
    h += pauli::embed(pauli::z(), j, n) * pauli::embed(pauli::z(), j + 1, n);
  }
  for (int j = 0; j < n; ++j) h += kEntanglerFieldWeight * pauli::embed(pauli::x(), j, n);
  return HermitianOperator(h);
}

inline ComplexVector build_entangled_state(const NoiseConfig& config) {
  config.validate();
  const int n = config.n_qubits;
  const Eigen::Index dim = Eigen::Index{1} << n;
  const ComplexVector plus = ComplexVector::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  if (config.alpha == 0.0) return plus;
  ComplexVector psi = expm_unitary(build_entangling_hamiltonian(n), config.alpha) * plus;
  return psi / psi.norm();
}

/// rho -> (1-p) rho + p Z_j rho Z_j for j = 0..n-1 in order. Z_j rho Z_j only
/// flips the sign of entries whose row and column differ in bit j.
inline DensityMatrix apply_dephasing(const DensityMatrix& rho, double p_phi) {
  if (!(p_phi >= 0.0 && p_phi <= 1.0)) throw ValidationError("apply_dephasing: p outside [0,1]");
  const int n = rho.n_qubits();
  if (n < 1) throw ValidationError("apply_dephasing: dimension is not a power of two");
  ComplexMatrix out = rho.matrix();
  const double damp = 1.0 - 2.0 * p_phi;
  for (int j = 0; j < n; ++j) {
    const Eigen::Index mask = Eigen::Index{1} << (n - 1 - j);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        if (((r ^ c) & mask) != 0) out(r, c) *= damp;
      }
    }
  }
  return DensityMatrix::trusted(std::move(out));
}

inline DensityMatrix apply_depolarizing(const DensityMatrix& rho, double p_dep) {
  if (!(p_dep >= 0.0 && p_dep <= 1.0)) throw ValidationError("apply_depolarizing: p outside [0,1]");
  const Eigen::Index dim = rho.dim();
  ComplexMatrix out = (1.0 - p_dep) * rho.matrix();
  out.diagonal().array() += p_dep / static_cast<double>(dim);
  return DensityMatrix::trusted(std::move(out));
}

inline HermitianOperator build_generator(int n) {
  if (n < 1 || n > kMaxQubits) throw ValidationError("build_generator: n must be in [1, 12]");
  const Eigen::Index dim = Eigen::Index{1} << n;
  ComplexMatrix g = ComplexMatrix::Zero(dim, dim);
  for (int j = 0; j < n; ++j) g += 0.5 * pauli::embed(pauli::z(), j, n);
  for (int j = 0; j + 1 < n; ++j) {
    g += kGeneratorCouplingWeight * pauli::embed(pauli::x(), j, n) * pauli::embed(pauli::x(), j + 1, n);
  }
  return HermitianOperator(g);
}

/// Builds rho and G and fills f_ref with the exact spectral QFI at theta = 0.
inline BenchmarkInstance build_instance(const NoiseConfig& config) {
  config.validate();
  const DensityMatrix pure = DensityMatrix::from_pure(build_entangled_state(config));
  DensityMatrix rho = apply_depolarizing(apply_dephasing(pure, config.p_phi), config.p_dep);
  HermitianOperator g = build_generator(config.n_qubits);
  const double f_ref = qfi_spectral(rho, g);
  return BenchmarkInstance{std::move(rho), std::move(g), config, f_ref};
}

}  // namespace aksqfi
