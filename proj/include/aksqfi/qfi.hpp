#pragma once

// Exact quantum Fisher information for the unitary encoding rho_theta =
// exp(-iG theta) rho exp(iG theta) at theta = 0.

#include <cmath>
#include <string>

#include "aksqfi/linalg.hpp"

namespace aksqfi {

/// Pairs with lambda_j + lambda_k at or below this are dropped from the
/// spectral sum.
inline constexpr double kDefaultRankCutoff = 1e-10;
inline constexpr double kQfiClampTolerance = 1e-9;

inline double clamp_qfi(double value) {
  if (value < -kQfiClampTolerance) {
    throw DegenerateInputError("QFI evaluated to a negative value " + std::to_string(value));
  }
  return value < 0.0 ? 0.0 : value;
}

/// d rho / d theta at theta = 0, i.e. -i [G, rho]. Hermitian and traceless.
inline ComplexMatrix drho(const ComplexMatrix& rho, const ComplexMatrix& g) {
  if (rho.rows() != g.rows() || rho.cols() != g.cols()) {
    throw ValidationError("drho: dimension mismatch between state and generator");
  }
  const Complex minus_i(0.0, -1.0);
  return minus_i * (g * rho - rho * g);
}

inline ComplexMatrix drho(const DensityMatrix& rho, const HermitianOperator& g) {
  return drho(rho.matrix(), g.matrix());
}

/// F = 2 sum_{l_j + l_k > cutoff} |<j| d rho |k>|^2 / (l_j + l_k).
inline double qfi_spectral(const DensityMatrix& rho, const HermitianOperator& g,
                           double cutoff = kDefaultRankCutoff) {
  const ComplexMatrix d = drho(rho, g);
  const SpectralDecomposition sd = eig_hermitian(rho.matrix());
  const ComplexMatrix d_eig = sd.eigenvectors.adjoint() * d * sd.eigenvectors;
  const RealVector& lam = sd.eigenvalues;
  double total = 0.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      const double s = lam(j) + lam(k);
      if (s > cutoff) total += std::norm(d_eig(j, k)) / s;
    }
  }
  return clamp_qfi(2.0 * total);
}

/// 4 Var_psi(G) for a normalized pure state.
inline double qfi_pure(const ComplexVector& psi, const HermitianOperator& g) {
  if (psi.size() != g.dim()) throw ValidationError("qfi_pure: dimension mismatch");
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw ValidationError("qfi_pure: state is not normalized");
  const ComplexVector g_psi = g.matrix() * psi;
  const double second = g_psi.squaredNorm();
  const double first = psi.dot(g_psi).real();
  return clamp_qfi(4.0 * (second - first * first));
}

/// Symmetric logarithmic derivative: L_jk = 2 (d rho)_jk / (l_j + l_k) in the
/// eigenbasis of rho, zero where l_j + l_k <= cutoff.
inline HermitianOperator sld(const DensityMatrix& rho, const HermitianOperator& g,
                             double cutoff = kDefaultRankCutoff) {
  const ComplexMatrix d = drho(rho, g);
  const SpectralDecomposition sd = eig_hermitian(rho.matrix());
  ComplexMatrix l_eig = sd.eigenvectors.adjoint() * d * sd.eigenvectors;
  const RealVector& lam = sd.eigenvalues;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      const double s = lam(j) + lam(k);
      l_eig(j, k) = s > cutoff ? 2.0 * l_eig(j, k) / s : Complex(0.0, 0.0);
    }
  }
  return HermitianOperator(sd.eigenvectors * l_eig * sd.eigenvectors.adjoint(), kHermitizeTolerance);
}

}  // namespace aksqfi
