#pragma once

// Krylov subspace K_K(G, v0) = span{v0, G v0, ..., G^(K-1) v0} and the
// projected QFI functional: F_K = Tr(V^dag rho V) * F(rho_K; V^dag G V).

#include <cmath>
#include <vector>

#include "aksqfi/benchmark_family.hpp"
#include "aksqfi/linalg.hpp"
#include "aksqfi/qfi.hpp"

namespace aksqfi {

inline constexpr double kBreakdownTolerance = 1e-12;  // relative to ||G||
inline constexpr double kMinRetainedTrace = 1e-12;

struct KrylovBasis {
  ComplexMatrix columns;  // dim x r, orthonormal
  int requested_order = 0;
  int effective_rank = 0;
  ComplexVector seed_vector;
};

struct ProjectedPair {
  DensityMatrix rho_k;
  HermitianOperator g_k;
  double retained_trace = 0.0;
};

/// Rescales v so that its first entry with modulus above 1e-12 is real positive.
inline ComplexVector fix_phase(ComplexVector v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > 1e-12) {
      v *= std::conj(v(i)) / a;
      v(i) = Complex(v(i).real(), 0.0);
      break;
    }
  }
  return v;
}

/// Eigenvector of the largest eigenvalue of a Hermitian matrix. Ties go to
/// the last column returned by the solver.
inline ComplexVector dominant_eigvec_seed(const ComplexMatrix& hermitian) {
  const SpectralDecomposition sd = eig_hermitian(hermitize(hermitian));
  const ComplexVector v = sd.eigenvectors.col(sd.eigenvectors.cols() - 1);
  return fix_phase(v / v.norm());
}

inline ComplexVector dominant_eigvec_seed(const DensityMatrix& rho) { return dominant_eigvec_seed(rho.matrix()); }

/// Arnoldi-style modified Gram-Schmidt with one reorthogonalization pass.
/// A candidate whose residual falls below 1e-12 * ||G|| ends the basis: the
/// span is then G-invariant and later powers add nothing.
inline KrylovBasis build_basis(const HermitianOperator& g, const ComplexVector& v0, int k, double g_norm) {
  if (k < 1) throw ValidationError("build_basis: order must be >= 1");
  if (v0.size() != g.dim()) throw ValidationError("build_basis: seed vector dimension mismatch");
  const double n0 = v0.norm();
  if (!(n0 > 0.0) || !std::isfinite(n0)) throw ValidationError("build_basis: seed vector must be non-zero");

  const Eigen::Index dim = g.dim();
  const int max_rank = static_cast<int>(std::min<Eigen::Index>(k, dim));
  ComplexMatrix q(dim, max_rank);
  q.col(0) = v0 / n0;
  int rank = 1;
  const double tol = kBreakdownTolerance * g_norm;
  while (rank < max_rank) {
    ComplexVector w = g.matrix() * q.col(rank - 1);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < rank; ++j) w -= q.col(j).dot(w) * q.col(j);
    }
    const double r = w.norm();
    if (!(r > tol)) break;
    q.col(rank) = w / r;
    ++rank;
  }
  return KrylovBasis{q.leftCols(rank), k, rank, q.col(0)};
}

inline KrylovBasis build_basis(const HermitianOperator& g, const ComplexVector& v0, int k) {
  return build_basis(g, v0, k, spectral_norm(g));
}

inline KrylovBasis full_space_basis(Eigen::Index dim, int requested_order) {
  ComplexVector e0 = ComplexVector::Zero(dim);
  e0(0) = 1.0;
  return KrylovBasis{ComplexMatrix::Identity(dim, dim), requested_order, static_cast<int>(dim), e0};
}

inline ProjectedPair project_pair(const KrylovBasis& basis, const ComplexMatrix& rho_like, const HermitianOperator& g) {
  check_square(rho_like, "project_pair");
  if (rho_like.rows() != basis.columns.rows() || g.dim() != basis.columns.rows()) {
    throw ValidationError("project_pair: dimension mismatch");
  }
  if (hermitian_defect(rho_like) > kHermitizeTolerance) {
    throw ValidationError("project_pair: input is not Hermitian within 1e-9");
  }
  const ComplexMatrix& v = basis.columns;
  const ComplexMatrix raw = hermitize(v.adjoint() * hermitize(rho_like) * v);
  const double retained = raw.trace().real();
  if (!(retained > kMinRetainedTrace)) {
    throw DegenerateInputError("project_pair: retained trace " + std::to_string(retained) + " is not positive");
  }
  DensityMatrix rho_k = project_to_density_cone(raw / retained);
  HermitianOperator g_k(hermitize(v.adjoint() * g.matrix() * v));
  return ProjectedPair{std::move(rho_k), std::move(g_k), retained};
}

namespace krylov_detail {

/// QFI of cone(raw / tr raw) under generator g_sub, times tr(raw). In the
/// eigenbasis of the state, (d rho)_jk = -i g_jk (l_k - l_j), so the spectral
/// sum needs only one eigendecomposition.
inline double weighted_projected_qfi(const ComplexMatrix& raw, const ComplexMatrix& g_sub) {
  const ComplexMatrix h = hermitize(raw);
  const double retained = h.trace().real();
  if (!(retained > kMinRetainedTrace)) {
    throw DegenerateInputError("projected QFI: retained trace " + std::to_string(retained) + " is not positive");
  }
  if (h.rows() == 1) return 0.0;
  SpectralDecomposition sd = eig_hermitian(h);
  double total = 0.0;
  for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i) {
    sd.eigenvalues(i) = std::max(sd.eigenvalues(i), 0.0);
    total += sd.eigenvalues(i);
  }
  if (!(total > 0.0)) throw DegenerateInputError("projected QFI: no positive spectrum");
  const RealVector lam = sd.eigenvalues / total;
  const ComplexMatrix ge = sd.eigenvectors.adjoint() * g_sub * sd.eigenvectors;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    for (Eigen::Index k = j + 1; k < lam.size(); ++k) {
      const double s = lam(j) + lam(k);
      if (s > kDefaultRankCutoff) {
        const double diff = lam(j) - lam(k);
        sum += std::norm(ge(j, k)) * diff * diff / s;
      }
    }
  }
  // Off-diagonal pairs appear twice in the full double sum.
  return retained * clamp_qfi(4.0 * sum);
}

}  // namespace krylov_detail

/// Projected QFI of rho_input on a prepared basis. A basis that spans the
/// whole space is treated as the identity projection.
inline double phi_on_basis(const ComplexMatrix& rho_input, const HermitianOperator& g, const KrylovBasis& basis) {
  if (basis.effective_rank == static_cast<int>(rho_input.rows())) {
    return krylov_detail::weighted_projected_qfi(rho_input, g.matrix());
  }
  const ComplexMatrix& v = basis.columns;
  return krylov_detail::weighted_projected_qfi(v.adjoint() * rho_input * v, v.adjoint() * g.matrix() * v);
}

/// F_K = retained trace x QFI of the projected pair, with v0 the dominant
/// eigenvector of seed_source. For k >= dim the Krylov space is the whole
/// space by definition, even if the sequence from v0 breaks down earlier.
inline double phi_k(const ComplexMatrix& rho_input, const HermitianOperator& g, int k, const DensityMatrix& seed_source) {
  check_square(rho_input, "phi_k");
  if (rho_input.rows() != g.dim() || seed_source.dim() != g.dim()) throw ValidationError("phi_k: dimension mismatch");
  if (hermitian_defect(rho_input) > kHermitizeTolerance) {
    throw ValidationError("phi_k: input is not Hermitian within 1e-9");
  }
  if (k < 1) throw ValidationError("phi_k: order must be >= 1");
  const KrylovBasis basis = k >= g.dim() ? full_space_basis(g.dim(), k)
                                         : build_basis(g, dominant_eigvec_seed(seed_source), k);
  return phi_on_basis(rho_input, g, basis);
}

struct PopulationRow {
  int k = 0;
  double f_k = 0.0;
  double b_abs = 0.0;
  int effective_rank = 0;
};

/// F_K on the exact state for K = 1..k_max with |B_K| = |F_K - F_ref|.
inline std::vector<PopulationRow> population_table(const BenchmarkInstance& instance, int k_max) {
  if (k_max < 1) throw ValidationError("population_table: k_max must be >= 1");
  const HermitianOperator& g = instance.generator;
  const ComplexVector v0 = dominant_eigvec_seed(instance.rho);
  const double g_norm = spectral_norm(g);
  std::vector<PopulationRow> rows;
  rows.reserve(static_cast<std::size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) {
    const KrylovBasis basis = k >= g.dim() ? full_space_basis(g.dim(), k) : build_basis(g, v0, k, g_norm);
    const double f = phi_on_basis(instance.rho.matrix(), g, basis);
    rows.push_back(PopulationRow{k, f, std::abs(f - instance.f_ref), basis.effective_rank});
  }
  return rows;
}

}  // namespace aksqfi
