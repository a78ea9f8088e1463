#pragma once

// Dense complex linear algebra on small Hilbert spaces (dimension <= 2^12).
//
// Matrices are Eigen dense types. HermitianOperator and DensityMatrix are thin
// validated wrappers: constructing one checks the invariant once, so code that
// receives them never re-validates.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <string>

#include "aksqfi/errors.hpp"

namespace aksqfi {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr int kMaxQubits = 12;
inline constexpr Eigen::Index kMaxDimension = Eigen::Index{1} << kMaxQubits;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;
/// Looser symmetry check for matrices that went through arithmetic
/// (shadow means, projected blocks) before being Hermitized.
inline constexpr double kHermitizeTolerance = 1e-9;

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

/// Largest entrywise |m - m^dagger|.
inline double hermitian_defect(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = r; c < m.cols(); ++c) {
      worst = std::max(worst, std::abs(m(r, c) - std::conj(m(c, r))));
    }
  }
  return worst;
}

inline ComplexMatrix hermitize(const ComplexMatrix& m) {
  return (m + m.adjoint()) * 0.5;
}

inline void check_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw ValidationError(std::string(what) + ": expected a non-empty square matrix, got " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (m.rows() > kMaxDimension) {
    throw ValidationError(std::string(what) + ": dimension " + std::to_string(m.rows()) +
                          " exceeds the dense limit 2^12");
  }
  if (!all_finite(m)) throw ValidationError(std::string(what) + ": non-finite entry");
}

/// Hermitian operator (generator, entangling Hamiltonian, projected block).
class HermitianOperator {
 public:
  HermitianOperator() = default;

  /// Validates Hermiticity within `tolerance` (entrywise absolute) and stores
  /// the exactly symmetrized matrix.
  explicit HermitianOperator(const ComplexMatrix& m, double tolerance = kHermitianTolerance) {
    check_square(m, "HermitianOperator");
    const double defect = hermitian_defect(m);
    if (defect > tolerance) {
      throw ValidationError("HermitianOperator: matrix is not Hermitian (defect " +
                            std::to_string(defect) + ")");
    }
    matrix_ = hermitize(m);
  }

  const ComplexMatrix& matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }

 private:
  ComplexMatrix matrix_;
};

/// Returns the number of qubits for a dimension 2^n, or -1 if not a power of two.
inline int qubits_for_dimension(Eigen::Index dim) {
  int n = 0;
  Eigen::Index d = 1;
  while (d < dim) {
    d <<= 1;
    ++n;
  }
  return d == dim ? n : -1;
}

/// Hermitian, PSD, unit-trace matrix. The dimension need not be a power of
/// two (projected states live on Krylov subspaces).
class DensityMatrix {
 public:
  DensityMatrix() = default;

  /// Full validation: Hermitian within 1e-12, trace 1 within 1e-10, and
  /// minimum eigenvalue >= -1e-10.
  explicit DensityMatrix(const ComplexMatrix& m) {
    check_square(m, "DensityMatrix");
    const double defect = hermitian_defect(m);
    if (defect > kHermitianTolerance) {
      throw ValidationError("DensityMatrix: matrix is not Hermitian (defect " +
                            std::to_string(defect) + ")");
    }
    ComplexMatrix h = hermitize(m);
    const double tr = h.trace().real();
    if (std::abs(tr - 1.0) > kTraceTolerance) {
      throw ValidationError("DensityMatrix: trace " + std::to_string(tr) + " != 1");
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues()(0) < -kPsdTolerance) {
      throw ValidationError("DensityMatrix: negative eigenvalue " +
                            std::to_string(solver.eigenvalues()(0)));
    }
    matrix_ = std::move(h);
  }

  /// |psi><psi| for a unit vector.
  static DensityMatrix from_pure(const ComplexVector& psi) {
    if (psi.size() == 0 || std::abs(psi.norm() - 1.0) > 1e-10) {
      throw ValidationError("DensityMatrix::from_pure: state vector is not normalized");
    }
    return trusted(psi * psi.adjoint());
  }

  static DensityMatrix maximally_mixed(Eigen::Index dim) {
    return trusted(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  /// Skips the eigenvalue check. Only for matrices that satisfy the invariants
  /// by construction (cone projections, CPTP channel outputs).
  static DensityMatrix trusted(ComplexMatrix m) {
    DensityMatrix out;
    out.matrix_ = hermitize(m);
    return out;
  }

  const ComplexMatrix& matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }
  int n_qubits() const { return qubits_for_dimension(dim()); }

 private:
  ComplexMatrix matrix_;
};

struct SpectralDecomposition {
  RealVector eigenvalues;     // ascending
  ComplexMatrix eigenvectors; // orthonormal columns

  ComplexMatrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }
};

inline SpectralDecomposition eig_hermitian(const ComplexMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitian);
  if (solver.info() != Eigen::Success) {
    throw DegenerateInputError("eig_hermitian: eigen-solver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline SpectralDecomposition eig_hermitian(const HermitianOperator& op) {
  return eig_hermitian(op.matrix());
}

inline double spectral_norm(const HermitianOperator& op) {
  const RealVector w = eig_hermitian(op).eigenvalues;
  return std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
}

/// exp(-i * angle * generator), built from the spectral decomposition.
inline ComplexMatrix expm_unitary(const HermitianOperator& generator, double angle) {
  const SpectralDecomposition sd = eig_hermitian(generator);
  ComplexVector phases(sd.eigenvalues.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    phases(i) = std::exp(Complex(0.0, -angle * sd.eigenvalues(i)));
  }
  return sd.eigenvectors * phases.asDiagonal() * sd.eigenvectors.adjoint();
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Hermitizes, clips negative eigenvalues to zero and renormalizes the trace.
/// Idempotent on valid density matrices.
inline DensityMatrix project_to_density_cone(const ComplexMatrix& m) {
  check_square(m, "project_to_density_cone");
  if (hermitian_defect(m) > kHermitizeTolerance) {
    throw ValidationError("project_to_density_cone: input is not Hermitian within 1e-9");
  }
  SpectralDecomposition sd = eig_hermitian(hermitize(m));
  double total = 0.0;
  for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i) {
    sd.eigenvalues(i) = std::max(sd.eigenvalues(i), 0.0);
    total += sd.eigenvalues(i);
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateInputError("project_to_density_cone: no positive spectrum to renormalize");
  }
  sd.eigenvalues /= total;
  return DensityMatrix::trusted(sd.reconstruct());
}

namespace pauli {

inline ComplexMatrix identity() { return ComplexMatrix::Identity(2, 2); }

inline ComplexMatrix x() {
  ComplexMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline ComplexMatrix y() {
  ComplexMatrix m(2, 2);
  m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  return m;
}

inline ComplexMatrix z() {
  ComplexMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

/// I^(q) (x) op (x) I^(n-q-1); qubit 0 is the leftmost tensor factor.
inline ComplexMatrix embed(const ComplexMatrix& op, int qubit, int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits || qubit < 0 || qubit >= n_qubits) {
    throw ValidationError("pauli::embed: qubit index out of range");
  }
  const Eigen::Index left = Eigen::Index{1} << qubit;
  const Eigen::Index right = Eigen::Index{1} << (n_qubits - qubit - 1);
  return kron(kron(ComplexMatrix::Identity(left, left), op), ComplexMatrix::Identity(right, right));
}

}  // namespace pauli

}  // namespace aksqfi
