#include <gtest/gtest.h>

#include <random>

#include "aksqfi/linalg.hpp"

using namespace aksqfi;

namespace {

ComplexMatrix random_hermitian(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = Complex(n(rng), n(rng));
  return (a + a.adjoint()) * 0.5;
}

ComplexMatrix random_density(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = Complex(n(rng), n(rng));
  ComplexMatrix r = a * a.adjoint();
  return r / r.trace().real();
}

}  // namespace

TEST(EigHermitian, DiagonalInput) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = 1.0;
  const auto sd = eig_hermitian(HermitianOperator(m));
  EXPECT_NEAR(sd.eigenvalues(0), 1.0, 1e-14);
  EXPECT_NEAR(sd.eigenvalues(1), 3.0, 1e-14);
  EXPECT_NEAR(std::abs(sd.eigenvectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(sd.eigenvectors(0, 1)), 1.0, 1e-14);
}

TEST(EigHermitian, PauliZ) {
  const auto sd = eig_hermitian(HermitianOperator(pauli::z()));
  EXPECT_NEAR(sd.eigenvalues(0), -1.0, 1e-14);
  EXPECT_NEAR(sd.eigenvalues(1), 1.0, 1e-14);
}

TEST(EigHermitian, ReconstructionAndOrthonormality) {
  std::mt19937_64 rng(11);
  for (Eigen::Index dim : {8, 64, 256}) {
    const ComplexMatrix h = random_hermitian(dim, rng);
    const auto sd = eig_hermitian(HermitianOperator(h));
    EXPECT_LE((sd.reconstruct() - h).norm(), 1e-9) << dim;
    EXPECT_LE((sd.eigenvectors.adjoint() * sd.eigenvectors - ComplexMatrix::Identity(dim, dim)).norm(), 1e-10);
    for (Eigen::Index i = 1; i < dim; ++i) EXPECT_LE(sd.eigenvalues(i - 1), sd.eigenvalues(i));
  }
}

TEST(HermitianOperator, RejectsNonHermitian) {
  ComplexMatrix m = pauli::x();
  m(0, 1) = 2.0;
  EXPECT_THROW(HermitianOperator{m}, ValidationError);
  ComplexMatrix r(2, 3);
  r.setZero();
  EXPECT_THROW(HermitianOperator{r}, ValidationError);
}

TEST(DensityMatrix, ValidatesInvariants) {
  ComplexMatrix good = ComplexMatrix::Identity(2, 2) * 0.5;
  EXPECT_NO_THROW(DensityMatrix{good});
  EXPECT_THROW(DensityMatrix{ComplexMatrix::Identity(2, 2)}, ValidationError);  // trace 2
  ComplexMatrix neg = ComplexMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix{neg}, ValidationError);
  ComplexMatrix nan = good;
  nan(0, 0) = std::nan("");
  EXPECT_THROW(DensityMatrix{nan}, ValidationError);
}

TEST(ExpmUnitary, ZeroAngleIsIdentity) {
  std::mt19937_64 rng(3);
  const HermitianOperator g(random_hermitian(4, rng));
  EXPECT_LE((expm_unitary(g, 0.0) - ComplexMatrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(ExpmUnitary, DiagonalGenerator) {
  const HermitianOperator g(pauli::z() * 0.5);
  const ComplexMatrix u = expm_unitary(g, M_PI);
  EXPECT_LE(std::abs(u(0, 0) - std::exp(Complex(0.0, -M_PI / 2))), 1e-12);
  EXPECT_LE(std::abs(u(1, 1) - std::exp(Complex(0.0, M_PI / 2))), 1e-12);
  EXPECT_LE(std::abs(u(0, 1)), 1e-12);
}

TEST(ExpmUnitary, GroupLawAndUnitarity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const HermitianOperator g(random_hermitian(8, rng));
    const double a = 0.7 * (trial + 1);
    const double b = -1.3 + trial;
    EXPECT_LE((expm_unitary(g, a) * expm_unitary(g, b) - expm_unitary(g, a + b)).norm(), 1e-9);
    const ComplexMatrix u = expm_unitary(g, 10.0);
    EXPECT_LE((u.adjoint() * u - ComplexMatrix::Identity(8, 8)).norm(), 1e-10);
  }
}

TEST(Kron, IdentityAndZ) {
  EXPECT_LE((kron(pauli::identity(), pauli::identity()) - ComplexMatrix::Identity(4, 4)).norm(), 0.0);
  const ComplexMatrix zi = kron(pauli::z(), pauli::identity());
  ComplexMatrix expect = ComplexMatrix::Zero(4, 4);
  expect.diagonal() << 1.0, 1.0, -1.0, -1.0;
  EXPECT_LE((zi - expect).norm(), 0.0);
}

TEST(Kron, MixedProduct) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  auto rnd = [&] {
    ComplexMatrix m(2, 2);
    for (int i = 0; i < 4; ++i) m.data()[i] = Complex(n(rng), n(rng));
    return m;
  };
  for (int t = 0; t < 10; ++t) {
    const ComplexMatrix a = rnd(), b = rnd(), c = rnd(), d = rnd();
    EXPECT_LE((kron(a, b) * kron(c, d) - kron(ComplexMatrix(a * c), ComplexMatrix(b * d))).norm(), 1e-12);
  }
}

TEST(ConeProjection, IdentityOnValidStates) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 5; ++t) {
    const ComplexMatrix r = random_density(8, rng);
    EXPECT_LE((project_to_density_cone(r).matrix() - r).norm(), 1e-10);
  }
}

TEST(ConeProjection, ClipThenRenormalize) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = 1.5;
  m(1, 1) = -0.5;
  const DensityMatrix out = project_to_density_cone(m);
  EXPECT_NEAR(out.matrix()(0, 0).real(), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(out.matrix()(1, 1)), 0.0, 1e-12);
}

TEST(ConeProjection, PerturbedStateMatchesEigenvalueOracle) {
  std::mt19937_64 rng(13);
  const ComplexMatrix rho = random_density(4, rng);
  const ComplexMatrix m = rho + 0.3 * random_hermitian(4, rng);
  const DensityMatrix out = project_to_density_cone(m);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m);
  RealVector lam = es.eigenvalues().cwiseMax(0.0);
  lam /= lam.sum();
  const ComplexMatrix oracle = es.eigenvectors() * lam.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  EXPECT_LE((out.matrix() - oracle).norm(), 1e-10);
  EXPECT_NEAR(out.matrix().trace().real(), 1.0, 1e-12);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<ComplexMatrix>(out.matrix()).eigenvalues()(0), -1e-12);
  // idempotent
  EXPECT_LE((project_to_density_cone(out.matrix()).matrix() - out.matrix()).norm(), 1e-10);
}

TEST(ConeProjection, AllNegativeIsDegenerate) {
  ComplexMatrix m = -ComplexMatrix::Identity(2, 2);
  EXPECT_THROW(project_to_density_cone(m), DegenerateInputError);
  ComplexMatrix asym = pauli::x();
  asym(0, 1) = 0.5;
  EXPECT_THROW(project_to_density_cone(asym), ValidationError);
}

TEST(Pauli, EmbedLeftmostQubitZero) {
  const ComplexMatrix z0 = pauli::embed(pauli::z(), 0, 2);
  EXPECT_LE((z0 - kron(pauli::z(), pauli::identity())).norm(), 0.0);
  EXPECT_THROW(pauli::embed(pauli::z(), 2, 2), ValidationError);
}

TEST(Limits, DimensionCap) {
  EXPECT_EQ(qubits_for_dimension(16), 4);
  EXPECT_EQ(qubits_for_dimension(12), -1);
}
