#include <gtest/gtest.h>

#include <random>

#include "aksqfi/benchmark_family.hpp"

using namespace aksqfi;

namespace {

DensityMatrix random_density(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = Complex(n(rng), n(rng));
  ComplexMatrix r = a * a.adjoint();
  return DensityMatrix(hermitize(r / r.trace().real()));
}

void expect_valid(const DensityMatrix& r) {
  EXPECT_NEAR(r.matrix().trace().real(), 1.0, 1e-10);
  EXPECT_LE(hermitian_defect(r.matrix()), 1e-12);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<ComplexMatrix>(r.matrix()).eigenvalues()(0), -1e-10);
}

}  // namespace

TEST(EntangledState, ZeroAngleIsPlusState) {
  NoiseConfig c;
  c.n_qubits = 3;
  c.alpha = 0.0;
  const ComplexVector psi = build_entangled_state(c);
  for (Eigen::Index i = 0; i < psi.size(); ++i) EXPECT_NEAR(std::abs(psi(i) - 1.0 / std::sqrt(8.0)), 0.0, 1e-15);
}

TEST(EntangledState, NormAndExpmOracle) {
  NoiseConfig c;
  c.n_qubits = 2;
  const ComplexVector psi = build_entangled_state(c);
  EXPECT_NEAR(psi.norm(), 1.0, 1e-12);
  // Hand-assembled H_ent for n = 2 and a direct eigendecomposition.
  ComplexMatrix h = kron(pauli::z(), pauli::z()) + 0.35 * (kron(pauli::x(), pauli::identity()) +
                                                           kron(pauli::identity(), pauli::x()));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  ComplexVector phases(4);
  for (int i = 0; i < 4; ++i) phases(i) = std::exp(Complex(0.0, -0.25 * es.eigenvalues()(i)));
  const ComplexVector plus = ComplexVector::Constant(4, 0.5);
  const ComplexVector oracle = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * plus;
  EXPECT_LE((psi - oracle).norm(), 1e-12);
}

TEST(EntangledState, SingleQubitUsesFieldOnly) {
  NoiseConfig c;
  c.n_qubits = 1;
  EXPECT_NEAR(build_entangled_state(c).norm(), 1.0, 1e-12);
}

TEST(Dephasing, ZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const auto rho = random_density(8, rng);
  EXPECT_LE((apply_dephasing(rho, 0.0).matrix() - rho.matrix()).norm(), 0.0);
}

TEST(Dephasing, FullDephasingOfPlus) {
  const auto rho = DensityMatrix::from_pure(ComplexVector::Constant(2, 1.0 / std::sqrt(2.0)));
  const auto out = apply_dephasing(rho, 0.5);
  EXPECT_LE((out.matrix() - 0.5 * ComplexMatrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Dephasing, KrausExpansionOracle) {
  std::mt19937_64 rng(2);
  const auto rho = random_density(4, rng);
  const double p = 0.12;
  const ComplexMatrix i2 = pauli::identity();
  const ComplexMatrix z = pauli::z();
  ComplexMatrix oracle = ComplexMatrix::Zero(4, 4);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double w = (a ? p : 1 - p) * (b ? p : 1 - p);
      const ComplexMatrix k = kron(a ? z : i2, b ? z : i2);
      oracle += w * k * rho.matrix() * k.adjoint();
    }
  }
  const auto out = apply_dephasing(rho, p);
  EXPECT_LE((out.matrix() - oracle).norm(), 1e-14);
  expect_valid(out);
}

TEST(Depolarizing, Endpoints) {
  std::mt19937_64 rng(3);
  const auto rho = random_density(4, rng);
  EXPECT_LE((apply_depolarizing(rho, 0.0).matrix() - rho.matrix()).norm(), 0.0);
  EXPECT_LE((apply_depolarizing(rho, 1.0).matrix() - 0.25 * ComplexMatrix::Identity(4, 4)).norm(), 1e-15);
}

TEST(Depolarizing, EigenvaluesShiftTowardUniform) {
  std::mt19937_64 rng(4);
  const auto rho = random_density(8, rng);
  const double p = 0.3;
  const auto out = apply_depolarizing(rho, p);
  expect_valid(out);
  const RealVector before = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(rho.matrix()).eigenvalues();
  const RealVector after = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(out.matrix()).eigenvalues();
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(after(i), (1 - p) * before(i) + p / 8.0, 1e-12);
}

TEST(Channels, RejectBadProbability) {
  const auto rho = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(apply_dephasing(rho, 1.5), ValidationError);
  EXPECT_THROW(apply_depolarizing(rho, -0.1), ValidationError);
  NoiseConfig c;
  c.n_qubits = 13;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Generator, SmallCases) {
  EXPECT_LE((build_generator(1).matrix() - 0.5 * pauli::z()).norm(), 0.0);
  const ComplexMatrix g2 = 0.5 * (kron(pauli::z(), pauli::identity()) + kron(pauli::identity(), pauli::z())) +
                           0.08 * kron(pauli::x(), pauli::x());
  EXPECT_LE((build_generator(2).matrix() - g2).norm(), 1e-15);
  EXPECT_NEAR(std::abs(build_generator(2).matrix().trace()), 0.0, 1e-15);
}

TEST(Generator, SpectrumSymmetricAtN4) {
  const RealVector w = eig_hermitian(build_generator(4)).eigenvalues;
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(w(i), -w(15 - i), 1e-10);
}

TEST(Instance, ReferenceValues) {
  NoiseConfig c;
  c.p_phi = 0.03;
  EXPECT_NEAR(build_instance(c).f_ref, 3.7696, 5e-4);
  c.p_phi = 0.24;
  EXPECT_NEAR(build_instance(c).f_ref, 1.0561, 5e-4);
  c.p_phi = 0.12;
  EXPECT_NEAR(build_instance(c).f_ref, 2.353, 5e-3);
}

TEST(Instance, ValidAndMonotoneInDephasing) {
  double prev = std::numeric_limits<double>::infinity();
  for (double p : {0.0, 0.06, 0.12, 0.18, 0.24}) {
    NoiseConfig c;
    c.p_phi = p;
    const auto inst = build_instance(c);
    expect_valid(inst.rho);
    EXPECT_LT(inst.f_ref, prev);
    prev = inst.f_ref;
  }
}
