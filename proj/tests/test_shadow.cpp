#include <gtest/gtest.h>

#include <random>

#include "aksqfi/shadow.hpp"

using namespace aksqfi;

namespace {

DensityMatrix random_density(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = Complex(n(rng), n(rng));
  ComplexMatrix r = a * a.adjoint();
  return DensityMatrix(hermitize(r / r.trace().real()));
}

// Projector onto outcome o of a single-qubit Pauli basis, built from kets.
ComplexMatrix projector(PauliBasis b, int o) {
  const double s = 1.0 / std::sqrt(2.0);
  ComplexVector v(2);
  switch (b) {
    case PauliBasis::X:
      v << s, (o == 0 ? s : -s);
      break;
    case PauliBasis::Y:
      v << s, (o == 0 ? Complex(0.0, s) : Complex(0.0, -s));
      break;
    case PauliBasis::Z:
      v << (o == 0 ? 1.0 : 0.0), (o == 0 ? 0.0 : 1.0);
      break;
  }
  return v * v.adjoint();
}

ComplexMatrix snapshot_oracle(const std::vector<PauliBasis>& bases, const std::vector<std::uint8_t>& outs) {
  ComplexMatrix out = ComplexMatrix::Ones(1, 1);
  for (std::size_t q = 0; q < bases.size(); ++q) {
    out = kron(out, 3.0 * projector(bases[q], outs[q]) - ComplexMatrix::Identity(2, 2));
  }
  return out;
}

}  // namespace

TEST(Snapshot, ZeroStateInZBasis) {
  ComplexVector zero = ComplexVector::Zero(2);
  zero(0) = 1.0;
  const auto rho = DensityMatrix::from_pure(zero);
  for (double u : {0.0, 0.3, 0.999999}) {
    const Snapshot s = measure_in_basis(rho, {PauliBasis::Z}, u);
    EXPECT_EQ(s.outcomes[0], 0);
    ComplexMatrix expect = ComplexMatrix::Zero(2, 2);
    expect(0, 0) = 2.0;
    expect(1, 1) = -1.0;
    EXPECT_LE((s.snapshot_matrix - expect).norm(), 1e-15);
  }
}

TEST(Snapshot, MatchesProjectorOracle) {
  for (int b0 = 0; b0 < 3; ++b0) {
    for (int b1 = 0; b1 < 3; ++b1) {
      for (std::uint8_t o = 0; o < 4; ++o) {
        const std::vector<PauliBasis> bases{static_cast<PauliBasis>(b0), static_cast<PauliBasis>(b1)};
        const std::vector<std::uint8_t> outs{static_cast<std::uint8_t>(o >> 1), static_cast<std::uint8_t>(o & 1)};
        EXPECT_LE((snapshot_matrix(bases, outs) - snapshot_oracle(bases, outs)).norm(), 1e-14);
      }
    }
  }
  EXPECT_THROW(snapshot_matrix({PauliBasis::X}, {}), ValidationError);
}

TEST(Snapshot, ExactAverageReproducesState) {
  // Sum over all settings and outcomes with Born weights from explicit projectors.
  std::mt19937_64 rng(4);
  const auto rho = random_density(4, rng);
  ComplexMatrix avg = ComplexMatrix::Zero(4, 4);
  for (int b0 = 0; b0 < 3; ++b0) {
    for (int b1 = 0; b1 < 3; ++b1) {
      const std::vector<PauliBasis> bases{static_cast<PauliBasis>(b0), static_cast<PauliBasis>(b1)};
      const auto probs = shadow_detail::outcome_probabilities(rho.matrix(), bases);
      for (std::uint8_t o = 0; o < 4; ++o) {
        const std::vector<std::uint8_t> outs{static_cast<std::uint8_t>(o >> 1), static_cast<std::uint8_t>(o & 1)};
        const ComplexMatrix p = kron(projector(bases[0], outs[0]), projector(bases[1], outs[1]));
        const double born = (rho.matrix() * p).trace().real();
        EXPECT_NEAR(probs[o], born, 1e-12);
        avg += born / 9.0 * snapshot_oracle(bases, outs);
      }
    }
  }
  EXPECT_LE((avg - rho.matrix()).norm(), 1e-12);
}

TEST(DrawSnapshots, MonteCarloUnbiasedness) {
  std::mt19937_64 rng(8);
  const auto rho = random_density(4, rng);
  const ShadowBatch batch = draw_snapshots(rho, 100000, 12345);
  EXPECT_LE((mean_estimate(batch, batch.size()) - rho.matrix()).norm(), 0.05);
}

TEST(DrawSnapshots, NestedPrefix) {
  std::mt19937_64 rng(9);
  const auto rho = random_density(8, rng);
  const ShadowBatch small = draw_snapshots(rho, 32, 77);
  const ShadowBatch large = draw_snapshots(rho, 64, 77);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(small.codes()[i], large.codes()[i]);
  const ShadowBatch other = draw_snapshots(rho, 32, 78);
  EXPECT_NE(small.codes(), other.codes());
}

TEST(DrawSnapshots, RejectsBadInput) {
  const auto rho = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(draw_snapshots(rho, 0, 1), ValidationError);
}

TEST(MeanEstimate, SingleSnapshot) {
  std::mt19937_64 rng(10);
  const auto rho = random_density(4, rng);
  const ShadowBatch batch = draw_snapshots(rho, 5, 3);
  EXPECT_LE((mean_estimate(batch, 1) - batch.snapshot(0).snapshot_matrix).norm(), 1e-14);
  EXPECT_THROW(mean_estimate(batch, 0), ValidationError);
  EXPECT_THROW(mean_estimate(batch, 6), ValidationError);
}

TEST(MeanEstimate, MaximallyMixedQubit) {
  const ShadowBatch batch = draw_snapshots(DensityMatrix::maximally_mixed(2), 40000, 5);
  const ComplexMatrix est = mean_estimate(batch, batch.size());
  EXPECT_LE((est - 0.5 * ComplexMatrix::Identity(2, 2)).norm(), 0.03);
  EXPECT_NEAR(est.trace().real(), 1.0, 1e-12);
  EXPECT_LE(hermitian_defect(est), 1e-12);
}

TEST(MeanEstimate, PrefixMatchesDirectSum) {
  std::mt19937_64 rng(11);
  const auto rho = random_density(8, rng);
  const ShadowBatch batch = draw_snapshots(rho, 200, 21);
  for (std::size_t m : {1U, 7U, 50U, 200U}) {
    ComplexMatrix direct = ComplexMatrix::Zero(8, 8);
    for (std::size_t i = 0; i < m; ++i) direct += batch.snapshot(i).snapshot_matrix;
    direct /= static_cast<double>(m);
    EXPECT_LE((mean_estimate(batch, m) - direct).norm(), 1e-12) << m;
  }
}

TEST(MeanEstimate, LazyPathMatchesDirectSum) {
  // n = 7 with more than 512 distinct types exceeds the materialization budget.
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::uint32_t> code(0, 6 * 6 * 6 * 6 * 6 * 6 * 6 - 1);
  std::vector<std::uint32_t> codes(700);
  for (auto& c : codes) c = code(rng);
  const ShadowBatch batch = make_batch_from_codes(7, 0, codes);
  ASSERT_GT(batch.distinct_types() * 128 * 128, shadow_detail::kMaterializeBudget);
  ComplexMatrix direct = ComplexMatrix::Zero(128, 128);
  for (std::size_t i = 0; i < 600; ++i) direct += batch.snapshot(i).snapshot_matrix;
  direct /= 600.0;
  EXPECT_LE((mean_estimate(batch, 600) - direct).norm(), 1e-10);
}

TEST(ShadowBatch, TypeTableOrderedByFirstAppearance) {
  const ShadowBatch b = make_batch_from_codes(1, 0, {4, 0, 4, 5, 0});
  EXPECT_EQ(b.distinct_types(), 3U);
  EXPECT_EQ(b.type_of_shot(), (std::vector<std::uint32_t>{0, 1, 0, 2, 1}));
  EXPECT_EQ(b.types_in_prefix(1), 1U);
  EXPECT_EQ(b.types_in_prefix(3), 2U);
  EXPECT_EQ(b.prefix_counts(5), (std::vector<double>{2, 2, 1}));
  // code 4 = basis Z outcome 0
  EXPECT_EQ(b.snapshot(0).bases[0], PauliBasis::Z);
  EXPECT_EQ(b.snapshot(0).outcomes[0], 0);
  EXPECT_THROW(make_batch_from_codes(1, 0, {6}), ValidationError);
}

TEST(ResampleBootstrap, SingleIndex) {
  const ShadowBatch b = make_batch_from_codes(1, 0, {4});
  const auto r = resample_bootstrap(b, 1, 1, 99);
  ASSERT_EQ(r.size(), 1U);
  EXPECT_EQ(r[0], (std::vector<std::uint32_t>{0}));
  EXPECT_THROW(resample_bootstrap(b, 2, 1, 99), ValidationError);
}

TEST(ResampleBootstrap, CountsAgreeWithIndexLists) {
  std::mt19937_64 rng(13);
  const auto rho = random_density(4, rng);
  const ShadowBatch batch = draw_snapshots(rho, 300, 2);
  const auto lists = resample_bootstrap(batch, 120, 4, 55);
  for (std::size_t b = 0; b < lists.size(); ++b) {
    std::vector<double> counts(batch.types_in_prefix(120), 0.0);
    for (auto i : lists[b]) {
      ASSERT_LT(i, 120U);
      counts[batch.type_of_shot()[i]] += 1.0;
    }
    EXPECT_EQ(bootstrap_type_counts(batch, 120, 55, b), counts);
  }
}
