#include <gtest/gtest.h>

#include "aksqfi/controller.hpp"

using namespace aksqfi;

namespace {

BenchmarkInstance instance(int n, double p_phi) {
  NoiseConfig c;
  c.n_qubits = n;
  c.p_phi = p_phi;
  return build_instance(c);
}

BootstrapConfig fast_boot() {
  BootstrapConfig b;
  b.replicates = 60;
  return b;
}

StopConfig with_rule(StopRule r, double eps = 0.2) {
  StopConfig c;
  c.rule = r;
  c.epsilon = eps;
  return c;
}

// Independent restatement of the allocation order.
Action expected_allocation(const TrajectoryStep& s, const StopConfig& cfg, int k_limit) {
  const double d = s.bundle.d_k.value();
  const double w = s.bundle.width;
  if (s.k >= k_limit && s.m >= cfg.m_max) return Action::stop_resource_limit;
  if (d > cfg.epsilon && s.k < k_limit) return Action::inc_k;
  if (w > cfg.epsilon && s.m < cfg.m_max) return Action::double_m;
  if (s.k < k_limit) return Action::final_k_pass;
  if (s.m < cfg.m_max) return Action::final_m_pass;
  return Action::stop_resource_limit;
}

void check_trajectory(const RunResult& res, const StopConfig& cfg, int k_limit) {
  ASSERT_FALSE(res.steps.empty());
  for (std::size_t i = 0; i + 1 < res.steps.size(); ++i) {
    const TrajectoryStep& s = res.steps[i];
    const TrajectoryStep& next = res.steps[i + 1];
    const Action a = expected_allocation(s, cfg, k_limit);
    EXPECT_EQ(s.action, a) << "step " << i;
    if (a == Action::inc_k || a == Action::final_k_pass) {
      EXPECT_EQ(next.k, s.k + 1);
      EXPECT_EQ(next.m, s.m);
    } else {
      EXPECT_EQ(next.k, s.k);
      EXPECT_EQ(next.m, 2 * s.m);
    }
  }
  const TrajectoryStep& last = res.steps.back();
  if (res.decision.outcome == Outcome::success) {
    EXPECT_EQ(last.action, Action::stop_success);
  } else {
    EXPECT_EQ(last.action, Action::stop_resource_limit);
  }
  EXPECT_EQ(res.decision.k_final, last.k);
  EXPECT_EQ(res.decision.m_final, last.m);
  EXPECT_EQ(res.n_eval, static_cast<int>(res.steps.size()));
}

}  // namespace

TEST(Controller, EvaluationBound) {
  StopConfig cfg;
  EXPECT_EQ(n_eval_bound(cfg), 13);  // 7 K steps + 5 M doublings + 1, within the quoted bound of 14
  const auto inst = instance(3, 0.12);
  for (StopRule r : {StopRule::width_only, StopRule::component_aware, StopRule::seq_heldout_width}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const StopConfig c = with_rule(r);
      const RunResult res = run(inst, c, fast_boot(), seed);
      EXPECT_LE(res.n_eval, 14) << to_string(r) << " " << seed;
      check_trajectory(res, c, c.k_max);
    }
  }
}

TEST(Controller, WidthOnlyLooseToleranceStopsAtKTwo) {
  const auto inst = instance(3, 0.12);
  const RunResult res = run(inst, with_rule(StopRule::width_only, 100.0), fast_boot(), 5);
  ASSERT_EQ(res.steps.size(), 2U);
  EXPECT_EQ(res.steps[0].action, Action::inc_k);
  EXPECT_TRUE(res.steps[0].bundle.d_k.is_infinite());
  EXPECT_EQ(res.decision.outcome, Outcome::success);
  EXPECT_EQ(res.decision.k_final, 2);
  EXPECT_EQ(res.decision.m_final, 16U);
}

TEST(Controller, ComponentAwareLooseToleranceWalksToEligibility) {
  // K climbs 1..8 by final passes at M=16, then M doubles until two eligible passes.
  const auto inst = instance(3, 0.12);
  const StopConfig cfg = with_rule(StopRule::component_aware, 100.0);
  const RunResult res = run(inst, cfg, fast_boot(), 6);
  ASSERT_EQ(res.steps.size(), 12U);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(res.steps[static_cast<std::size_t>(i)].k, i + 1);
    EXPECT_EQ(res.steps[static_cast<std::size_t>(i)].m, 16U);
  }
  EXPECT_EQ(res.steps[0].action, Action::inc_k);
  EXPECT_EQ(res.steps[1].action, Action::final_k_pass);
  EXPECT_EQ(res.steps[7].action, Action::final_m_pass);
  EXPECT_EQ(res.steps[10].gate_trace.patience_count, 1);
  EXPECT_EQ(res.decision.outcome, Outcome::success);
  EXPECT_EQ(res.decision.k_final, 8);
  EXPECT_EQ(res.decision.m_final, 256U);
  check_trajectory(res, cfg, cfg.k_max);
}

TEST(Controller, TightToleranceHitsResourceLimit) {
  const auto inst = instance(3, 0.12);
  const StopConfig cfg = with_rule(StopRule::component_aware, 1e-9);
  const RunResult res = run(inst, cfg, fast_boot(), 7);
  EXPECT_EQ(res.decision.outcome, Outcome::resource_limit);
  EXPECT_EQ(res.decision.k_final, 8);
  EXPECT_EQ(res.decision.m_final, 512U);
  EXPECT_EQ(res.n_eval, n_eval_bound(cfg));
  check_trajectory(res, cfg, cfg.k_max);
}

TEST(Controller, Deterministic) {
  const auto inst = instance(3, 0.18);
  const StopConfig cfg = with_rule(StopRule::width_only);
  const RunResult a = run(inst, cfg, fast_boot(), 99);
  const RunResult b = run(inst, cfg, fast_boot(), 99);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].bundle.f_hat, b.steps[i].bundle.f_hat);
    EXPECT_EQ(a.steps[i].bundle.width, b.steps[i].bundle.width);
  }
  EXPECT_EQ(a.decision.f_hat, b.decision.f_hat);
}

TEST(Controller, RulesShareSnapshotsForASeed) {
  // Step bundles at equal (K, M) agree across rules: same batch, same bootstrap seed.
  const auto inst = instance(3, 0.06);
  const RunResult w = run(inst, with_rule(StopRule::width_only, 1e-9), fast_boot(), 3);
  const RunResult c = run(inst, with_rule(StopRule::component_aware, 1e-9), fast_boot(), 3);
  ASSERT_GE(w.steps.size(), 3U);
  for (std::size_t i = 0; i < w.steps.size(); ++i) {
    EXPECT_EQ(w.steps[i].k, c.steps[i].k);
    EXPECT_EQ(w.steps[i].m, c.steps[i].m);
    EXPECT_EQ(w.steps[i].bundle.f_hat, c.steps[i].bundle.f_hat);
    EXPECT_EQ(w.steps[i].bundle.width, c.steps[i].bundle.width);
  }
}

TEST(Controller, HeldoutAcceptsWithZeroRadius) {
  const auto inst = instance(3, 0.12);
  const StopConfig cfg = with_rule(StopRule::seq_heldout_width, 100.0);
  const RunResult res = run(inst, cfg, fast_boot(), 8);
  EXPECT_EQ(res.decision.outcome, Outcome::success);
  ASSERT_TRUE(res.decision.certificate.has_value());
  EXPECT_TRUE(res.decision.certificate->accepted);
  EXPECT_EQ(res.decision.certificate->r_trunc, 0.0);
  EXPECT_EQ(res.decision.certificate->attempt_index, 1);
  EXPECT_EQ(res.decision.f_hat, res.decision.certificate->conf_estimate);
  EXPECT_EQ(res.certificate_attempts, 1);
}

TEST(Controller, HeldoutComponentAwareNeedsCalibration) {
  const auto inst = instance(2, 0.12);
  EXPECT_THROW(run(inst, with_rule(StopRule::heldout_component_aware), fast_boot(), 1), ConfigError);
  CalibrationTable other;
  other.add({3, 0.12, 0.03, 4, 1.0, 0.1});
  const RunOptions opts{SeedSource::exact_state, &other};
  EXPECT_THROW(run(inst, with_rule(StopRule::heldout_component_aware, 100.0), fast_boot(), 1, opts), ConfigError);
}

TEST(Controller, LargeTruncationRadiusRejectsAndResets) {
  const auto inst = instance(3, 0.12);
  CalibrationTable table;
  for (int k = 1; k <= 8; ++k) table.add({3, 0.12, 0.03, k, 0.0, 5.0});
  StopConfig cfg = with_rule(StopRule::heldout_component_aware, 2.0);
  cfg.j_max = 2;
  const RunResult res = run(inst, cfg, fast_boot(), 10, RunOptions{SeedSource::exact_state, &table});
  EXPECT_EQ(res.decision.outcome, Outcome::resource_limit);
  EXPECT_GE(res.certificate_attempts, 1);
  EXPECT_LE(res.certificate_attempts, 2);
  for (const auto& s : res.steps) {
    if (s.certificate) {
      EXPECT_FALSE(s.certificate->accepted);
      EXPECT_EQ(s.gate_trace.patience_count, 0);
      EXPECT_DOUBLE_EQ(s.certificate->delta_j, cfg.delta / 2.0);
    }
  }
  ASSERT_TRUE(res.decision.certificate.has_value());
}

TEST(Controller, FixedKHeldoutKeepsOrder) {
  const auto inst = instance(3, 0.12);
  StopConfig cfg = with_rule(StopRule::fixedK_heldout, 0.3);
  cfg.fixed_k = 5;
  const RunResult res = run(inst, cfg, fast_boot(), 11);
  for (const auto& s : res.steps) EXPECT_EQ(s.k, 5);
  check_trajectory(res, cfg, cfg.fixed_k);
  cfg.fixed_k = 9;
  EXPECT_THROW(run(inst, cfg, fast_boot(), 11), ConfigError);
}

TEST(SampleSchedule, LoosePassesAtSecondLevel) {
  const auto inst = instance(3, 0.12);
  StopConfig cfg = with_rule(StopRule::sample_schedule, 100.0);
  const RunResult res = run_sample_schedule(inst, 8, {32, 64, 128}, cfg, fast_boot(), 2);
  EXPECT_EQ(res.decision.outcome, Outcome::success);
  EXPECT_EQ(res.steps.size(), 2U);
  EXPECT_EQ(res.decision.m_final, 64U);
}

TEST(SampleSchedule, SingleTerminalLevelUsesFinalPass) {
  const auto inst = instance(3, 0.12);
  const RunResult res = run_sample_schedule(inst, 8, {64}, with_rule(StopRule::sample_schedule, 100.0), fast_boot(), 2);
  EXPECT_EQ(res.decision.outcome, Outcome::success);
  EXPECT_EQ(res.n_eval, 1);
}

TEST(SampleSchedule, NeverPassingRecordsEveryLevel) {
  const auto inst = instance(3, 0.12);
  const RunResult res =
      run_sample_schedule(inst, 8, {32, 64, 128}, with_rule(StopRule::sample_schedule, 1e-9), fast_boot(), 2);
  EXPECT_EQ(res.decision.outcome, Outcome::resource_limit);
  ASSERT_EQ(res.steps.size(), 3U);
  EXPECT_EQ(res.steps[0].action, Action::double_m);
  EXPECT_EQ(res.steps[2].action, Action::stop_resource_limit);
  EXPECT_THROW(run_sample_schedule(inst, 8, {64, 32}, with_rule(StopRule::sample_schedule), fast_boot(), 2),
               ConfigError);
}

TEST(SampleSchedule, DispatchedFromRun) {
  const auto inst = instance(2, 0.0);
  StopConfig cfg = with_rule(StopRule::sample_schedule, 1e-9);
  cfg.fixed_k = 4;
  cfg.m_schedule = {16, 32};
  const RunResult res = run(inst, cfg, fast_boot(), 4);
  EXPECT_EQ(res.steps.size(), 2U);
  EXPECT_EQ(res.steps[0].k, 4);
}
