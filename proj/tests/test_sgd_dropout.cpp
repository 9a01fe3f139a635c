#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dropout_sgd/longrun_cov.hpp"
#include "dropout_sgd/sgd_dropout.hpp"

using namespace dsgd;

namespace {

SgdConfig config(std::size_t d, double p, double alpha) { return {d, p, alpha, Vector(d), 0}; }

std::vector<Vector> normal_draws(std::size_t d, std::size_t n, RngStream& rng) {
  std::vector<Vector> out(n, Vector(d));
  for (auto& x : out)
    for (auto& v : x) v = rng.normal();
  return out;
}

}  // namespace

TEST(SgdStep, Examples) {
  const SgdConfig cfg = config(1, 0.5, 0.1);
  const StreamSample s{1.0, Vector{2.0}};
  const SgdState s1 = sgd_step(cfg, SgdState::zero(1), s, DropoutMask::all_ones(1));
  EXPECT_DOUBLE_EQ(s1.beta[0], 0.2);
  EXPECT_EQ(s1.step, 1u);

  const SgdConfig c3 = config(3, 0.5, 0.05);
  const SgdState start{Vector{0.1, 0.2, 0.3}, 7};
  const StreamSample t{0.4, Vector{1.0, -1.0, 2.0}};
  EXPECT_EQ(sgd_step(c3, start, t, DropoutMask::all_zeros(3)).beta, start.beta);
  const SgdState full = sgd_step(c3, start, t, DropoutMask::all_ones(3));
  const double resid = 0.4 - dot(t.x, start.beta);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(full.beta[j], start.beta[j] + 0.05 * t.x[j] * resid, 1e-15);
  EXPECT_THROW(sgd_step(c3, start, StreamSample{0.0, Vector{1.0}}, DropoutMask::all_ones(3)), DimensionError);
}

TEST(Asgd, Examples) {
  AsgdState avg(2);
  avg = asgd_update(avg, Vector{3, 4});
  EXPECT_EQ(avg.mean(), (Vector{3, 4}));
  for (int i = 0; i < 10; ++i) avg = asgd_update(avg, Vector{3, 4});
  EXPECT_EQ(avg.mean(), (Vector{3, 4}));
  EXPECT_EQ(avg.count(), 11u);
  EXPECT_THROW(asgd_update(avg, Vector{1}), DimensionError);
}

TEST(Asgd, BatchMean) {
  RngStream rng(41, 0);
  AsgdState avg(3);
  Vector sum(3);
  for (int i = 0; i < 1000; ++i) {
    const Vector b{rng.normal(), 5 + rng.normal(), -rng.normal()};
    avg = asgd_update(avg, b);
    sum += b;
  }
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(avg.mean()[j], sum[j] / 1000, 1e-12 * std::abs(sum[j] / 1000) + 1e-15);
}

TEST(L2MinimizerSgd, IsotropicAndPOne) {
  const Vector bs{0.2, -0.5, 1.0};
  const Vector b = l2_minimizer_sgd(Matrix::identity(3), bs);
  EXPECT_EQ(b, bs);
  const Matrix ex{{2, 1}, {1, 3}};
  const Vector yx{1, 2};
  const Vector ls = l2_minimizer_sgd(p_rescale(ex, 1.0), yx);
  EXPECT_NEAR(ls[0], 0.2, 1e-15);
  EXPECT_NEAR(ls[1], 0.6, 1e-15);
  EXPECT_THROW(l2_minimizer_sgd(Matrix(2, 2), yx), SingularMatrixError);
}

TEST(L2MinimizerSgd, PlugInMoments) {
  RngStream rng(42, 0);
  const Vector bs{0.0, 0.5, 1.0};
  const double p = 0.5;
  const std::size_t n = 1000000;
  Matrix gram(3, 3);
  Vector yx(3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = stream_sample(bs, rng);
    gram += Matrix::outer(s.x, s.x);
    yx += s.y * s.x;
  }
  gram *= 1.0 / n;
  yx *= 1.0 / n;
  const Vector b = l2_minimizer_sgd(p_rescale(gram, p), yx);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(b[j], bs[j], 0.01);
}

TEST(Admissibility, ScalarThreshold) {
  RngStream rng(43, 0);
  const auto draws = normal_draws(1, 100000, rng);
  const auto lo = lr_admissible_q2(config(1, 0.7, 0.5), draws);
  const auto hi = lr_admissible_q2(config(1, 0.7, 0.7), draws);
  EXPECT_TRUE(lo.admissible);
  EXPECT_FALSE(hi.admissible);
  EXPECT_NEAR(lo.threshold, 2.0 / 3.0, 0.03);
  EXPECT_EQ(lo.threshold, hi.threshold);
}

TEST(Admissibility, DeterministicPOne) {
  // single repeated draw x = 2: M = 2·4 - α·16, PD iff α < 0.5
  std::vector<Vector> draws(1000, Vector{2.0});
  const auto r = lr_admissible_q2(config(1, 1.0, 0.4), draws);
  EXPECT_TRUE(r.admissible);
  EXPECT_NEAR(r.threshold, 0.5, 1e-6);
  EXPECT_FALSE(lr_admissible_q2(config(1, 1.0, 0.6), draws).admissible);

  std::vector<Vector> two;
  for (int i = 0; i < 500; ++i) {
    two.push_back(Vector{1.0, 0.0});
    two.push_back(Vector{0.0, 1.0});
  }
  // E[2𝕏 - α𝕏²] = (2 - α)/2 · I → threshold 2
  EXPECT_NEAR(lr_admissible_q2(config(2, 1.0, 0.1), two).threshold, 2.0, 1e-5);
}

TEST(Admissibility, TooFewDraws) {
  std::vector<Vector> draws(999, Vector{1.0});
  EXPECT_THROW(lr_admissible_q2(config(1, 0.5, 0.1), draws), ContractError);
}

TEST(ParallelRun, SingletonMatchesSingleChain) {
  SgdConfig cfg{2, 0.8, 0.05, Vector{0.3, 0.7}, 0};
  RngStream r1(44, 0), r2(44, 0);
  const auto run = parallel_run({0.05}, cfg, 500, r1);
  SgdState s = SgdState::zero(2);
  AsgdState avg(2);
  StreamSample sample;
  DropoutMask mask;
  for (int k = 0; k < 500; ++k) {
    stream_sample_into(sample, cfg.beta_star, r2);
    sample_dropout_into(mask, 2, cfg.p, r2);
    s = sgd_step(cfg, s, sample, mask);
    avg = asgd_update(avg, s.beta);
  }
  EXPECT_EQ(run.states[0].beta, s.beta);
  EXPECT_EQ(run.averages[0].mean(), avg.mean());
}

TEST(ParallelRun, EqualRatesGiveEqualBlocks) {
  SgdConfig cfg{3, 0.5, 0.02, Vector{0, 0.5, 1}, 0};
  RngStream rng(45, 0);
  const auto run = parallel_run({0.02, 0.02, 0.05}, cfg, 300, rng);
  const Vector st = run.stacked();
  ASSERT_EQ(st.dim(), 9u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(st[j], st[3 + j]);
  EXPECT_NE(st[0], st[6]);
  EXPECT_THROW(parallel_run({}, cfg, 10, rng), ContractError);
}

TEST(ParallelRun, ObserverAndBurnIn) {
  SgdConfig cfg{2, 0.9, 0.05, Vector{1, 1}, 10};
  RngStream rng(46, 0);
  std::size_t calls = 0;
  const auto run = parallel_run({0.05}, cfg, 50, rng, [&](std::size_t, const MultiRateRun&) { ++calls; });
  EXPECT_EQ(calls, 40u);
  EXPECT_EQ(run.averages[0].count(), 40u);
}

TEST(Properties, StationaryCentering) {
  // ‖β̄_n - β*‖ ≤ 5 sqrt(tr Σ̂_n / n) in at least 95 of 100 replications
  const std::size_t d = 3, n = 100000;
  SgdConfig cfg{d, 0.9, 0.05, Vector{0, 0.5, 1}, 0};
  int ok = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    RngStream rng(47, r);
    CovState cov(d, BlockSchedule(1.0, 2.0));
    parallel_run({cfg.alpha}, cfg, n, rng,
                 [&](std::size_t, const MultiRateRun& run) { cov.update(run.states[0].beta); });
    const Matrix sigma = cov.finalize();
    ok += norm2(cov.mean() - cfg.beta_star) <= 5 * std::sqrt(sigma.trace() / n);
  }
  EXPECT_GE(ok, 95);
}

TEST(Properties, CoupledChainsContract) {
  const std::size_t d = 3;
  const double alpha = 0.05, p = 0.9;
  int ok = 0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    RngStream rng(48, r);
    SgdState a{Vector{3, -3, 3}, 0}, b = SgdState::zero(d);
    StreamSample s;
    DropoutMask m;
    double at_250 = 0, at_500 = 0;
    for (int k = 1; k <= 500; ++k) {
      stream_sample_into(s, Vector{0, 0.5, 1}, rng);
      sample_dropout_into(m, d, p, rng);
      sgd_step_inplace(alpha, a, s, m);
      sgd_step_inplace(alpha, b, s, m);
      if (k == 250) at_250 = norm2(a.beta - b.beta);
      if (k == 500) at_500 = norm2(a.beta - b.beta);
    }
    ok += at_500 <= at_250;
  }
  EXPECT_GE(ok, 198);
}
