#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "quota/allocator.hpp"

namespace quota {
namespace {

double l1_deviation(std::span<const std::size_t> targets, const NormalizedScores& w,
                    std::size_t budget) {
  double d = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    d += std::abs(static_cast<double>(targets[i]) - w[i] * static_cast<double>(budget));
  }
  return d;
}

// Every composition of `budget` into `parts` positive integers.
void for_each_composition(std::size_t parts, std::size_t budget,
                          const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> cur(parts, 1);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i + 1 == parts) {
      cur[i] = left;
      fn(cur);
      return;
    }
    for (std::size_t v = 1; v + (parts - i - 1) <= left; ++v) {
      cur[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, budget);
}

NormalizedScores random_weights(std::mt19937_64& rng, std::size_t n, bool spiky) {
  std::vector<double> raw(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : raw) v = spiky ? std::pow(u(rng), 6.0) : u(rng);
  if (spiky && u(rng) < 0.3) raw[rng() % n] = 0.0;
  double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (total == 0.0) {
    raw.assign(n, 1.0);
    total = static_cast<double>(n);
  }
  for (auto& v : raw) v /= total;
  return NormalizedScores(raw);
}

TEST(AllocateBudgetTest, UniformBaseline) {
  const NormalizedScores w(std::vector<double>(64, 1.0 / 64));
  const auto t = allocate_budget(w, 12544);
  for (auto v : t) EXPECT_EQ(v, 196u);
}

TEST(AllocateBudgetTest, ExactSplit) {
  EXPECT_EQ(allocate_budget(NormalizedScores({0.5, 0.5}), 100),
            (std::vector<std::size_t>{50, 50}));
}

TEST(AllocateBudgetTest, LargestRemainderThirds) {
  const NormalizedScores w({1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto t = allocate_budget(w, 100);
  // Oracle: exhaustive search over all splits of 100; among minimizers of the
  // L1 deviation the lowest frame index takes the extra token, i.e. the
  // lexicographically largest minimizer.
  double best = 1e300;
  std::vector<std::size_t> best_split;
  for_each_composition(3, 100, [&](const std::vector<std::size_t>& c) {
    const double d = l1_deviation(c, w, 100);
    if (d < best - 1e-9 || (std::abs(d - best) <= 1e-9 && c > best_split)) {
      best = std::min(best, d);
      best_split = c;
    }
  });
  EXPECT_EQ(best_split, (std::vector<std::size_t>{34, 33, 33}));
  EXPECT_EQ(t, best_split);
}

TEST(AllocateBudgetTest, BudgetTooSmall) {
  try {
    allocate_budget(NormalizedScores({0.25, 0.25, 0.25, 0.25}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBudgetTooSmall);
  }
}

TEST(AllocateBudgetTest, OneTokenFloor) {
  const auto t = allocate_budget(NormalizedScores({1.0, 0.0, 0.0}), 10);
  EXPECT_EQ(t, (std::vector<std::size_t>{8, 1, 1}));
  const auto all_min = allocate_budget(NormalizedScores({0.97, 0.01, 0.01, 0.01}), 4);
  EXPECT_EQ(all_min, (std::vector<std::size_t>{1, 1, 1, 1}));
}

TEST(AllocateBudgetTest, MatchesExhaustiveOptimum) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng() % 4;
    const std::size_t budget = n + rng() % 25;
    const auto w = random_weights(rng, n, trial % 2 == 0);
    const auto t = allocate_budget(w, budget);
    EXPECT_EQ(std::accumulate(t.begin(), t.end(), std::size_t{0}), budget);
    double best = 1e300;
    for_each_composition(n, budget, [&](const std::vector<std::size_t>& c) {
      best = std::min(best, l1_deviation(c, w, budget));
    });
    EXPECT_NEAR(l1_deviation(t, w, budget), best, 1e-9);
  }
}

TEST(AllocateBudgetTest, CapIsHonored) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const std::size_t cap = 1 + rng() % 50;
    const std::size_t budget = n + rng() % (n * cap - n + 1);
    const auto w = redistribute_weights(random_weights(rng, n, true), budget, cap);
    const auto t = allocate_budget(w, budget, cap);
    std::size_t sum = 0;
    for (auto v : t) {
      EXPECT_GE(v, 1u);
      EXPECT_LE(v, cap);
      sum += v;
    }
    EXPECT_LE(sum, budget);
  }
}

TEST(SolveGridTest, Examples) {
  EXPECT_EQ(solve_grid(196), (Grid{14, 14}));
  EXPECT_EQ(solve_grid(210), (Grid{15, 14}));
  EXPECT_EQ(solve_grid(200), (Grid{14, 14}));
  EXPECT_EQ(solve_grid(1), (Grid{1, 1}));
  EXPECT_EQ(solve_grid(2), (Grid{2, 1}));
  EXPECT_EQ(solve_grid(3), (Grid{2, 1}));
  try {
    solve_grid(0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveTarget);
  }
}

TEST(SolveGridTest, BruteForceUpTo1e5) {
  std::size_t side = 0;
  for (std::size_t n = 1; n <= 100000; ++n) {
    while ((side + 1) * (side + 1) <= n) ++side;
    Grid best{0, 0};
    for (std::size_t h : {side, side + 1}) {
      if (h * side <= n && h * side > best.tokens()) best = {h, side};
    }
    const Grid got = solve_grid(n);
    ASSERT_EQ(got, best) << n;
    ASSERT_LE(got.tokens(), n);
    ASSERT_GE(got.tokens(), side * side);
    ASSERT_LE(got.height - got.width, 1u);
  }
}

TEST(SolveGridTest, WithinNonSquareSource) {
  EXPECT_EQ(solve_grid_within(196, 14, 14), (Grid{14, 14}));
  EXPECT_EQ(solve_grid_within(64, 4, 16), (Grid{4, 16}));
  EXPECT_EQ(solve_grid_within(30, 2, 40), (Grid{2, 15}));
  const Grid g = solve_grid_within(50, 3, 9);
  EXPECT_LE(g.height, 3u);
  EXPECT_LE(g.width, 9u);
  EXPECT_EQ(g.tokens(), 27u);
}

TEST(RedistributeTest, SinglePass) {
  auto r = redistribute_weights_traced(NormalizedScores({0.8, 0.2}), 300, 196);
  EXPECT_EQ(r.passes, 1u);
  EXPECT_NEAR(r.weights[0], 196.0 / 300.0, 1e-12);
  EXPECT_NEAR(r.weights[1], 0.2 + 0.8 - 196.0 / 300.0, 1e-12);
}

TEST(RedistributeTest, CascadesToFixedPoint) {
  std::vector<std::vector<double>> passes;
  auto r = redistribute_weights_traced(
      NormalizedScores({0.8, 0.15, 0.05}), 290, 100,
      [&](std::size_t, std::span<const double> w) { passes.emplace_back(w.begin(), w.end()); });
  ASSERT_EQ(r.passes, 2u);
  ASSERT_EQ(passes.size(), 2u);
  EXPECT_NEAR(passes[0][1] * 290, 142.5, 0.05);  // frame 1 overflows after the first pass
  EXPECT_NEAR(r.weights[0], 100.0 / 290, 1e-12);
  EXPECT_NEAR(r.weights[1], 100.0 / 290, 1e-12);
  EXPECT_NEAR(r.weights[2], 90.0 / 290, 1e-12);
}

TEST(RedistributeTest, NoFrameOverCapIsUnchanged) {
  const NormalizedScores w({0.3, 0.3, 0.4});
  auto r = redistribute_weights_traced(w, 300, 196);
  EXPECT_EQ(r.passes, 0u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.weights[i], w[i]);
}

TEST(RedistributeTest, InfeasibleBudget) {
  try {
    redistribute_weights(NormalizedScores({0.5, 0.5}), 393, 196);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleBudget);
  }
}

TEST(RedistributeTest, FullBudgetClampsEveryFrame) {
  auto r = redistribute_weights(NormalizedScores({0.7, 0.2, 0.1}), 588, 196);
  for (double w : r.weights()) EXPECT_NEAR(w * 588, 196.0, 1e-6);
}

TEST(RedistributeTest, RandomInstancesReachFixedPoint) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    const std::size_t cap = 1 + rng() % 256;
    const std::size_t budget = 1 + rng() % (n * cap);
    const auto w = random_weights(rng, n, true);
    std::size_t observed = 0;
    auto r = redistribute_weights_traced(w, budget, cap, [&](std::size_t, std::span<const double> cur) {
      ++observed;
      EXPECT_NEAR(std::accumulate(cur.begin(), cur.end(), 0.0), 1.0, 1e-9);
    });
    EXPECT_LE(r.passes, n);
    EXPECT_EQ(observed, r.passes);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE(r.weights[i] * budget, cap + 1e-6);
      sum += r.weights[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(BudgetSafetyTest, GridsNeverExceedBudget) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng() % 160;
    const std::size_t budget = n + rng() % 20000;
    const auto w = random_weights(rng, n, trial % 3 == 0);
    const auto targets = allocate_budget(w, budget);
    std::size_t used = 0;
    for (auto t : targets) used += solve_grid(t).tokens();
    ASSERT_LE(used, budget);
  }
}

TEST(PlanAllocationTest, PoolRedistributesBilinearDoesNot) {
  const NormalizedScores w({0.8, 0.2});
  const auto pool = plan_allocation(w, 300, AssignerKind::kPool, {14, 14});
  EXPECT_NEAR(pool.weights[0], 196.0 / 300, 1e-12);
  EXPECT_EQ(pool.plan.targets()[0], 196u);
  EXPECT_EQ(pool.plan.targets()[1], 104u);
  EXPECT_EQ(pool.plan.grids()[0], (Grid{14, 14}));
  EXPECT_EQ(pool.plan.grids()[1], (Grid{10, 10}));

  const auto bil = plan_allocation(w, 300, AssignerKind::kBilinear, {14, 14});
  EXPECT_EQ(bil.weights[0], 0.8);
  EXPECT_EQ(bil.plan.targets()[0], 240u);
  EXPECT_EQ(bil.plan.grids()[0], (Grid{16, 15}));
}

TEST(PlanAllocationTest, BaselineBudgets) {
  for (std::size_t frames : {16u, 32u, 64u}) {
    const NormalizedScores w(std::vector<double>(frames, 1.0 / static_cast<double>(frames)));
    for (auto kind : {AssignerKind::kBilinear, AssignerKind::kPool, AssignerKind::kMerge}) {
      const auto out = plan_allocation(w, frames * 196, kind, {14, 14});
      EXPECT_EQ(out.plan.used_tokens(), frames * 196);
    }
  }
}

}  // namespace
}  // namespace quota
