#pragma once

// Turning normalized frame weights and a total token budget into integer
// per-frame targets and the grid each frame is resized to.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "quota/error.hpp"
#include "quota/types.hpp"

namespace quota {

/// Largest grid (rows, cols) with rows*cols <= n, starting from a
/// floor(sqrt(n)) square and adding one row when that still fits.
inline Grid solve_grid(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kNonPositiveTarget, "grid target must be >= 1");
  auto side = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (side * side > n) --side;
  while ((side + 1) * (side + 1) <= n) ++side;
  Grid g{side, side};
  if ((g.height + 1) * g.width <= n) ++g.height;
  return g;
}

/// solve_grid restricted to grids that fit inside a max_h x max_w source, as
/// the down-sampling assigners require. Only differs from solve_grid for
/// non-square sources.
inline Grid solve_grid_within(std::size_t n, std::size_t max_h, std::size_t max_w) {
  Grid g = solve_grid(n);
  if (g.height <= max_h && g.width <= max_w) return g;
  Grid best{1, 1};
  for (std::size_t h = 1; h <= max_h; ++h) {
    const std::size_t w = std::min(max_w, n / h);
    if (w == 0) break;
    const Grid cand{h, w};
    const auto skew = [](const Grid& x) {
      return x.height > x.width ? x.height - x.width : x.width - x.height;
    };
    if (cand.tokens() > best.tokens() ||
        (cand.tokens() == best.tokens() && skew(cand) < skew(best))) {
      best = cand;
    }
  }
  return best;
}

/// Integer targets N_i ~ w_i * budget: floors plus largest-remainder
/// distribution of the leftover (ties to the lowest index), then a floor of 1
/// token per frame. Tokens granted by the floor are taken back from the most
/// over-allocated frames so the sum never exceeds the budget. With
/// `per_frame_cap`, no target exceeds the cap.
inline std::vector<std::size_t> allocate_budget(const NormalizedScores& w, std::size_t budget,
                                                std::optional<std::size_t> per_frame_cap = {}) {
  const std::size_t frames = w.size();
  if (budget < frames) {
    throw Error(ErrorCode::kBudgetTooSmall, "budget " + std::to_string(budget) + " < " +
                                                std::to_string(frames) + " frames");
  }
  const std::size_t cap = per_frame_cap.value_or(budget);
  if (cap == 0) throw Error(ErrorCode::kInvalidArgument, "per-frame cap must be >= 1");

  std::vector<double> ideal(frames);
  std::vector<std::size_t> targets(frames);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    ideal[i] = std::max(0.0, w[i]) * static_cast<double>(budget);
    targets[i] = std::min(cap, static_cast<std::size_t>(std::floor(ideal[i])));
    assigned += targets[i];
  }

  if (assigned < budget) {
    std::vector<std::size_t> order(frames);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ideal[a] - std::floor(ideal[a]) > ideal[b] - std::floor(ideal[b]);
    });
    std::size_t leftover = budget - assigned;
    for (std::size_t i : order) {
      if (leftover == 0) break;
      if (targets[i] >= cap) continue;
      ++targets[i];
      --leftover;
    }
  }

  std::size_t total = 0;
  for (auto& t : targets) {
    t = std::max<std::size_t>(t, 1);
    total += t;
  }
  while (total > budget) {
    std::size_t pick = frames;
    double worst = 0.0;
    for (std::size_t i = 0; i < frames; ++i) {
      if (targets[i] <= 1) continue;
      const double over = static_cast<double>(targets[i]) - ideal[i];
      if (pick == frames || over > worst) {
        pick = i;
        worst = over;
      }
    }
    --targets[pick];
    --total;
  }
  return targets;
}

struct RedistributionResult {
  NormalizedScores weights;
  std::size_t passes = 0;  ///< passes that clamped at least one frame
};

/// Called after every redistribution pass with the current weights.
using RedistributionObserver = std::function<void(std::size_t pass, std::span<const double>)>;

/// Clamps frames whose share w_i * budget exceeds `cap` tokens to exactly cap
/// and hands their excess to the unclamped frames in proportion to their
/// current weight. Repeats until no frame exceeds the cap; a clamped frame
/// never receives weight again, so at most T passes run.
inline RedistributionResult redistribute_weights_traced(const NormalizedScores& w,
                                                        std::size_t budget, std::size_t cap,
                                                        const RedistributionObserver& observe = {}) {
  const std::size_t frames = w.size();
  if (budget == 0 || cap == 0) {
    throw Error(ErrorCode::kInvalidArgument, "budget and cap must be positive");
  }
  if (budget > frames * cap) {
    throw Error(ErrorCode::kInfeasibleBudget,
                "budget " + std::to_string(budget) + " exceeds " + std::to_string(frames) +
                    " frames x " + std::to_string(cap) + " tokens");
  }
  const double n_t = static_cast<double>(budget);
  const double cap_weight = static_cast<double>(cap) / n_t;
  // Absolute slack on the token scale, so values landing on the cap through
  // rounding are not clamped again.
  const double slack = 1e-9;

  std::vector<double> weights(w.weights().begin(), w.weights().end());
  std::vector<bool> clamped(frames, false);
  std::size_t passes = 0;
  for (;;) {
    double excess = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < frames; ++i) {
      if (!clamped[i] && weights[i] * n_t > static_cast<double>(cap) + slack) {
        excess += weights[i] - cap_weight;
        weights[i] = cap_weight;
        clamped[i] = true;
        any = true;
      }
    }
    if (!any) break;
    ++passes;

    double receiver_mass = 0.0;
    std::size_t receivers = 0;
    for (std::size_t i = 0; i < frames; ++i) {
      if (!clamped[i]) {
        receiver_mass += weights[i];
        ++receivers;
      }
    }
    if (receivers == 0) break;  // only reachable when budget == frames * cap
    for (std::size_t i = 0; i < frames; ++i) {
      if (clamped[i]) continue;
      weights[i] += receiver_mass > 0.0
                        ? weights[i] / receiver_mass * excess
                        : excess / static_cast<double>(receivers);
    }
    if (observe) observe(passes, weights);
  }
  return {NormalizedScores(std::move(weights)), passes};
}

inline NormalizedScores redistribute_weights(const NormalizedScores& w, std::size_t budget,
                                             std::size_t cap) {
  return redistribute_weights_traced(w, budget, cap).weights;
}

struct AllocationOutcome {
  NormalizedScores weights;  ///< weights the targets were computed from
  AllocationPlan plan;
};

/// Full allocation for one assigner. The down-sampling assigners (pool,
/// merge) redistribute weights so no frame needs more tokens than its source
/// grid holds; bilinear uses the weights as given.
inline AllocationOutcome plan_allocation(const NormalizedScores& weights, std::size_t budget,
                                         AssignerKind assigner, Grid source) {
  if (assigner == AssignerKind::kBilinear) {
    auto targets = allocate_budget(weights, budget);
    std::vector<Grid> grids;
    grids.reserve(targets.size());
    for (auto t : targets) grids.push_back(solve_grid(t));
    return {weights, AllocationPlan(budget, std::move(targets), std::move(grids))};
  }
  const std::size_t cap = source.tokens();
  auto adjusted = redistribute_weights(weights, budget, cap);
  auto targets = allocate_budget(adjusted, budget, cap);
  std::vector<Grid> grids;
  grids.reserve(targets.size());
  for (auto t : targets) grids.push_back(solve_grid_within(t, source.height, source.width));
  return {std::move(adjusted), AllocationPlan(budget, std::move(targets), std::move(grids))};
}

}  // namespace quota
