#pragma once

// The three token assigners. Each maps one frame's H x W token grid to a
// target grid: bilinear resize (up or down), adaptive average pooling (down
// only) and bipartite soft-matching merges along rows and columns (down only).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "quota/error.hpp"
#include "quota/types.hpp"

namespace quota {

namespace detail {

inline void require_positive(Grid g) {
  if (g.height == 0 || g.width == 0) {
    throw Error(ErrorCode::kNonPositiveTarget, "target grid dimensions must be >= 1");
  }
}

inline void require_downsample(const FrameEmbedding& f, Grid g) {
  require_positive(g);
  if (g.height > f.height() || g.width > f.width()) {
    throw Error(ErrorCode::kUpsampleRequested,
                std::to_string(f.height()) + "x" + std::to_string(f.width()) + " -> " +
                    std::to_string(g.height) + "x" + std::to_string(g.width));
  }
}

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

// Half-pixel-center source taps for one output axis.
inline std::vector<Tap> bilinear_taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  const double last = static_cast<double>(src - 1);
  for (std::size_t j = 0; j < dst; ++j) {
    const double pos =
        std::clamp((static_cast<double>(j) + 0.5) * scale - 0.5, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    taps[j] = {lo, std::min(lo + 1, src - 1), pos - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace detail

/// Separable bilinear resize with half-pixel centers, per channel.
inline FrameEmbedding resize_bilinear(const FrameEmbedding& f, Grid g) {
  detail::require_positive(g);
  const std::size_t c_dim = f.dim();
  const auto rows = detail::bilinear_taps(f.height(), g.height);
  const auto cols = detail::bilinear_taps(f.width(), g.width);
  std::vector<float> out(g.tokens() * c_dim);
  for (std::size_t i = 0; i < g.height; ++i) {
    const auto& ty = rows[i];
    for (std::size_t j = 0; j < g.width; ++j) {
      const auto& tx = cols[j];
      const auto p00 = f.token(ty.lo, tx.lo), p01 = f.token(ty.lo, tx.hi);
      const auto p10 = f.token(ty.hi, tx.lo), p11 = f.token(ty.hi, tx.hi);
      float* dst = out.data() + (i * g.width + j) * c_dim;
      for (std::size_t c = 0; c < c_dim; ++c) {
        const double top = p00[c] + tx.frac * (static_cast<double>(p01[c]) - p00[c]);
        const double bot = p10[c] + tx.frac * (static_cast<double>(p11[c]) - p10[c]);
        dst[c] = static_cast<float>(top + ty.frac * (bot - top));
      }
    }
  }
  return FrameEmbedding(g.height, g.width, c_dim, std::move(out));
}

/// Adaptive average pooling: output (i, j) averages source rows
/// [floor(i*H/h), ceil((i+1)*H/h)) and the analogous column window.
inline FrameEmbedding pool_adaptive(const FrameEmbedding& f, Grid g) {
  detail::require_downsample(f, g);
  const std::size_t h = f.height(), w = f.width(), c_dim = f.dim();
  std::vector<float> out(g.tokens() * c_dim);
  std::vector<double> acc(c_dim);
  for (std::size_t i = 0; i < g.height; ++i) {
    const std::size_t r0 = i * h / g.height;
    const std::size_t r1 = ((i + 1) * h + g.height - 1) / g.height;
    for (std::size_t j = 0; j < g.width; ++j) {
      const std::size_t c0 = j * w / g.width;
      const std::size_t c1 = ((j + 1) * w + g.width - 1) / g.width;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) {
          const auto tok = f.token(r, c);
          for (std::size_t k = 0; k < c_dim; ++k) acc[k] += tok[k];
        }
      }
      const double count = static_cast<double>((r1 - r0) * (c1 - c0));
      float* dst = out.data() + (i * g.width + j) * c_dim;
      for (std::size_t k = 0; k < c_dim; ++k) dst[k] = static_cast<float>(acc[k] / count);
    }
  }
  return FrameEmbedding(g.height, g.width, c_dim, std::move(out));
}

/// Cosine similarity with 64-bit accumulation; 0 when either vector is zero.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// One A->B merge chosen inside a line of tokens (positions in the line).
struct MergePair {
  std::size_t a;
  std::size_t b;
  double similarity;
};

/// Bipartite matching for one line: even positions form A, odd positions B.
/// Pairs are taken greedily in order of decreasing cosine similarity (ties to
/// the lowest A, then lowest B position), skipping tokens already used, until
/// `r` disjoint pairs are chosen. Requires r <= line_length / 2.
inline std::vector<MergePair> match_line(std::span<const std::span<const double>> tokens,
                                         std::size_t r) {
  std::vector<MergePair> candidates;
  for (std::size_t a = 0; a < tokens.size(); a += 2) {
    for (std::size_t b = 1; b < tokens.size(); b += 2) {
      candidates.push_back({a, b, cosine_similarity(tokens[a], tokens[b])});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MergePair& x, const MergePair& y) { return x.similarity > y.similarity; });
  std::vector<bool> used(tokens.size(), false);
  std::vector<MergePair> chosen;
  for (const auto& p : candidates) {
    if (chosen.size() == r) break;
    if (used[p.a] || used[p.b]) continue;
    used[p.a] = used[p.b] = true;
    chosen.push_back(p);
  }
  return chosen;
}

namespace detail {

// Mutable grid used between merge passes; values stay in double until the
// final frame is produced.
struct MergeGrid {
  std::size_t height;
  std::size_t width;
  std::size_t dim;
  std::vector<double> values;
  std::vector<std::uint32_t> sizes;

  std::span<const double> token(std::size_t r, std::size_t c) const {
    return std::span<const double>(values).subspan((r * width + c) * dim, dim);
  }
};

// Merges r pairs inside every line along one axis. along_rows: each row is a
// line and the width shrinks; otherwise each column is a line and the height
// shrinks.
inline MergeGrid merge_pass(const MergeGrid& in, bool along_rows, std::size_t r) {
  const std::size_t lines = along_rows ? in.height : in.width;
  const std::size_t length = along_rows ? in.width : in.height;
  MergeGrid out{along_rows ? in.height : in.height - r, along_rows ? in.width - r : in.width,
                in.dim, {}, {}};
  out.values.resize(out.height * out.width * out.dim);
  out.sizes.resize(out.height * out.width);

  std::vector<std::span<const double>> line(length);
  std::vector<std::size_t> partner(length);
  for (std::size_t l = 0; l < lines; ++l) {
    auto at = [&](std::size_t pos) {
      return along_rows ? std::pair{l, pos} : std::pair{pos, l};
    };
    for (std::size_t p = 0; p < length; ++p) {
      const auto [row, col] = at(p);
      line[p] = in.token(row, col);
    }
    const auto pairs = match_line(line, r);
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::fill(partner.begin(), partner.end(), kNone);
    std::vector<bool> absorbed(length, false);
    for (const auto& p : pairs) {
      partner[p.b] = p.a;
      absorbed[p.a] = true;
    }

    std::size_t slot = 0;
    for (std::size_t p = 0; p < length; ++p) {
      if (absorbed[p]) continue;
      const auto [row, col] = at(p);
      const auto [orow, ocol] = along_rows ? std::pair{l, slot} : std::pair{slot, l};
      const std::size_t dst_tok = orow * out.width + ocol;
      double* dst = out.values.data() + dst_tok * out.dim;
      const auto src = in.token(row, col);
      const std::uint32_t size_b = in.sizes[row * in.width + col];
      if (partner[p] == kNone) {
        std::copy(src.begin(), src.end(), dst);
        out.sizes[dst_tok] = size_b;
      } else {
        const auto [arow, acol] = at(partner[p]);
        const auto other = in.token(arow, acol);
        const std::uint32_t size_a = in.sizes[arow * in.width + acol];
        const double total = static_cast<double>(size_a) + static_cast<double>(size_b);
        for (std::size_t k = 0; k < in.dim; ++k) {
          dst[k] = (size_a * other[k] + size_b * src[k]) / total;
        }
        out.sizes[dst_tok] = size_a + size_b;
      }
      ++slot;
    }
  }
  return out;
}

}  // namespace detail

/// Pair merges needed to take `current` to `target` in one pass along an axis.
inline std::size_t merges_per_pass(std::size_t current, std::size_t target) {
  return std::min(current - target, current / 2);
}

/// Token merging down to grid g. Each pass works on the axis with the larger
/// relative excess (rows first on ties) and merges the same number of pairs in
/// every line so the grid stays rectangular. Merged tokens are size-weighted
/// means; the output carries the accumulated sizes.
inline FrameEmbedding merge_tokens(const FrameEmbedding& f, Grid g) {
  detail::require_downsample(f, g);
  detail::MergeGrid grid{f.height(), f.width(), f.dim(),
                         std::vector<double>(f.data().begin(), f.data().end()), {}};
  grid.sizes.resize(f.token_count());
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) grid.sizes[r * f.width() + c] = f.size_at(r, c);
  }

  while (grid.height > g.height || grid.width > g.width) {
    const double excess_w = static_cast<double>(grid.width - g.width) / grid.width;
    const double excess_h = static_cast<double>(grid.height - g.height) / grid.height;
    if (excess_w >= excess_h) {
      grid = detail::merge_pass(grid, true, merges_per_pass(grid.width, g.width));
    } else {
      grid = detail::merge_pass(grid, false, merges_per_pass(grid.height, g.height));
    }
  }

  std::vector<float> out(grid.values.size());
  std::transform(grid.values.begin(), grid.values.end(), out.begin(),
                 [](double v) { return static_cast<float>(v); });
  return FrameEmbedding(grid.height, grid.width, grid.dim, std::move(out), std::move(grid.sizes));
}

inline FrameEmbedding assign_frame(const FrameEmbedding& f, Grid g, AssignerKind kind) {
  switch (kind) {
    case AssignerKind::kBilinear: return resize_bilinear(f, g);
    case AssignerKind::kPool: return pool_adaptive(f, g);
    case AssignerKind::kMerge: return merge_tokens(f, g);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown assigner");
}

/// Applies the assigner to every frame using the plan's grids. Per-frame
/// failures are rethrown with the frame index attached.
inline ReducedVideoEmbeddings assign_all(const VideoEmbeddings& video, const AllocationPlan& plan,
                                         AssignerKind kind) {
  if (plan.frame_count() != video.frame_count()) {
    throw Error(ErrorCode::kInvariantViolation,
                "plan covers " + std::to_string(plan.frame_count()) + " frames, video has " +
                    std::to_string(video.frame_count()));
  }
  std::vector<FrameEmbedding> frames;
  frames.reserve(video.frame_count());
  for (std::size_t i = 0; i < video.frame_count(); ++i) {
    try {
      frames.push_back(assign_frame(video[i], plan.grids()[i], kind));
    } catch (const Error& e) {
      throw e.with_frame(i);
    }
  }
  return ReducedVideoEmbeddings(VideoEmbeddings(std::move(frames)), kind);
}

}  // namespace quota
