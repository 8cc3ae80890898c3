#pragma once

// Test-only reference for token merging. The pair selection enumerates every
// set of r disjoint A-B pairs in a line and keeps the set whose pairs, listed
// by (similarity desc, A asc, B asc), form the lexicographically smallest
// sequence. Everything else (pass schedule, size-weighted means) follows the
// documented merge rules directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "quota/types.hpp"

namespace quota::oracle {

struct Pair {
  std::size_t a;
  std::size_t b;
  double sim;
};

inline double cosine(const std::vector<double>& x, const std::vector<double>& y) {
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    dot += x[k] * y[k];
    nx += x[k] * x[k];
    ny += y[k] * y[k];
  }
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

inline bool key_less(const Pair& p, const Pair& q) {
  if (p.sim != q.sim) return p.sim > q.sim;
  if (p.a != q.a) return p.a < q.a;
  return p.b < q.b;
}

inline std::vector<Pair> best_matching(const std::vector<std::vector<double>>& line, std::size_t r) {
  std::vector<std::size_t> as, bs;
  for (std::size_t p = 0; p < line.size(); ++p) (p % 2 == 0 ? as : bs).push_back(p);

  std::vector<Pair> best, cur;
  bool have = false;
  std::vector<bool> used_b(line.size(), false);
  auto better = [](std::vector<Pair> x, std::vector<Pair> y) {
    std::sort(x.begin(), x.end(), key_less);
    std::sort(y.begin(), y.end(), key_less);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (key_less(x[i], y[i])) return true;
      if (key_less(y[i], x[i])) return false;
    }
    return false;
  };
  std::function<void(std::size_t)> rec = [&](std::size_t ai) {
    if (cur.size() == r) {
      if (!have || better(cur, best)) {
        best = cur;
        have = true;
      }
      return;
    }
    if (ai == as.size()) return;
    // A token ai unmatched.
    if (as.size() - ai - 1 >= r - cur.size()) rec(ai + 1);
    for (std::size_t b : bs) {
      if (used_b[b]) continue;
      used_b[b] = true;
      cur.push_back({as[ai], b, cosine(line[as[ai]], line[b])});
      rec(ai + 1);
      cur.pop_back();
      used_b[b] = false;
    }
  };
  rec(0);
  return best;
}

struct Grid2 {
  std::size_t h, w;
  std::vector<std::vector<double>> tok;  // h*w tokens
  std::vector<std::uint32_t> size;
};

inline Grid2 pass(const Grid2& g, bool along_rows, std::size_t r) {
  Grid2 out{along_rows ? g.h : g.h - r, along_rows ? g.w - r : g.w, {}, {}};
  out.tok.resize(out.h * out.w);
  out.size.resize(out.h * out.w);
  const std::size_t lines = along_rows ? g.h : g.w;
  const std::size_t len = along_rows ? g.w : g.h;
  for (std::size_t l = 0; l < lines; ++l) {
    auto idx = [&](std::size_t p) { return along_rows ? l * g.w + p : p * g.w + l; };
    std::vector<std::vector<double>> line;
    for (std::size_t p = 0; p < len; ++p) line.push_back(g.tok[idx(p)]);
    const auto pairs = best_matching(line, r);
    std::vector<long> into(len, -1);
    std::vector<bool> gone(len, false);
    for (const auto& p : pairs) {
      into[p.b] = static_cast<long>(p.a);
      gone[p.a] = true;
    }
    std::size_t slot = 0;
    for (std::size_t p = 0; p < len; ++p) {
      if (gone[p]) continue;
      const std::size_t o = along_rows ? l * out.w + slot : slot * out.w + l;
      if (into[p] < 0) {
        out.tok[o] = g.tok[idx(p)];
        out.size[o] = g.size[idx(p)];
      } else {
        const auto a = idx(static_cast<std::size_t>(into[p]));
        const auto b = idx(p);
        const double sa = g.size[a], sb = g.size[b];
        std::vector<double> m(g.tok[b].size());
        for (std::size_t k = 0; k < m.size(); ++k) {
          m[k] = (sa * g.tok[a][k] + sb * g.tok[b][k]) / (sa + sb);
        }
        out.tok[o] = m;
        out.size[o] = g.size[a] + g.size[b];
      }
      ++slot;
    }
  }
  return out;
}

inline FrameEmbedding merge(const FrameEmbedding& f, Grid target) {
  Grid2 g{f.height(), f.width(), {}, {}};
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      const auto t = f.token(r, c);
      g.tok.emplace_back(t.begin(), t.end());
      g.size.push_back(f.size_at(r, c));
    }
  }
  while (g.h > target.height || g.w > target.width) {
    const double ew = static_cast<double>(g.w - target.width) / g.w;
    const double eh = static_cast<double>(g.h - target.height) / g.h;
    if (ew >= eh) {
      g = pass(g, true, std::min(g.w - target.width, g.w / 2));
    } else {
      g = pass(g, false, std::min(g.h - target.height, g.h / 2));
    }
  }
  std::vector<float> data;
  for (const auto& t : g.tok) {
    for (double v : t) data.push_back(static_cast<float>(v));
  }
  return FrameEmbedding(g.h, g.w, f.dim(), std::move(data), g.size);
}

}  // namespace quota::oracle
