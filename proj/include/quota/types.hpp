#pragma once

// Domain types shared by every stage of the token-assignment pipeline. All of
// them validate on construction and are immutable afterwards.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quota/error.hpp"

namespace quota {

/// Checks the FrameEmbedding invariants on raw parts. Returns the first
/// violation found, or nullopt when the parts describe a valid frame.
inline std::optional<Error> validate_frame(std::size_t height, std::size_t width,
                                           std::size_t dim, std::span<const float> data,
                                           std::span<const std::uint32_t> sizes) {
  if (height == 0 || width == 0 || dim == 0) {
    return Error(ErrorCode::kInvariantViolation, "frame dimensions must be positive");
  }
  if (data.size() != height * width * dim) {
    return Error(ErrorCode::kInvariantViolation,
                 "data length " + std::to_string(data.size()) + " != H*W*C = " +
                     std::to_string(height * width * dim));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      return Error(ErrorCode::kNonFiniteValue,
                   "element " + std::to_string(i) + " is not finite");
    }
  }
  if (!sizes.empty()) {
    if (sizes.size() != height * width) {
      return Error(ErrorCode::kInvariantViolation, "sizes length must equal H*W");
    }
    for (auto s : sizes) {
      if (s == 0) return Error(ErrorCode::kInvariantViolation, "token size must be >= 1");
    }
  }
  return std::nullopt;
}

/// One frame's H x W grid of C-dimensional tokens, row-major with the channel
/// index fastest. `sizes` counts how many original tokens each entry stands
/// for; it is empty until a merge produces it, and empty means "all 1".
class FrameEmbedding {
 public:
  FrameEmbedding(std::size_t height, std::size_t width, std::size_t dim,
                 std::vector<float> data, std::vector<std::uint32_t> sizes = {})
      : height_(height), width_(width), dim_(dim), data_(std::move(data)),
        sizes_(std::move(sizes)) {
    if (auto err = validate_frame(height_, width_, dim_, data_, sizes_)) throw *err;
  }

  static FrameEmbedding filled(std::size_t height, std::size_t width, std::size_t dim,
                               float value) {
    return FrameEmbedding(height, width, dim,
                          std::vector<float>(height * width * dim, value));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t token_count() const noexcept { return height_ * width_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> token(std::size_t row, std::size_t col) const noexcept {
    return std::span<const float>(data_).subspan((row * width_ + col) * dim_, dim_);
  }

  bool has_sizes() const noexcept { return !sizes_.empty(); }
  std::span<const std::uint32_t> sizes() const noexcept { return sizes_; }
  std::uint32_t size_at(std::size_t row, std::size_t col) const noexcept {
    return sizes_.empty() ? 1u : sizes_[row * width_ + col];
  }

  /// Copy with the merge-size counters dropped.
  FrameEmbedding without_sizes() const { return FrameEmbedding(height_, width_, dim_, data_); }

  friend bool operator==(const FrameEmbedding&, const FrameEmbedding&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t dim_;
  std::vector<float> data_;
  std::vector<std::uint32_t> sizes_;
};

/// Bitwise equality of shape and element payload (ignores sizes).
inline bool bit_equal(const FrameEmbedding& a, const FrameEmbedding& b) {
  if (a.height() != b.height() || a.width() != b.width() || a.dim() != b.dim()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.data().size_bytes()) == 0;
}

inline std::optional<Error> validate(std::span<const FrameEmbedding> frames) {
  if (frames.empty()) return Error(ErrorCode::kEmptyVideo, "video has no frames");
  const std::size_t dim = frames.front().dim();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (auto err = validate_frame(f.height(), f.width(), f.dim(), f.data(), f.sizes())) {
      return err->with_frame(i);
    }
    if (f.dim() != dim) {
      return Error(ErrorCode::kDimensionMismatch,
                   "channel count " + std::to_string(f.dim()) + " differs from " +
                       std::to_string(dim),
                   i);
    }
  }
  return std::nullopt;
}

/// Ordered frames sharing one channel count. Grid sizes may differ per frame
/// (they do after reduction).
class VideoEmbeddings {
 public:
  explicit VideoEmbeddings(std::vector<FrameEmbedding> frames) : frames_(std::move(frames)) {
    if (auto err = validate(frames_)) throw *err;
  }

  std::span<const FrameEmbedding> frames() const noexcept { return frames_; }
  const FrameEmbedding& operator[](std::size_t i) const { return frames_[i]; }
  std::size_t frame_count() const noexcept { return frames_.size(); }
  std::size_t dim() const noexcept { return frames_.front().dim(); }

  std::size_t total_tokens() const noexcept {
    std::size_t total = 0;
    for (const auto& f : frames_) total += f.token_count();
    return total;
  }

  /// True when every frame has the same H and W.
  bool uniform_grid() const noexcept {
    for (const auto& f : frames_) {
      if (f.height() != frames_.front().height() || f.width() != frames_.front().width()) {
        return false;
      }
    }
    return true;
  }

  friend bool operator==(const VideoEmbeddings&, const VideoEmbeddings&) = default;

 private:
  std::vector<FrameEmbedding> frames_;
};

inline std::optional<Error> validate(const VideoEmbeddings& video) {
  return validate(video.frames());
}

/// Raw per-frame relevance scores, finite and non-negative.
class ScoreVector {
 public:
  explicit ScoreVector(std::vector<double> scores) : scores_(std::move(scores)) {
    for (std::size_t i = 0; i < scores_.size(); ++i) {
      if (!std::isfinite(scores_[i])) {
        throw Error(ErrorCode::kNonFiniteValue, "score is not finite", i);
      }
      if (scores_[i] < 0.0) {
        throw Error(ErrorCode::kNegativeScore, std::to_string(scores_[i]), i);
      }
    }
  }

  std::span<const double> scores() const noexcept { return scores_; }
  std::size_t size() const noexcept { return scores_.size(); }
  double operator[](std::size_t i) const { return scores_[i]; }

  friend bool operator==(const ScoreVector&, const ScoreVector&) = default;

 private:
  std::vector<double> scores_;
};

inline constexpr double kWeightSumTolerance = 1e-9;

/// Per-frame allocation weights in [0, 1] that sum to 1.
class NormalizedScores {
 public:
  explicit NormalizedScores(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw Error(ErrorCode::kEmptyVideo, "no weights");
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const double w = weights_[i];
      if (!std::isfinite(w) || w < -kWeightSumTolerance || w > 1.0 + kWeightSumTolerance) {
        throw Error(ErrorCode::kInvariantViolation, "weight outside [0,1]", i);
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
      throw Error(ErrorCode::kInvariantViolation,
                  "weights sum to " + std::to_string(sum) + ", expected 1");
    }
  }

  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

 private:
  std::vector<double> weights_;
};

enum class DecoupleStrategy { kDirect, kEntityList, kEventQuestion };

constexpr std::string_view to_string(DecoupleStrategy s) {
  switch (s) {
    case DecoupleStrategy::kDirect: return "direct";
    case DecoupleStrategy::kEntityList: return "entity-list";
    case DecoupleStrategy::kEventQuestion: return "event-question";
  }
  return "direct";
}

/// Result of query decoupling: the original query plus, depending on the
/// strategy, an object list or a simplified event question.
class DecoupledQuery {
 public:
  static DecoupledQuery direct(std::string source_query) {
    return DecoupledQuery(DecoupleStrategy::kDirect, std::move(source_query), std::nullopt,
                          std::nullopt);
  }
  static DecoupledQuery entities(std::string source_query, std::vector<std::string> objects) {
    if (objects.empty()) {
      throw Error(ErrorCode::kInvariantViolation, "entity-list requires at least one object");
    }
    for (const auto& o : objects) {
      if (o.empty()) throw Error(ErrorCode::kInvariantViolation, "empty object name");
    }
    return DecoupledQuery(DecoupleStrategy::kEntityList, std::move(source_query),
                          std::move(objects), std::nullopt);
  }
  static DecoupledQuery event(std::string source_query, std::string question) {
    if (question.empty()) {
      throw Error(ErrorCode::kInvariantViolation, "event-question requires a question");
    }
    return DecoupledQuery(DecoupleStrategy::kEventQuestion, std::move(source_query),
                          std::nullopt, std::move(question));
  }

  DecoupleStrategy strategy() const noexcept { return strategy_; }
  const std::string& source_query() const noexcept { return source_query_; }
  const std::optional<std::vector<std::string>>& object_list() const noexcept {
    return object_list_;
  }
  const std::optional<std::string>& event_question() const noexcept { return event_question_; }

  friend bool operator==(const DecoupledQuery&, const DecoupledQuery&) = default;

 private:
  DecoupledQuery(DecoupleStrategy strategy, std::string source_query,
                 std::optional<std::vector<std::string>> object_list,
                 std::optional<std::string> event_question)
      : strategy_(strategy), source_query_(std::move(source_query)),
        object_list_(std::move(object_list)), event_question_(std::move(event_question)) {}

  DecoupleStrategy strategy_;
  std::string source_query_;
  std::optional<std::vector<std::string>> object_list_;
  std::optional<std::string> event_question_;
};

struct Grid {
  std::size_t height = 1;
  std::size_t width = 1;

  constexpr std::size_t tokens() const noexcept { return height * width; }
  friend constexpr bool operator==(const Grid&, const Grid&) = default;
};

/// Per-frame token targets and the grids solved from them under one budget.
class AllocationPlan {
 public:
  AllocationPlan(std::size_t budget, std::vector<std::size_t> targets, std::vector<Grid> grids)
      : budget_(budget), targets_(std::move(targets)), grids_(std::move(grids)) {
    if (budget_ == 0) throw Error(ErrorCode::kInvariantViolation, "budget must be positive");
    if (targets_.empty() || targets_.size() != grids_.size()) {
      throw Error(ErrorCode::kInvariantViolation, "targets and grids must cover every frame");
    }
    std::size_t used = 0;
    for (std::size_t i = 0; i < grids_.size(); ++i) {
      const Grid& g = grids_[i];
      if (g.height == 0 || g.width == 0) {
        throw Error(ErrorCode::kInvariantViolation, "grid dimension is zero", i);
      }
      if (g.tokens() > std::max<std::size_t>(targets_[i], 1)) {
        throw Error(ErrorCode::kInvariantViolation, "grid exceeds target", i);
      }
      used += g.tokens();
    }
    if (used > budget_) {
      throw Error(ErrorCode::kInvariantViolation,
                  "plan uses " + std::to_string(used) + " tokens, budget " +
                      std::to_string(budget_));
    }
  }

  std::size_t budget() const noexcept { return budget_; }
  std::span<const std::size_t> targets() const noexcept { return targets_; }
  std::span<const Grid> grids() const noexcept { return grids_; }
  std::size_t frame_count() const noexcept { return grids_.size(); }

  std::size_t used_tokens() const noexcept {
    std::size_t used = 0;
    for (const auto& g : grids_) used += g.tokens();
    return used;
  }

 private:
  std::size_t budget_;
  std::vector<std::size_t> targets_;
  std::vector<Grid> grids_;
};

enum class AssignerKind { kBilinear, kPool, kMerge };

constexpr std::string_view to_string(AssignerKind k) {
  switch (k) {
    case AssignerKind::kBilinear: return "bilinear";
    case AssignerKind::kPool: return "pool";
    case AssignerKind::kMerge: return "merge";
  }
  return "bilinear";
}

inline AssignerKind parse_assigner(std::string_view name) {
  if (name == "bilinear") return AssignerKind::kBilinear;
  if (name == "pool") return AssignerKind::kPool;
  if (name == "merge") return AssignerKind::kMerge;
  throw Error(ErrorCode::kInvalidArgument, "unknown assigner '" + std::string(name) + "'");
}

/// Output of the token assigner: one reduced frame per input frame.
class ReducedVideoEmbeddings {
 public:
  ReducedVideoEmbeddings(VideoEmbeddings video, AssignerKind assigner)
      : video_(std::move(video)), assigner_(assigner) {}

  const VideoEmbeddings& video() const noexcept { return video_; }
  AssignerKind assigner() const noexcept { return assigner_; }

 private:
  VideoEmbeddings video_;
  AssignerKind assigner_;
};

}  // namespace quota
