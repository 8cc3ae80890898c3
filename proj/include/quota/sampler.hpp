#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "quota/error.hpp"

namespace quota {

/// Frame-count policy for duration-adaptive sampling.
struct SamplingConfig {
  std::size_t t_base = 96;  ///< frames sampled for any video
  std::size_t alpha = 64;   ///< cap on extra frames, reached at one hour

  void check() const {
    if (t_base < 1) throw Error(ErrorCode::kInvalidArgument, "t_base must be >= 1");
  }
};

/// T = t_base + min(floor(duration / 3600 * alpha), alpha).
inline std::size_t compute_frame_count(double duration_s, const SamplingConfig& cfg) {
  cfg.check();
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::kNonPositiveDuration, "duration must be a positive number of seconds");
  }
  const double alpha = static_cast<double>(cfg.alpha);
  // Multiply before dividing so whole-second durations stay exact.
  const double extra = std::floor(duration_s * alpha / 3600.0);
  return cfg.t_base + static_cast<std::size_t>(std::min(extra, alpha));
}

/// Centers of T equal intervals spanning [0, duration_s].
inline std::vector<double> sample_timestamps(double duration_s, std::size_t frame_count) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::kNonPositiveDuration, "duration must be a positive number of seconds");
  }
  if (frame_count == 0) throw Error(ErrorCode::kZeroFrames, "frame count must be >= 1");
  std::vector<double> out(frame_count);
  // (2i + 1) * d / 2T: a single rounding, so exact whenever representable.
  const double denom = 2.0 * static_cast<double>(frame_count);
  for (std::size_t i = 0; i < frame_count; ++i) {
    out[i] = static_cast<double>(2 * i + 1) * duration_s / denom;
  }
  return out;
}

}  // namespace quota
