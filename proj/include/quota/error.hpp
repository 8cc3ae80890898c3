#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace quota {

enum class ErrorCode {
  kEmptyVideo,
  kDimensionMismatch,
  kNonFiniteValue,
  kInvariantViolation,
  kNonPositiveDuration,
  kZeroFrames,
  kEmptyQuery,
  kUnparseableResponse,
  kScorerUnreachable,
  kBadResponse,
  kScoreCountMismatch,
  kOutOfRangeScore,
  kNegativeScore,
  kBudgetTooSmall,
  kNonPositiveTarget,
  kInfeasibleBudget,
  kUpsampleRequested,
  kBadMagic,
  kTruncatedFile,
  kVersionUnsupported,
  kTrailingData,
  kMalformedJson,
  kNonNumericScore,
  kIoFailure,
  kInvalidArgument,
};

/// Stable kebab-case identifier used in error JSON and test assertions.
constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyVideo: return "empty-video";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kNonFiniteValue: return "non-finite-value";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
    case ErrorCode::kNonPositiveDuration: return "non-positive-duration";
    case ErrorCode::kZeroFrames: return "zero-frames";
    case ErrorCode::kEmptyQuery: return "empty-query";
    case ErrorCode::kUnparseableResponse: return "unparseable-response";
    case ErrorCode::kScorerUnreachable: return "scorer-unreachable";
    case ErrorCode::kBadResponse: return "bad-response";
    case ErrorCode::kScoreCountMismatch: return "score-count-mismatch";
    case ErrorCode::kOutOfRangeScore: return "out-of-range-score";
    case ErrorCode::kNegativeScore: return "negative-score";
    case ErrorCode::kBudgetTooSmall: return "budget-too-small";
    case ErrorCode::kNonPositiveTarget: return "non-positive-target";
    case ErrorCode::kInfeasibleBudget: return "infeasible-budget";
    case ErrorCode::kUpsampleRequested: return "upsample-requested";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncatedFile: return "truncated-file";
    case ErrorCode::kVersionUnsupported: return "version-unsupported";
    case ErrorCode::kTrailingData: return "trailing-data";
    case ErrorCode::kMalformedJson: return "malformed-json";
    case ErrorCode::kNonNumericScore: return "non-numeric-score";
    case ErrorCode::kIoFailure: return "io-failure";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

/// Every module reports failures by throwing this. The optional frame index
/// is attached when a per-frame stage fails inside a whole-video operation.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> frame_index = std::nullopt)
      : std::runtime_error(compose(code, message, frame_index)),
        code_(code),
        detail_(message),
        frame_index_(frame_index) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> frame_index() const noexcept { return frame_index_; }

  Error with_frame(std::size_t index) const { return Error(code_, detail_, index); }

 private:
  static std::string compose(ErrorCode code, const std::string& message,
                             std::optional<std::size_t> frame_index) {
    std::string out(to_string(code));
    if (frame_index) out += " (frame " + std::to_string(*frame_index) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::string detail_;
  std::optional<std::size_t> frame_index_;
};

}  // namespace quota
