#pragma once

// On-disk formats.
//
// Embeddings (binary, little-endian):
//   "QTEM" | u32 version = 1 | u32 frame_count |
//   per frame: u32 H | u32 W | u32 C | H*W*C f32, row-major, channel fastest
//
// Scores: a JSON array of numbers, one per frame.
// Allocation report: a JSON object, see AllocationReport.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quota/error.hpp"
#include "quota/types.hpp"

namespace quota {

inline constexpr std::array<char, 4> kEmbeddingMagic = {'Q', 'T', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
}

}  // namespace detail

inline std::vector<unsigned char> encode_embeddings(const VideoEmbeddings& video) {
  std::vector<unsigned char> out(kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  detail::put_u32(out, kEmbeddingVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(video.frame_count()));
  for (const auto& f : video.frames()) {
    detail::put_u32(out, static_cast<std::uint32_t>(f.height()));
    detail::put_u32(out, static_cast<std::uint32_t>(f.width()));
    detail::put_u32(out, static_cast<std::uint32_t>(f.dim()));
    for (float v : f.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline VideoEmbeddings decode_embeddings(std::span<const unsigned char> bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n) {
      throw Error(ErrorCode::kTruncatedFile, std::string("file ends inside ") + what);
    }
  };
  auto u32 = [&](const char* what) {
    need(4, what);
    const auto v = detail::get_u32(bytes.data() + pos);
    pos += 4;
    return v;
  };

  need(4, "magic");
  if (std::memcmp(bytes.data(), kEmbeddingMagic.data(), 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "expected QTEM header");
  }
  pos = 4;
  const auto version = u32("version");
  if (version != kEmbeddingVersion) {
    throw Error(ErrorCode::kVersionUnsupported, "version " + std::to_string(version));
  }
  const auto frame_count = u32("frame count");
  std::vector<FrameEmbedding> frames;
  for (std::uint32_t i = 0; i < frame_count; ++i) {
    const std::uint64_t h = u32("frame header");
    const std::uint64_t w = u32("frame header");
    const std::uint64_t c = u32("frame header");
    const std::uint64_t count = h * w * c;
    if (count > (bytes.size() - pos) / 4) {
      throw Error(ErrorCode::kTruncatedFile, "frame " + std::to_string(i) + " data is short");
    }
    std::vector<float> data(count);
    for (auto& v : data) {
      v = std::bit_cast<float>(detail::get_u32(bytes.data() + pos));
      pos += 4;
    }
    try {
      frames.emplace_back(h, w, c, std::move(data));
    } catch (const Error& e) {
      throw Error(e.code() == ErrorCode::kNonFiniteValue ? e.code() : ErrorCode::kInvariantViolation,
                  e.detail(), i);
    }
  }
  if (pos != bytes.size()) {
    throw Error(ErrorCode::kTrailingData,
                std::to_string(bytes.size() - pos) + " bytes after last frame");
  }
  try {
    return VideoEmbeddings(std::move(frames));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDimensionMismatch || e.code() == ErrorCode::kEmptyVideo) throw;
    throw Error(ErrorCode::kInvariantViolation, e.detail(), e.frame_index());
  }
}

inline void write_embeddings(const VideoEmbeddings& video, const std::filesystem::path& path) {
  const auto bytes = encode_embeddings(video);
  detail::write_file(path, bytes.data(), bytes.size());
}

inline VideoEmbeddings read_embeddings(const std::filesystem::path& path) {
  const auto content = detail::read_file(path);
  return decode_embeddings(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(content.data()), content.size()));
}

inline ScoreVector parse_scores(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::kMalformedJson, "scores must be a JSON array");
  std::vector<double> scores;
  scores.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) {
      throw Error(ErrorCode::kNonNumericScore, "entry is " + std::string(doc[i].type_name()), i);
    }
    scores.push_back(doc[i].get<double>());
  }
  return ScoreVector(std::move(scores));
}

inline ScoreVector read_scores(const std::filesystem::path& path) {
  return parse_scores(detail::read_file(path));
}

/// Optional sampling metadata recorded when a duration was supplied.
struct SamplingRecord {
  double duration_s = 0.0;
  std::size_t t_base = 0;
  std::size_t alpha = 0;
  std::size_t frame_count = 0;
  std::vector<double> timestamps;

  friend bool operator==(const SamplingRecord&, const SamplingRecord&) = default;
};

/// Everything the pipeline reports about one allocation. `weights` are the
/// weights actually used for the targets (after redistribution, if any).
struct AllocationReport {
  std::string query;
  DecoupleStrategy strategy = DecoupleStrategy::kDirect;
  std::optional<std::vector<std::string>> object_list;
  std::optional<std::string> event_question;
  bool decouple_fallback = false;
  std::optional<AssignerKind> assigner;
  std::vector<double> scores;
  std::vector<double> weights;
  std::size_t budget = 0;
  std::vector<std::size_t> targets;
  std::vector<Grid> grids;
  std::optional<SamplingRecord> sampling;

  std::size_t used() const noexcept {
    std::size_t total = 0;
    for (const auto& g : grids) total += g.tokens();
    return total;
  }

  friend bool operator==(const AllocationReport&, const AllocationReport&) = default;
};

inline nlohmann::ordered_json report_to_json(const AllocationReport& r) {
  using nlohmann::ordered_json;
  if (r.scores.size() != r.grids.size() || r.weights.size() != r.grids.size() ||
      r.targets.size() != r.grids.size()) {
    throw Error(ErrorCode::kInvariantViolation, "report columns have different lengths");
  }
  ordered_json j;
  j["query"] = r.query;
  j["strategy"] = std::string(to_string(r.strategy));
  if (r.object_list) {
    j["decoupled"] = *r.object_list;
  } else if (r.event_question) {
    j["decoupled"] = *r.event_question;
  } else {
    j["decoupled"] = nullptr;
  }
  j["decouple_fallback"] = r.decouple_fallback;
  j["assigner"] = r.assigner ? ordered_json(std::string(to_string(*r.assigner))) : ordered_json();
  ordered_json frames = ordered_json::array();
  for (std::size_t i = 0; i < r.grids.size(); ++i) {
    frames.push_back({{"index", i},
                      {"score", r.scores[i]},
                      {"weight", r.weights[i]},
                      {"target", r.targets[i]},
                      {"grid_h", r.grids[i].height},
                      {"grid_w", r.grids[i].width}});
  }
  j["frames"] = std::move(frames);
  j["totals"] = {{"budget", r.budget}, {"used", r.used()}};
  if (r.sampling) {
    j["sampling"] = {{"duration_s", r.sampling->duration_s},
                     {"t_base", r.sampling->t_base},
                     {"alpha", r.sampling->alpha},
                     {"frame_count", r.sampling->frame_count},
                     {"timestamps", r.sampling->timestamps}};
  }
  return j;
}

inline AllocationReport report_from_json(const nlohmann::json& j) {
  try {
    AllocationReport r;
    r.query = j.at("query").get<std::string>();
    const auto strategy = j.at("strategy").get<std::string>();
    if (strategy == "entity-list") {
      r.strategy = DecoupleStrategy::kEntityList;
      r.object_list = j.at("decoupled").get<std::vector<std::string>>();
    } else if (strategy == "event-question") {
      r.strategy = DecoupleStrategy::kEventQuestion;
      r.event_question = j.at("decoupled").get<std::string>();
    } else if (strategy == "direct") {
      r.strategy = DecoupleStrategy::kDirect;
    } else {
      throw Error(ErrorCode::kMalformedJson, "unknown strategy '" + strategy + "'");
    }
    r.decouple_fallback = j.value("decouple_fallback", false);
    if (j.contains("assigner") && !j["assigner"].is_null()) {
      r.assigner = parse_assigner(j["assigner"].get<std::string>());
    }
    for (const auto& f : j.at("frames")) {
      r.scores.push_back(f.at("score").get<double>());
      r.weights.push_back(f.at("weight").get<double>());
      r.targets.push_back(f.at("target").get<std::size_t>());
      r.grids.push_back({f.at("grid_h").get<std::size_t>(), f.at("grid_w").get<std::size_t>()});
    }
    r.budget = j.at("totals").at("budget").get<std::size_t>();
    if (j.at("totals").at("used").get<std::size_t>() != r.used()) {
      throw Error(ErrorCode::kInvariantViolation, "totals.used disagrees with frame grids");
    }
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      r.sampling = SamplingRecord{s.at("duration_s").get<double>(), s.at("t_base").get<std::size_t>(),
                                  s.at("alpha").get<std::size_t>(),
                                  s.at("frame_count").get<std::size_t>(),
                                  s.at("timestamps").get<std::vector<double>>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
}

inline std::string render_report(const AllocationReport& r) {
  return report_to_json(r).dump(2) + "\n";
}

inline void write_report(const AllocationReport& r, const std::filesystem::path& path) {
  const auto text = render_report(r);
  detail::write_file(path, text.data(), text.size());
}

inline AllocationReport read_report(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  return report_from_json(j);
}

}  // namespace quota
