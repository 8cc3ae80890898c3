#pragma once

// Frame relevance scoring. A ScorerBinding selects where scores come from:
//   mock[:seed]   deterministic hash of (frame id, prompt), no model involved
//   file:PATH     JSON array of precomputed scores
//   http:URL      remote service speaking the /score + /generate protocol
//
// Remote protocol (JSON over HTTP):
//   POST /score     {"prompt": s, "frame_id": s, "image_b64"?: s} -> {"p_a": x in [0,1]}
//   POST /generate  {"prompt": s}                                 -> {"text": s}

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "quota/error.hpp"
#include "quota/io.hpp"
#include "quota/types.hpp"

namespace quota {

/// Environment variable consulted when an http binding names no URL.
inline constexpr const char* kScorerUrlEnv = "QUOTA_SCORER_URL";

enum class ScorerKind { kMock, kFile, kRemote };

struct ScorerBinding {
  ScorerKind kind = ScorerKind::kMock;
  std::uint64_t seed = 0;
  std::string path;      // kFile
  std::string endpoint;  // kRemote, e.g. "http://127.0.0.1:8080" or with a path prefix
  std::size_t max_in_flight = 4;
  int retries = 3;  // extra attempts after the first for unreachable/5xx
  std::chrono::milliseconds backoff{200};  // doubled on each retry
  std::chrono::milliseconds timeout{30000};

  void check() const {
    if (max_in_flight < 1) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
    if (retries < 0) throw Error(ErrorCode::kInvalidArgument, "retries must be >= 0");
    if (kind == ScorerKind::kFile && path.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "file scorer needs a path");
    }
    if (kind == ScorerKind::kRemote && endpoint.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "remote scorer needs an endpoint URL");
    }
  }

  static ScorerBinding mock(std::uint64_t seed = 0) {
    ScorerBinding b;
    b.kind = ScorerKind::kMock;
    b.seed = seed;
    return b;
  }
  static ScorerBinding file(std::string path) {
    ScorerBinding b;
    b.kind = ScorerKind::kFile;
    b.path = std::move(path);
    return b;
  }
  static ScorerBinding remote(std::string endpoint, std::size_t max_in_flight = 4) {
    ScorerBinding b;
    b.kind = ScorerKind::kRemote;
    b.endpoint = std::move(endpoint);
    b.max_in_flight = max_in_flight;
    return b;
  }

  /// Parses "mock[:seed]", "file:PATH" or "http:URL". An http binding with no
  /// URL falls back to $QUOTA_SCORER_URL.
  static ScorerBinding parse(std::string_view spec) {
    const auto colon = spec.find(':');
    const auto head = spec.substr(0, colon);
    const auto rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
    if (head == "mock") {
      if (rest.empty()) return mock();
      try {
        std::size_t used = 0;
        const auto seed = std::stoull(std::string(rest), &used);
        if (used != rest.size()) throw std::invalid_argument("trailing characters");
        return mock(seed);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidArgument, "bad mock seed '" + std::string(rest) + "'");
      }
    }
    if (head == "file") {
      if (rest.empty()) throw Error(ErrorCode::kInvalidArgument, "file scorer needs a path");
      return file(std::string(rest));
    }
    if (head == "http" || head == "https") {
      std::string url;
      if (rest.rfind("//", 0) == 0) {
        url = std::string(spec);  // a full http://host URL
      } else if (!rest.empty()) {
        url = std::string(rest);
        if (url.find("://") == std::string::npos) url = "http://" + url;
      } else if (const char* env = std::getenv(kScorerUrlEnv); env && *env) {
        url = env;
      } else {
        throw Error(ErrorCode::kInvalidArgument,
                    std::string("http scorer needs a URL or $") + kScorerUrlEnv);
      }
      return remote(std::move(url));
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown scorer '" + std::string(spec) + "'");
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct ParsedUrl {
  std::string scheme_host_port;
  std::string base_path;  // no trailing slash
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "URL lacks a scheme: " + url);
  }
  if (url.compare(0, scheme_end, "http") != 0) {
    throw Error(ErrorCode::kInvalidArgument, "only plain http endpoints are supported: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    out.base_path = url.substr(path_start);
    while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  }
  return out;
}

}  // namespace detail

/// Deterministic mock score in [0, 1) for one frame.
inline double mock_score(std::uint64_t seed, std::string_view frame_id, std::string_view prompt) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::splitmix64(h ^ detail::fnv1a(frame_id));
  h = detail::splitmix64(h ^ detail::fnv1a(prompt));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Blocking client for the remote scoring protocol. One instance per thread.
class RemoteScorerClient {
 public:
  explicit RemoteScorerClient(const ScorerBinding& binding)
      : binding_(binding), url_(detail::parse_url(binding.endpoint)),
        client_(url_.scheme_host_port) {
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(binding.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(binding.timeout - secs);
    client_.set_connection_timeout(secs.count(), usecs.count());
    client_.set_read_timeout(secs.count(), usecs.count());
    client_.set_write_timeout(secs.count(), usecs.count());
  }

  /// P("A") for one frame.
  double score(const std::string& frame_id, const std::string& prompt,
               const std::optional<std::string>& image_b64 = std::nullopt) {
    nlohmann::json body{{"prompt", prompt}, {"frame_id", frame_id}};
    if (image_b64) body["image_b64"] = *image_b64;
    const auto reply = post("/score", body);
    const auto it = reply.find("p_a");
    if (it == reply.end() || !it->is_number()) {
      throw Error(ErrorCode::kBadResponse, "/score reply lacks numeric p_a");
    }
    const double p = it->get<double>();
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kOutOfRangeScore, "p_a = " + std::to_string(p));
    }
    return p;
  }

  std::string generate(const std::string& prompt) {
    const auto reply = post("/generate", nlohmann::json{{"prompt", prompt}});
    const auto it = reply.find("text");
    if (it == reply.end() || !it->is_string()) {
      throw Error(ErrorCode::kBadResponse, "/generate reply lacks text");
    }
    return it->get<std::string>();
  }

 private:
  nlohmann::json post(const std::string& route, const nlohmann::json& body) {
    const std::string path = url_.base_path + route;
    const std::string payload = body.dump();
    std::string last_failure;
    auto delay = binding_.backoff;
    for (int attempt = 0; attempt <= binding_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      auto res = client_.Post(path, payload, "application/json");
      if (!res) {
        last_failure = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw Error(ErrorCode::kBadResponse, route + " returned HTTP " + std::to_string(res->status));
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::kBadResponse, route + " returned invalid JSON: " + e.what());
      }
    }
    throw Error(ErrorCode::kScorerUnreachable,
                binding_.endpoint + route + " after " + std::to_string(binding_.retries + 1) +
                    " attempts (" + last_failure + ")");
  }

  ScorerBinding binding_;
  detail::ParsedUrl url_;
  httplib::Client client_;
};

namespace detail {

inline std::vector<double> score_remote(std::span<const std::string> frame_refs,
                                        const std::string& prompt, const ScorerBinding& binding) {
  std::vector<double> out(frame_refs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::optional<Error> first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    RemoteScorerClient client(binding);
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= frame_refs.size()) return;
      try {
        out[i] = client.score(frame_refs[i], prompt);
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error || i < first_error->frame_index().value_or(i)) first_error = e.with_frame(i);
        failed = true;
      }
    }
  };

  const std::size_t n_workers = std::min(binding.max_in_flight, frame_refs.size());
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) throw *first_error;
  return out;
}

}  // namespace detail

/// One score per frame reference, in the same order, each in [0, 1].
inline ScoreVector score_frames(std::span<const std::string> frame_refs, const std::string& prompt,
                                const ScorerBinding& binding) {
  binding.check();
  if (frame_refs.empty()) throw Error(ErrorCode::kEmptyVideo, "no frames to score");
  if (prompt.empty()) throw Error(ErrorCode::kEmptyQuery, "scoring prompt is empty");

  std::vector<double> scores;
  switch (binding.kind) {
    case ScorerKind::kMock:
      scores.reserve(frame_refs.size());
      for (const auto& id : frame_refs) scores.push_back(mock_score(binding.seed, id, prompt));
      break;
    case ScorerKind::kFile: {
      const auto loaded = read_scores(binding.path);
      if (loaded.size() != frame_refs.size()) {
        throw Error(ErrorCode::kScoreCountMismatch,
                    std::to_string(loaded.size()) + " scores for " +
                        std::to_string(frame_refs.size()) + " frames");
      }
      scores.assign(loaded.scores().begin(), loaded.scores().end());
      break;
    }
    case ScorerKind::kRemote:
      scores = detail::score_remote(frame_refs, prompt, binding);
      break;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw Error(ErrorCode::kOutOfRangeScore, std::to_string(scores[i]), i);
    }
  }
  return ScoreVector(std::move(scores));
}

/// S_n^i = S^i / sum_j S^j; all-zero scores give uniform weights.
inline NormalizedScores normalize_scores(const ScoreVector& s) {
  if (s.size() == 0) throw Error(ErrorCode::kEmptyVideo, "no scores");
  double total = 0.0;
  for (double v : s.scores()) total += v;
  std::vector<double> weights(s.size());
  if (total == 0.0) {
    std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(s.size()));
  } else {
    for (std::size_t i = 0; i < s.size(); ++i) weights[i] = s[i] / total;
  }
  return NormalizedScores(std::move(weights));
}

}  // namespace quota
