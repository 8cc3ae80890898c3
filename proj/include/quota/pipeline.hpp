#pragma once

// End-to-end orchestration behind the `quota` command line tool:
// sample -> decouple -> score -> normalize -> (redistribute) -> allocate ->
// solve grids -> assign -> serialize.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quota/allocator.hpp"
#include "quota/assigner.hpp"
#include "quota/error.hpp"
#include "quota/io.hpp"
#include "quota/query.hpp"
#include "quota/sampler.hpp"
#include "quota/scorer.hpp"
#include "quota/types.hpp"

namespace quota {

inline DecoupleStrategy parse_strategy(std::string_view name) {
  if (name == "direct") return DecoupleStrategy::kDirect;
  if (name == "entity" || name == "entity-list") return DecoupleStrategy::kEntityList;
  if (name == "event" || name == "event-question") return DecoupleStrategy::kEventQuestion;
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

struct PipelineConfig {
  std::string embeddings;
  std::string query;
  std::optional<std::size_t> budget;  ///< defaults to the input's total token count
  AssignerKind assigner = AssignerKind::kBilinear;
  std::string scorer = "mock";
  std::size_t max_in_flight = 4;
  DecoupleStrategy strategy = DecoupleStrategy::kDirect;
  std::string decouple_response;  ///< file holding a canned language-model reply
  std::string out_embeddings;
  std::string out_report;
  std::optional<double> duration;
  std::size_t t_base = 96;
  std::size_t alpha = 64;
  bool frames_are_presampled = false;
};

/// Reads a JSON config whose keys mirror the long CLI flags
/// (e.g. {"embeddings": "...", "budget": 12544, "t-base": 96}).
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::kMalformedJson, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "embeddings") c.embeddings = value.get<std::string>();
      else if (key == "query") c.query = value.get<std::string>();
      else if (key == "budget") c.budget = value.get<std::size_t>();
      else if (key == "assigner") c.assigner = parse_assigner(value.get<std::string>());
      else if (key == "scorer") c.scorer = value.get<std::string>();
      else if (key == "max-in-flight") c.max_in_flight = value.get<std::size_t>();
      else if (key == "strategy") c.strategy = parse_strategy(value.get<std::string>());
      else if (key == "decouple-response") c.decouple_response = value.get<std::string>();
      else if (key == "out-embeddings") c.out_embeddings = value.get<std::string>();
      else if (key == "out-report") c.out_report = value.get<std::string>();
      else if (key == "duration") c.duration = value.get<double>();
      else if (key == "t-base") c.t_base = value.get<std::size_t>();
      else if (key == "alpha") c.alpha = value.get<std::size_t>();
      else if (key == "frames-are-presampled") c.frames_are_presampled = value.get<bool>();
      else throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  return c;
}

struct PipelineResult {
  AllocationReport report;
  std::optional<ReducedVideoEmbeddings> reduced;
};

enum class PipelineMode { kPlan, kRun };

/// Runs the pipeline. kPlan stops after the allocation; kRun also applies the
/// assigner. Output files named in the config are written on success.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineMode mode) {
  if (cfg.embeddings.empty()) throw Error(ErrorCode::kInvalidArgument, "--embeddings is required");
  if (cfg.query.empty()) throw Error(ErrorCode::kEmptyQuery, "--query is required");

  const VideoEmbeddings video = read_embeddings(cfg.embeddings);
  const std::size_t frames = video.frame_count();

  AllocationReport report;
  report.query = cfg.query;
  report.assigner = cfg.assigner;

  if (!cfg.frames_are_presampled && !cfg.duration) {
    throw Error(ErrorCode::kInvalidArgument,
                "--duration is required unless --frames-are-presampled is set");
  }
  if (cfg.duration) {
    const SamplingConfig sc{cfg.t_base, cfg.alpha};
    const auto t = compute_frame_count(*cfg.duration, sc);
    report.sampling = SamplingRecord{*cfg.duration, cfg.t_base, cfg.alpha, t,
                                     sample_timestamps(*cfg.duration, t)};
  }

  ScorerBinding binding = ScorerBinding::parse(cfg.scorer);
  binding.max_in_flight = cfg.max_in_flight;
  binding.check();

  std::function<std::string(const std::string&)> generate;
  if (!cfg.decouple_response.empty()) {
    const auto canned = detail::read_file(cfg.decouple_response);
    generate = [canned](const std::string&) { return canned; };
  } else if (binding.kind == ScorerKind::kRemote) {
    generate = [binding](const std::string& prompt) {
      return RemoteScorerClient(binding).generate(prompt);
    };
  }
  const auto decoupled = decouple_query(cfg.query, cfg.strategy, generate);
  report.strategy = decoupled.query.strategy();
  report.object_list = decoupled.query.object_list();
  report.event_question = decoupled.query.event_question();
  report.decouple_fallback = decoupled.fell_back;

  const std::string prompt = build_frame_scoring_prompt(decoupled.query);
  std::vector<std::string> frame_refs;
  frame_refs.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) frame_refs.push_back(std::to_string(i));
  const ScoreVector scores = score_frames(frame_refs, prompt, binding);
  const NormalizedScores weights = normalize_scores(scores);

  const std::size_t budget = cfg.budget.value_or(video.total_tokens());
  if (cfg.assigner != AssignerKind::kBilinear && !video.uniform_grid()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pool and merge assigners need every input frame on the same grid");
  }
  const Grid source{video[0].height(), video[0].width()};
  auto outcome = plan_allocation(weights, budget, cfg.assigner, source);

  report.scores.assign(scores.scores().begin(), scores.scores().end());
  report.weights.assign(outcome.weights.weights().begin(), outcome.weights.weights().end());
  report.budget = outcome.plan.budget();
  report.targets.assign(outcome.plan.targets().begin(), outcome.plan.targets().end());
  report.grids.assign(outcome.plan.grids().begin(), outcome.plan.grids().end());

  PipelineResult result{std::move(report), std::nullopt};
  if (mode == PipelineMode::kRun) {
    result.reduced = assign_all(video, outcome.plan, cfg.assigner);
    if (!cfg.out_embeddings.empty()) write_embeddings(result.reduced->video(), cfg.out_embeddings);
  }
  if (!cfg.out_report.empty()) write_report(result.report, cfg.out_report);
  return result;
}

}  // namespace quota
