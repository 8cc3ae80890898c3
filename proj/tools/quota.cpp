// quota: query-oriented visual token assignment over precomputed frame
// embeddings.
//
//   quota run    --embeddings F --query Q [--budget N] --assigner bilinear|pool|merge
//                --scorer mock[:seed]|file:PATH|http:URL --strategy direct|entity|event
//                --out-embeddings F' --out-report R [--duration S --t-base 96 --alpha 64]
//   quota plan   (same flags, stops after the report)
//   quota frames --duration S --t-base B --alpha A

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quota/quota.hpp"

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}

int report_error(const std::string& code, const std::string& message,
                 std::optional<std::size_t> frame = std::nullopt) {
  nlohmann::ordered_json j{{"error", code}, {"message", message}};
  if (frame) j["frame_index"] = *frame;
  std::cerr << j.dump() << "\n";
  return 1;
}

struct PipelineFlags {
  std::string config_path;
  quota::PipelineConfig cfg;
  std::string assigner = "bilinear";
  std::string strategy = "direct";
  std::size_t budget = 0;
  double duration = 0.0;

  void attach(CLI::App* cmd, bool with_tensor_output) {
    cmd->add_option("--config", config_path, "JSON config whose keys mirror these flags");
    cmd->add_option("--embeddings", cfg.embeddings, "input QTEM embeddings file");
    cmd->add_option("--query", cfg.query, "user query text");
    cmd->add_option("--budget", budget, "total token budget (default: input token count)");
    cmd->add_option("--assigner", assigner, "bilinear | pool | merge");
    cmd->add_option("--scorer", cfg.scorer, "mock[:seed] | file:PATH | http:URL");
    cmd->add_option("--max-in-flight", cfg.max_in_flight, "concurrent remote scoring requests");
    cmd->add_option("--strategy", strategy, "direct | entity | event");
    cmd->add_option("--decouple-response", cfg.decouple_response,
                    "file with a precomputed decoupling reply");
    if (with_tensor_output) {
      cmd->add_option("--out-embeddings", cfg.out_embeddings, "output QTEM file");
    }
    cmd->add_option("--out-report", cfg.out_report, "allocation report JSON path");
    cmd->add_option("--duration", duration, "video duration in seconds");
    cmd->add_option("--t-base", cfg.t_base, "base frame count");
    cmd->add_option("--alpha", cfg.alpha, "maximum additional frames");
    cmd->add_flag("--frames-are-presampled", cfg.frames_are_presampled,
                  "embeddings already correspond to sampled frames");
  }

  // Config file first, then any flag given on the command line wins.
  quota::PipelineConfig resolve(const CLI::App* cmd) const {
    quota::PipelineConfig out;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw quota::Error(quota::ErrorCode::kIoFailure, "cannot open " + config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw quota::Error(quota::ErrorCode::kMalformedJson, e.what());
      }
      out = quota::config_from_json(j);
    }
    auto given = [&](const char* name) { return cmd->count(name) > 0; };
    if (given("--embeddings")) out.embeddings = cfg.embeddings;
    if (given("--query")) out.query = cfg.query;
    if (given("--budget")) out.budget = budget;
    if (given("--assigner")) out.assigner = quota::parse_assigner(assigner);
    if (given("--scorer")) out.scorer = cfg.scorer;
    if (given("--max-in-flight")) out.max_in_flight = cfg.max_in_flight;
    if (given("--strategy")) out.strategy = quota::parse_strategy(strategy);
    if (given("--decouple-response")) out.decouple_response = cfg.decouple_response;
    if (cmd->get_option_no_throw("--out-embeddings") && given("--out-embeddings")) {
      out.out_embeddings = cfg.out_embeddings;
    }
    if (given("--out-report")) out.out_report = cfg.out_report;
    if (given("--duration")) out.duration = duration;
    if (given("--t-base")) out.t_base = cfg.t_base;
    if (given("--alpha")) out.alpha = cfg.alpha;
    if (given("--frames-are-presampled")) out.frames_are_presampled = true;
    return out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-oriented visual token assignment"};
  app.require_subcommand(1);

  PipelineFlags run_flags;
  auto* run = app.add_subcommand("run", "score frames, allocate tokens and reduce embeddings");
  run_flags.attach(run, true);

  PipelineFlags plan_flags;
  auto* plan = app.add_subcommand("plan", "score frames and write the allocation report only");
  plan_flags.attach(plan, false);

  double duration = 0.0;
  quota::SamplingConfig sampling;
  auto* frames = app.add_subcommand("frames", "print the frame count and sample timestamps");
  frames->add_option("--duration", duration, "video duration in seconds")->required();
  frames->add_option("--t-base", sampling.t_base, "base frame count");
  frames->add_option("--alpha", sampling.alpha, "maximum additional frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid-argument", e.what());
  }

  try {
    if (frames->parsed()) {
      const auto t = quota::compute_frame_count(duration, sampling);
      std::cout << t << "\n";
      const auto stamps = quota::sample_timestamps(duration, t);
      for (std::size_t i = 0; i < stamps.size(); ++i) {
        std::cout << (i ? " " : "") << shortest(stamps[i]);
      }
      std::cout << "\n";
      return 0;
    }
    const bool is_run = run->parsed();
    const auto& flags = is_run ? run_flags : plan_flags;
    const auto cfg = flags.resolve(is_run ? run : plan);
    const auto result =
        quota::run_pipeline(cfg, is_run ? quota::PipelineMode::kRun : quota::PipelineMode::kPlan);
    if (cfg.out_report.empty()) std::cout << quota::render_report(result.report);
    return 0;
  } catch (const quota::Error& e) {
    return report_error(std::string(quota::to_string(e.code())), e.detail(), e.frame_index());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
}
