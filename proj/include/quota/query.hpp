#pragma once

// Prompt construction for the two model calls in the pipeline (query
// decoupling on a text model, per-frame yes/no scoring on the scoring model)
// and parsing of the decoupling response.

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quota/error.hpp"
#include "quota/types.hpp"

namespace quota {

/// Line a decoupling response uses to decline decoupling.
inline constexpr std::string_view kNoDecoupleSentinel = "NO_DECOUPLE";

namespace detail {

inline constexpr std::string_view kEntityDecouplePrompt =
    "You help a video question-answering system decide which video frames matter "
    "for a question. Work through the steps below and show each step.\n"
    "\n"
    "Step 1: Assess the necessity for entity decoupling. Decide whether the question "
    "can be checked by looking for concrete physical entities (people, animals, "
    "objects, places) in single frames. If it cannot, write NO_DECOUPLE on its own "
    "line and stop.\n"
    "Step 2: Transform the original query into a structured object list holding every "
    "physical entity the question mentions or implies.\n"
    "Step 3: Refine the list by eliminating abstract concepts (actions, emotions, "
    "reasons, times, counts) so that only concrete, visible objects remain. Write the "
    "final list on the last line as [object1, object2, ...].\n"
    "\n"
    "Example\n"
    "Question: What is the man holding while he stands next to the red car?\n"
    "Step 1: The answer depends on visible objects, so decoupling is useful.\n"
    "Step 2: [man, held item, red car, standing]\n"
    "Step 3: [man, red car]\n"
    "\n"
    "Example\n"
    "Question: How often does the narrator say the word \"freedom\"?\n"
    "Step 1: The answer depends on speech, not on anything visible.\n"
    "NO_DECOUPLE\n"
    "\n"
    "Question: {query}\n";

inline constexpr std::string_view kEventDecouplePrompt =
    "You help a video question-answering system decide which video frames matter "
    "for a question. Work through the steps below and show each step.\n"
    "\n"
    "Step 1: Start by analyzing the type of the original question (what, who, how, "
    "where, when, or why).\n"
    "Step 2: Identify the key elements a frame must show to help answer it: objects, "
    "actions, states, and scenes.\n"
    "Step 3: Finish by formulating a simple, direct question that asks whether a frame "
    "contains these key elements. Write that question alone on the last line, ending "
    "with a question mark.\n"
    "If the question cannot be reduced this way, write NO_DECOUPLE on its own line.\n"
    "\n"
    "Example\n"
    "Question: Why does the woman leave the kitchen in a hurry?\n"
    "Step 1: A \"why\" question about the cause of an event.\n"
    "Step 2: Key elements: a woman, a kitchen, someone leaving quickly.\n"
    "Step 3: Is a woman hurrying out of a kitchen?\n"
    "\n"
    "Question: {query}\n";

inline constexpr std::string_view kSourceQueryScoringPrompt =
    "Question: Does this frame contain any information to answer the given query: "
    "{query}?\n"
    "A. Yes. B. No.\n"
    "Answer the letter directly.";

inline constexpr std::string_view kEntityListScoringPrompt =
    "Question: Does the frame contain any objects of the following list: {object_list}?\n"
    "A. Yes. B. No.\n"
    "Answer the letter directly.";

inline std::string substitute(std::string_view tmpl, std::string_view placeholder,
                              std::string_view value) {
  std::string out(tmpl);
  const auto pos = out.find(placeholder);
  if (pos != std::string::npos) out.replace(pos, placeholder.size(), value);
  return out;
}

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kSpace);
  return s.substr(first, last - first + 1);
}

inline std::string_view strip_quotes(std::string_view s) {
  while (s.size() >= 2 && (s.front() == '"' || s.front() == '\'' || s.front() == '`') &&
         s.back() == s.front()) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

inline bool has_sentinel(std::string_view response) {
  for (auto line : split_lines(response)) {
    if (trim(line) == kNoDecoupleSentinel) return true;
  }
  return false;
}

// Items of the last [a, b, c] group, trimmed, de-duplicated in first-seen
// order, empties dropped.
inline std::vector<std::string> extract_object_list(std::string_view response) {
  const auto close = response.rfind(']');
  if (close == std::string_view::npos) return {};
  const auto open = response.rfind('[', close);
  if (open == std::string_view::npos) return {};
  std::string_view body = response.substr(open + 1, close - open - 1);

  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= body.size()) {
    auto comma = body.find(',', start);
    if (comma == std::string_view::npos) comma = body.size();
    const auto item = strip_quotes(trim(body.substr(start, comma - start)));
    if (!item.empty() &&
        std::find(items.begin(), items.end(), item) == items.end()) {
      items.emplace_back(item);
    }
    start = comma + 1;
  }
  return items;
}

inline bool is_label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == ' ';
}

// Drops a leading "Step 3:" / "Question:" / "Final question:" style label.
inline std::string_view strip_label(std::string_view line) {
  for (;;) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon > 20) return line;
    const auto label = line.substr(0, colon);
    if (!std::all_of(label.begin(), label.end(), is_label_char)) return line;
    std::string lower;
    for (char c : label) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower.rfind("step", 0) != 0 && lower.find("question") == std::string::npos) return line;
    line = trim(line.substr(colon + 1));
  }
}

inline std::optional<std::string> extract_question(std::string_view response) {
  const auto lines = split_lines(response);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const auto line = strip_quotes(strip_label(trim(*it)));
    if (line.empty() || line.back() != '?') continue;
    if (std::any_of(line.begin(), line.end(),
                    [](char c) { return std::isalnum(static_cast<unsigned char>(c)); })) {
      return std::string(line);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Prompt for the language model that asks it to decouple `query` with the given
/// strategy. The query appears exactly once, on the final line.
inline std::string build_decouple_prompt(std::string_view query, DecoupleStrategy strategy) {
  if (detail::trim(query).empty()) throw Error(ErrorCode::kEmptyQuery, "query is empty");
  switch (strategy) {
    case DecoupleStrategy::kEntityList:
      return detail::substitute(detail::kEntityDecouplePrompt, "{query}", query);
    case DecoupleStrategy::kEventQuestion:
      return detail::substitute(detail::kEventDecouplePrompt, "{query}", query);
    case DecoupleStrategy::kDirect:
      break;
  }
  throw Error(ErrorCode::kInvalidArgument, "direct strategy has no decouple prompt");
}

/// Parses a decoupling response. A NO_DECOUPLE line yields the direct
/// strategy; otherwise the last bracketed list (entity) or the last question
/// line (event) is extracted. `expected` restricts which of the two is tried.
/// Throws unparseable-response when nothing usable is found.
inline DecoupledQuery parse_decouple_response(
    std::string_view response, std::string source_query,
    std::optional<DecoupleStrategy> expected = std::nullopt) {
  if (detail::has_sentinel(response)) return DecoupledQuery::direct(std::move(source_query));

  const bool try_list = !expected || *expected == DecoupleStrategy::kEntityList;
  const bool try_question = !expected || *expected == DecoupleStrategy::kEventQuestion;
  if (try_list) {
    auto items = detail::extract_object_list(response);
    if (!items.empty()) return DecoupledQuery::entities(std::move(source_query), std::move(items));
  }
  if (try_question) {
    if (auto q = detail::extract_question(response)) {
      return DecoupledQuery::event(std::move(source_query), std::move(*q));
    }
  }
  throw Error(ErrorCode::kUnparseableResponse,
              "no NO_DECOUPLE line, object list or question found");
}

/// Binary-choice prompt sent to the scoring model once per frame.
inline std::string build_frame_scoring_prompt(const DecoupledQuery& dq) {
  switch (dq.strategy()) {
    case DecoupleStrategy::kEntityList: {
      std::string joined;
      for (const auto& obj : *dq.object_list()) {
        if (!joined.empty()) joined += ", ";
        joined += obj;
      }
      return detail::substitute(detail::kEntityListScoringPrompt, "{object_list}", joined);
    }
    case DecoupleStrategy::kEventQuestion:
      return detail::substitute(detail::kSourceQueryScoringPrompt, "{query}",
                                *dq.event_question());
    case DecoupleStrategy::kDirect:
      break;
  }
  return detail::substitute(detail::kSourceQueryScoringPrompt, "{query}", dq.source_query());
}

struct DecoupleOutcome {
  DecoupledQuery query;
  bool fell_back = false;  ///< set when decoupling failed and direct was used instead
  std::string note;
};

/// Runs the decoupling protocol through `generate` (prompt -> completion).
/// Any failure of the generator or parser degrades to the direct strategy with
/// `fell_back` set; a deliberate NO_DECOUPLE is not a fallback.
inline DecoupleOutcome decouple_query(
    const std::string& query, DecoupleStrategy requested,
    const std::function<std::string(const std::string&)>& generate) {
  if (detail::trim(query).empty()) throw Error(ErrorCode::kEmptyQuery, "query is empty");
  if (requested == DecoupleStrategy::kDirect) return {DecoupledQuery::direct(query), false, {}};
  if (!generate) {
    return {DecoupledQuery::direct(query), true, "no text generator available"};
  }
  try {
    const auto response = generate(build_decouple_prompt(query, requested));
    return {parse_decouple_response(response, query, requested), false, {}};
  } catch (const Error& e) {
    return {DecoupledQuery::direct(query), true, e.what()};
  }
}

}  // namespace quota
