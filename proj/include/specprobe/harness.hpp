#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "specprobe/corpus.hpp"
#include "specprobe/fenced.hpp"
#include "specprobe/provider.hpp"
#include "specprobe/templates.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

enum class ExtractionStatus { Fenced, FallbackDelimiter, WholeReply, Failed };

inline std::string_view to_string(ExtractionStatus s) {
  switch (s) {
    case ExtractionStatus::Fenced: return "Fenced";
    case ExtractionStatus::FallbackDelimiter: return "FallbackDelimiter";
    case ExtractionStatus::WholeReply: return "WholeReply";
    case ExtractionStatus::Failed: return "Failed";
  }
  return "?";
}

inline ExtractionStatus parse_extraction_status(std::string_view s) {
  for (auto v : {ExtractionStatus::Fenced, ExtractionStatus::FallbackDelimiter, ExtractionStatus::WholeReply,
                 ExtractionStatus::Failed})
    if (to_string(v) == s) return v;
  throw Error(ErrorKind::MalformedRecord, "unknown extraction status '" + std::string(s) + "'");
}

struct DelimiterPair {
  std::string model_pattern;  // case-insensitive substring of the model hint
  std::string open;
  std::string close;
};

class DelimiterRegistry {
 public:
  DelimiterRegistry() : pairs_{{"codellama", "[PYTHON]", "[/PYTHON]"}} {}
  explicit DelimiterRegistry(std::vector<DelimiterPair> pairs) : pairs_(std::move(pairs)) {}

  static DelimiterRegistry from_json(const Json& j) {
    if (!j.is_array()) throw Error(ErrorKind::ConfigError, "delimiter registry must be a JSON array");
    std::vector<DelimiterPair> pairs;
    for (const auto& e : j) {
      if (!e.contains("model_pattern") || !e.contains("open") || !e.contains("close"))
        throw Error(ErrorKind::ConfigError, "delimiter entry needs model_pattern, open and close");
      pairs.push_back({e["model_pattern"].get<std::string>(), e["open"].get<std::string>(),
                       e["close"].get<std::string>()});
    }
    return DelimiterRegistry(std::move(pairs));
  }

  static DelimiterRegistry load(const std::filesystem::path& path) {
    try {
      return from_json(Json::parse(read_file(path)));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
  }

  /// config/delimiters.json under the asset root, else the built-in table.
  static DelimiterRegistry load_default() {
    const auto path = asset_root() / "config" / "delimiters.json";
    return std::filesystem::exists(path) ? load(path) : DelimiterRegistry();
  }

  std::vector<const DelimiterPair*> matching(std::string_view model_hint) const {
    std::vector<const DelimiterPair*> out;
    const auto hint = to_lower(model_hint);
    for (const auto& p : pairs_)
      if (hint.find(to_lower(p.model_pattern)) != std::string::npos) out.push_back(&p);
    return out;
  }

  const std::vector<DelimiterPair>& pairs() const { return pairs_; }

 private:
  std::vector<DelimiterPair> pairs_;
};

struct Extraction {
  std::optional<std::string> code;
  ExtractionStatus status = ExtractionStatus::Failed;
};

inline bool is_python_tag(std::string_view info) {
  const auto lang = to_lower(info.substr(0, info.find_first_of(" \t{")));
  return lang == "python" || lang == "py" || lang == "python3";
}

inline bool looks_like_code(std::string_view text) {
  static const std::regex re(R"((^|\n)[ \t]*(def|class|import|from[ \t]+[\w.]+[ \t]+import|async[ \t]+def)\b)");
  return std::regex_search(text.begin(), text.end(), re);
}

inline Extraction extract_code(std::string_view raw, std::string_view model_hint,
                               const DelimiterRegistry& registry = DelimiterRegistry()) {
  const auto blocks = find_fenced_blocks(raw);
  for (const auto& b : blocks)
    if (is_python_tag(b.info)) return {b.body, ExtractionStatus::Fenced};
  if (!blocks.empty()) return {blocks.front().body, ExtractionStatus::Fenced};

  for (const auto* p : registry.matching(model_hint)) {
    const auto a = raw.find(p->open);
    if (a == std::string_view::npos) continue;
    const auto from = a + p->open.size();
    const auto b = raw.find(p->close, from);
    if (b == std::string_view::npos) continue;
    return {std::string(raw.substr(from, b - from)), ExtractionStatus::FallbackDelimiter};
  }

  if (looks_like_code(raw)) return {std::string(raw), ExtractionStatus::WholeReply};
  return {std::nullopt, ExtractionStatus::Failed};
}

struct GenerationResult {
  std::string task_id;
  DefectType condition = DefectType::Clean;
  std::string model;
  std::string raw_reply;
  std::optional<std::string> extracted_code;
  ExtractionStatus extraction_status = ExtractionStatus::Failed;

  bool operator==(const GenerationResult&) const = default;
};

inline Json generation_to_json(const GenerationResult& g) {
  Json j{{"task_id", g.task_id},
         {"condition", to_string(g.condition)},
         {"model", g.model},
         {"raw_reply", g.raw_reply},
         {"extraction_status", to_string(g.extraction_status)}};
  if (g.extracted_code) j["extracted_code"] = *g.extracted_code;
  return j;
}

inline GenerationResult generation_from_json(const Json& j, std::size_t line = 0) {
  try {
    GenerationResult g;
    g.task_id = j.at("task_id").get<std::string>();
    g.condition = parse_defect_type(j.at("condition").get<std::string>());
    g.model = j.at("model").get<std::string>();
    g.raw_reply = j.at("raw_reply").get<std::string>();
    g.extraction_status = parse_extraction_status(j.at("extraction_status").get<std::string>());
    if (j.contains("extracted_code") && !j["extracted_code"].is_null())
      g.extracted_code = j["extracted_code"].get<std::string>();
    if (g.extracted_code.has_value() == (g.extraction_status == ExtractionStatus::Failed))
      throw Error(ErrorKind::MalformedRecord, "extracted_code must be present iff status is not Failed",
                  {{"line", line}});
    return g;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("generation record: ") + e.what(), {{"line", line}});
  }
}

inline std::string format_hint(const Task& task) {
  if (task.eval.mode == EvalMode::Stdio)
    return "Write a complete Python 3 program that reads from standard input and writes to standard output.";
  if (task.eval.entry_point && !task.eval.entry_point->empty())
    return "Write a Python 3 function named `" + *task.eval.entry_point + "`.";
  return "Write a Python 3 solution.";
}

inline constexpr Decoding kGreedy{0.0, 4096};

/// One greedy completion for `description` (the original or a mutated text of
/// `task`), followed by extraction.
inline GenerationResult generate_solution(std::string_view description, const Task& task, DefectType condition,
                                          Provider& provider, const PromptTemplate& tmpl,
                                          const DelimiterRegistry& registry = DelimiterRegistry(),
                                          Decoding decoding = kGreedy) {
  if (trim(description).empty())
    throw Error(ErrorKind::PreconditionViolation, "empty description", {{"task_id", task.id}});
  decoding.temperature = 0.0;
  const auto prompt = tmpl.render({{"description", std::string(description)}, {"format_hint", format_hint(task)}});
  GenerationResult g;
  g.task_id = task.id;
  g.condition = condition;
  g.model = provider.model();
  g.raw_reply = provider.complete({prompt, decoding});
  const auto ex = extract_code(g.raw_reply, provider.model(), registry);
  g.extracted_code = ex.code;
  g.extraction_status = ex.status;
  return g;
}

}  // namespace specprobe
