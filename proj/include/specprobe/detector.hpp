#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specprobe/metrics.hpp"
#include "specprobe/provider.hpp"
#include "specprobe/templates.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

struct Prediction {
  std::string description_id;
  DefectType label = DefectType::Clean;
  std::optional<double> confidence;
  std::string backend;
  std::optional<std::string> raw_reply;
};

inline Json prediction_to_json(const Prediction& p) {
  Json j{{"id", p.description_id}, {"label", to_string(p.label)}, {"backend", p.backend}};
  if (p.confidence) j["confidence"] = *p.confidence;
  if (p.raw_reply) j["raw_reply"] = *p.raw_reply;
  return j;
}

inline Prediction prediction_from_json(const Json& j, std::size_t line = 0) {
  try {
    Prediction p;
    p.description_id = j.at("id").get<std::string>();
    p.label = parse_defect_type(j.at("label").get<std::string>());
    p.backend = j.value("backend", std::string{});
    if (j.contains("confidence") && !j["confidence"].is_null()) p.confidence = j["confidence"].get<double>();
    if (j.contains("raw_reply") && !j["raw_reply"].is_null()) p.raw_reply = j["raw_reply"].get<std::string>();
    return p;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("prediction record: ") + e.what(), {{"line", line}});
  }
}

// ---------------------------------------------------------------------------
// auditor prompt

inline constexpr std::string_view kAuditorPreamble =
    "You are a code-benchmark quality auditor.\n"
    "Classify the following coding prompt into exactly one of:\n"
    "\n"
    "  LV    -- The prompt uses vague or imprecise wording.\n"
    "  SF    -- The prompt contains syntax or formatting errors.\n"
    "  US    -- The prompt is missing a constraint or condition.\n"
    "  CLEAN -- The prompt is complete and well-formed.\n";

enum class PromptMode { ZeroShot, FewShot };

struct FewShotExemplar {
  std::string description;
  DefectType label = DefectType::Clean;
};

inline void validate_exemplars(const std::vector<FewShotExemplar>& ex) {
  if (ex.size() != kLabels.size())
    throw Error(ErrorKind::ExemplarSetInvalid, fmt::format("few-shot needs exactly 4 exemplars, got {}", ex.size()));
  std::set<DefectType> seen;
  for (const auto& e : ex) seen.insert(e.label);
  if (seen.size() != kLabels.size())
    throw Error(ErrorKind::ExemplarSetInvalid, "few-shot exemplars must cover CLEAN, LV, US and SF once each");
}

inline std::vector<FewShotExemplar> load_exemplars(const std::filesystem::path& path) {
  try {
    const auto j = Json::parse(read_file(path));
    std::vector<FewShotExemplar> out;
    for (const auto& e : j)
      out.push_back({e.at("description").get<std::string>(), parse_defect_type(e.at("label").get<std::string>())});
    validate_exemplars(out);
    return out;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

inline std::vector<FewShotExemplar> default_exemplars() {
  return load_exemplars(asset_root() / "templates" / "fewshot_exemplars.v1.json");
}

inline std::string build_auditor_prompt(std::string_view description, PromptMode mode,
                                        const std::vector<FewShotExemplar>& exemplars = {}) {
  std::string out(kAuditorPreamble);
  if (mode == PromptMode::FewShot) {
    validate_exemplars(exemplars);
    out += "\nLabeled examples:\n";
    for (const auto& e : exemplars) {
      out += "\nPrompt:\n";
      out += e.description;
      out += "\nLabel: ";
      out += to_string(e.label);
      out += '\n';
    }
  }
  out += "\nPrompt:\n";
  out += description;
  out += "\nLabel:";
  return out;
}

/// Finds the class token among the standalone words of a reply (words are
/// maximal runs of letters, digits and '_'), case-insensitively. Several
/// distinct tokens are ambiguous and rejected.
inline DefectType parse_label(std::string_view reply) {
  std::set<DefectType> found;
  std::optional<DefectType> first;
  auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (std::size_t i = 0; i < reply.size();) {
    if (!word_char(reply[i])) {
      ++i;
      continue;
    }
    const auto b = i;
    while (i < reply.size() && word_char(reply[i])) ++i;
    const auto w = to_lower(reply.substr(b, i - b));
    std::optional<DefectType> d;
    if (w == "clean") d = DefectType::Clean;
    else if (w == "lv") d = DefectType::LV;
    else if (w == "us") d = DefectType::US;
    else if (w == "sf") d = DefectType::SF;
    if (d) {
      if (!first) first = d;
      found.insert(*d);
    }
  }
  if (found.empty())
    throw Error(ErrorKind::LabelParseError, "reply contains no class label",
                {{"raw_reply", std::string(reply.substr(0, 300))}});
  if (found.size() > 1)
    throw Error(ErrorKind::LabelParseError, "reply names more than one class",
                {{"raw_reply", std::string(reply.substr(0, 300))}});
  return *first;
}

// ---------------------------------------------------------------------------
// backends

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::string name() const = 0;
  virtual Prediction classify(const std::string& id, std::string_view description) = 0;
};

class RemoteLlmBackend : public DetectorBackend {
 public:
  RemoteLlmBackend(std::shared_ptr<Provider> provider, PromptMode mode, std::vector<FewShotExemplar> exemplars = {})
      : provider_(std::move(provider)), mode_(mode), exemplars_(std::move(exemplars)) {
    if (mode_ == PromptMode::FewShot) validate_exemplars(exemplars_);
  }

  std::string name() const override {
    return provider_->model() + (mode_ == PromptMode::FewShot ? ":few-shot" : ":zero-shot");
  }

  Prediction classify(const std::string& id, std::string_view description) override {
    const auto reply = provider_->complete({build_auditor_prompt(description, mode_, exemplars_), {0.0, 16}});
    return {id, parse_label(reply), std::nullopt, name(), reply};
  }

 private:
  std::shared_ptr<Provider> provider_;
  PromptMode mode_;
  std::vector<FewShotExemplar> exemplars_;
};

class FixedBackend : public DetectorBackend {
 public:
  explicit FixedBackend(DefectType label) : label_(label) {}
  std::string name() const override { return "fixed:" + std::string(to_string(label_)); }
  Prediction classify(const std::string& id, std::string_view) override { return {id, label_, std::nullopt, name(), {}}; }

 private:
  DefectType label_;
};

namespace heuristic_detail {

inline bool unbalanced(std::string_view text) {
  std::size_t fences = 0;
  for (auto line : split_lines(text))
    if (trim(line).rfind("```", 0) == 0) ++fences;
  if (fences % 2) return true;
  std::vector<char> stack;
  for (char c : text) {
    if (c == '(' || c == '[' || c == '{') {
      stack.push_back(c);
    } else if (c == ')' || c == ']' || c == '}') {
      const char want = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (stack.empty() || stack.back() != want) return true;
      stack.pop_back();
    }
  }
  return !stack.empty();
}

inline const std::set<std::string>& dictionary() {
  static const std::set<std::string> words = {
      "function", "return",   "returns",  "given",    "string",   "strings",  "number",   "numbers",  "integer",
      "integers", "list",     "element",  "elements", "array",    "input",    "output",   "write",    "which",
      "between",  "should",   "every",    "first",    "second",   "value",    "values",   "length",   "largest",
      "smallest", "maximum",  "minimum",  "sorted",   "order",    "character", "characters", "count", "check",
      "whether",  "example",  "examples", "positive", "negative", "number",   "contains", "separated", "sum",
      "product",  "each",     "their",    "there",    "these",    "where",    "index",    "indices",  "words",
      "print",    "line",     "lines",    "test",     "cases",    "query",    "queries",  "result",   "distinct",
      "total",    "after",    "before",   "remove",   "insert",   "delimiter", "true",    "false",    "otherwise",
      "string",   "substring", "prefix",  "suffix",   "matrix",   "tuple",    "dictionary", "keys",   "return",
      "least",    "greater",  "smaller",  "equal",    "numbers",  "digits",   "reverse",  "average",  "closer",
      "threshold", "always",  "exactly",  "unique",   "minimum",  "operations", "string", "balance",  "below"};
  return words;
}

/// True for a word that is one edit (adjacent transposition, dropped or
/// doubled letter) away from a dictionary word without being one itself.
inline bool near_miss(const std::string& w) {
  const auto& dict = dictionary();
  if (w.size() < 4 || dict.count(w)) return false;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    auto t = w;
    std::swap(t[i], t[i + 1]);
    if (dict.count(t)) return true;
  }
  if (w.size() >= 5)
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto t = w;
      t.erase(i, 1);
      if (dict.count(t)) return true;
    }
  for (const auto& d : dict) {
    if (d.size() + 1 != w.size()) continue;
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto t = d;
      t.insert(t.begin() + static_cast<std::ptrdiff_t>(i), d[i]);
      if (t == w) return true;
    }
  }
  return false;
}

inline bool has_typo(std::string_view text) {
  std::string word;
  auto flush = [&] {
    bool hit = near_miss(to_lower(word));
    word.clear();
    return hit;
  };
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += c;
    } else if (!word.empty() && flush()) {
      return true;
    }
  }
  return !word.empty() && flush();
}

inline bool vague(std::string_view text) {
  static const std::set<std::string> lexicon = {"arrange", "arranges", "arranged", "put",   "puts",  "handle",
                                                "handles", "stuff",    "things",   "thing", "some",  "somehow",
                                                "appropriate", "appropriately", "suitable", "etc", "whatever",
                                                "deal",    "items",    "bunch",    "filler", "collection"};
  std::string word;
  for (char c : std::string(text) + " ") {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      if (lexicon.count(word)) return true;
      word.clear();
    }
  }
  return false;
}

}  // namespace heuristic_detail

/// Offline rule-based baseline: structural damage or a near-miss spelling is
/// SF, a vague-verb lexicon hit is LV, anything else CLEAN. It never predicts
/// US.
class HeuristicBackend : public DetectorBackend {
 public:
  std::string name() const override { return "heuristic"; }
  Prediction classify(const std::string& id, std::string_view d) override {
    using namespace heuristic_detail;
    DefectType label = DefectType::Clean;
    if (unbalanced(d) || has_typo(d)) label = DefectType::SF;
    else if (vague(d)) label = DefectType::LV;
    return {id, label, std::nullopt, name(), {}};
  }
};

// ---------------------------------------------------------------------------
// batch classification

struct DescriptionItem {
  std::string id;
  std::string text;
  Benchmark benchmark = Benchmark::HumanEval;
  DefectType truth = DefectType::Clean;
};

struct ItemError {
  std::string id;
  Json error;
};

struct BatchResult {
  std::vector<Prediction> predictions;  // aligned with successful items, input order
  std::vector<std::size_t> item_index;  // input index of each prediction
  std::vector<ItemError> errors;
};

/// Classifies every item; a failing item is recorded and the batch continues.
inline BatchResult classify_batch(const std::vector<DescriptionItem>& items, DetectorBackend& backend,
                                  std::size_t workers) {
  std::vector<std::optional<Prediction>> slots(items.size());
  std::vector<std::optional<Json>> errs(items.size());
  parallel_for(items.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = backend.classify(items[i].id, items[i].text);
    } catch (const Error& e) {
      errs[i] = e.to_json();
    }
  });
  BatchResult r;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) {
      r.predictions.push_back(std::move(*slots[i]));
      r.item_index.push_back(i);
    } else {
      r.errors.push_back({items[i].id, *errs[i]});
    }
  }
  return r;
}

struct FlagReport {
  std::vector<Prediction> predictions;
  std::vector<Benchmark> groups;  // aligned with predictions
  std::vector<ItemError> errors;
  SpecificityReport specificity;
  std::vector<std::string> flagged;  // ids predicted non-CLEAN
};

inline FlagReport flag_clean_set(const std::vector<DescriptionItem>& originals, DetectorBackend& backend,
                                 std::size_t workers = 4) {
  auto batch = classify_batch(originals, backend, workers);
  FlagReport rep;
  std::vector<DefectType> labels;
  for (std::size_t k = 0; k < batch.predictions.size(); ++k) {
    const auto& p = batch.predictions[k];
    rep.groups.push_back(originals[batch.item_index[k]].benchmark);
    labels.push_back(p.label);
    if (p.label != DefectType::Clean) rep.flagged.push_back(p.description_id);
  }
  rep.predictions = std::move(batch.predictions);
  rep.errors = std::move(batch.errors);
  rep.specificity = specificity_report(labels, rep.groups);
  return rep;
}

inline Json specificity_row_to_json(const SpecificityRow& r) {
  Json by = Json::object();
  for (const auto& [d, n] : r.fp_by_type) by[std::string(to_string(d))] = n;
  return {{"total", r.total},
          {"tn", r.tn},
          {"fp", r.fp},
          {"specificity", r.specificity()},
          {"fp_rate", r.fp_rate()},
          {"fp_by_type", by}};
}

inline Json flag_report_to_json(const FlagReport& r) {
  Json preds = Json::array();
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    auto j = prediction_to_json(r.predictions[i]);
    j["benchmark"] = to_string(r.groups[i]);
    preds.push_back(j);
  }
  Json rows = Json::object();
  for (const auto& [b, row] : r.specificity.rows) rows[std::string(to_string(b))] = specificity_row_to_json(row);
  Json errors = Json::array();
  for (const auto& e : r.errors) errors.push_back({{"id", e.id}, {"error", e.error}});
  return {{"predictions", preds},
          {"specificity", {{"by_benchmark", rows}, {"total", specificity_row_to_json(r.specificity.total)}}},
          {"flagged", r.flagged},
          {"errors", errors}};
}

inline FlagReport flag_report_from_json(const Json& j) {
  FlagReport r;
  std::vector<DefectType> labels;
  for (const auto& p : j.at("predictions")) {
    r.predictions.push_back(prediction_from_json(p));
    r.groups.push_back(parse_benchmark(p.at("benchmark").get<std::string>()));
    labels.push_back(r.predictions.back().label);
    if (labels.back() != DefectType::Clean) r.flagged.push_back(r.predictions.back().description_id);
  }
  for (const auto& e : j.value("errors", Json::array()))
    r.errors.push_back({e.at("id").get<std::string>(), e.at("error")});
  r.specificity = specificity_report(labels, r.groups);
  return r;
}

/// Confusion matrix and metrics of a backend over labeled items. Items the
/// backend cannot classify are excluded and listed.
struct DetectorEvaluation {
  LabelMatrix matrix;
  DetectorMetrics metrics;
  std::vector<Prediction> predictions;
  std::vector<ItemError> errors;
};

inline DetectorEvaluation evaluate_detector(const std::vector<DescriptionItem>& items, DetectorBackend& backend,
                                            std::size_t workers = 4) {
  auto batch = classify_batch(items, backend, workers);
  std::vector<std::pair<DefectType, DefectType>> pairs;
  for (std::size_t k = 0; k < batch.predictions.size(); ++k)
    pairs.emplace_back(items[batch.item_index[k]].truth, batch.predictions[k].label);
  DetectorEvaluation ev;
  ev.matrix = confusion(pairs);
  ev.metrics = macro_scores(ev.matrix);
  ev.predictions = std::move(batch.predictions);
  ev.errors = std::move(batch.errors);
  return ev;
}

}  // namespace specprobe
