#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "specprobe/corpus.hpp"
#include "specprobe/mutant.hpp"
#include "specprobe/provider.hpp"
#include "specprobe/templates.hpp"

namespace specprobe {

enum class Criterion { LVCompliance, SFCompliance, USCompliance, Naturalness };

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::LVCompliance: return "LVCompliance";
    case Criterion::SFCompliance: return "SFCompliance";
    case Criterion::USCompliance: return "USCompliance";
    case Criterion::Naturalness: return "Naturalness";
  }
  return "?";
}

inline Criterion parse_criterion(std::string_view s) {
  if (s == "LVCompliance") return Criterion::LVCompliance;
  if (s == "SFCompliance") return Criterion::SFCompliance;
  if (s == "USCompliance") return Criterion::USCompliance;
  if (s == "Naturalness") return Criterion::Naturalness;
  throw Error(ErrorKind::MalformedRecord, "unknown criterion '" + std::string(s) + "'");
}

inline std::string_view question_text(Criterion c) {
  switch (c) {
    case Criterion::LVCompliance:
      return "Did the mutation replace specific terms, variable names, or descriptions with vaguer counterparts "
             "without changing the overall task?";
    case Criterion::SFCompliance:
      return "Does the defective description contain only typographical or formatting errors compared to the "
             "original?";
    case Criterion::USCompliance:
      return "Is exactly one requirement, condition, or detail missing in the defective description compared to "
             "the original one?";
    case Criterion::Naturalness:
      return "Does the defective description read like a natural description a real user could write?";
  }
  return "";
}

inline Criterion compliance_criterion(DefectType d) {
  switch (d) {
    case DefectType::LV: return Criterion::LVCompliance;
    case DefectType::US: return Criterion::USCompliance;
    case DefectType::SF: return Criterion::SFCompliance;
    case DefectType::Clean: break;
  }
  throw Error(ErrorKind::PreconditionViolation, "CLEAN has no compliance criterion");
}

struct Verdict {
  std::string task_id;
  DefectType defect_type = DefectType::SF;
  Benchmark benchmark = Benchmark::HumanEval;
  Criterion criterion = Criterion::Naturalness;
  int score = 0;
  std::string raw_reply;
  std::string judge_model;
};

inline Json verdict_to_json(const Verdict& v) {
  return {{"task_id", v.task_id},
          {"defect_type", std::string(to_string(v.defect_type))},
          {"criterion", std::string(to_string(v.criterion))},
          {"score", v.score},
          {"judge_model", v.judge_model},
          {"benchmark", std::string(to_string(v.benchmark))},
          {"raw_reply", v.raw_reply}};
}

inline Verdict verdict_from_json(const Json& j) {
  try {
    Verdict v;
    v.task_id = j.at("task_id").get<std::string>();
    v.defect_type = parse_defect_type(j.at("defect_type").get<std::string>());
    v.criterion = parse_criterion(j.at("criterion").get<std::string>());
    v.score = j.at("score").get<int>();
    if (v.score != 0 && v.score != 1) throw Error(ErrorKind::MalformedRecord, "verdict score must be 0 or 1");
    v.judge_model = j.value("judge_model", std::string());
    v.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
    v.raw_reply = j.value("raw_reply", std::string());
    return v;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("verdict record: ") + e.what());
  }
}

/// Accepts exactly `{"score": 0}` or `{"score": 1}` with optional JSON
/// whitespace between tokens and around the object. Everything else,
/// including escaped keys, duplicate keys and numeric variants like 1.0, is
/// rejected.
inline int parse_verdict(std::string_view raw) {
  std::size_t i = 0;
  auto ws = [&] {
    while (i < raw.size() && (raw[i] == ' ' || raw[i] == '\t' || raw[i] == '\n' || raw[i] == '\r')) ++i;
  };
  auto lit = [&](std::string_view s) {
    if (raw.substr(i, s.size()) != s) return false;
    i += s.size();
    return true;
  };
  auto fail = [&]() -> int {
    throw Error(ErrorKind::VerdictParseError, "reply is not a single {\"score\": 0|1} object",
                {{"raw_reply", std::string(raw.substr(0, 500))}});
  };
  ws();
  if (!lit("{")) return fail();
  ws();
  if (!lit("\"score\"")) return fail();
  ws();
  if (!lit(":")) return fail();
  ws();
  if (i >= raw.size() || (raw[i] != '0' && raw[i] != '1')) return fail();
  const int score = raw[i++] - '0';
  ws();
  if (!lit("}")) return fail();
  ws();
  if (i != raw.size()) return fail();
  return score;
}

inline std::string build_judge_prompt(const PromptTemplate& tmpl, std::string_view original, std::string_view mutated,
                                      Criterion criterion) {
  return tmpl.render({{"original", std::string(original)},
                      {"mutated", std::string(mutated)},
                      {"question", std::string(question_text(criterion))}});
}

inline constexpr std::string_view kVerdictReminder = "\n\nReply with only the JSON object.";

/// Scores one mutant on one criterion. A reply that fails parse_verdict is
/// retried once with a reminder; the second failure propagates.
inline Verdict judge_instance(const Mutant& mutant, const Task& original, Criterion criterion, Provider& provider,
                              const PromptTemplate& tmpl, Decoding decoding = {0.0, 64}) {
  if (criterion != Criterion::Naturalness && compliance_criterion(mutant.defect_type) != criterion)
    throw Error(ErrorKind::PreconditionViolation,
                fmt::format("criterion {} does not apply to a {} mutant", to_string(criterion),
                            to_string(mutant.defect_type)),
                {{"task_id", mutant.task_id}});
  if (mutant.task_id != original.id)
    throw Error(ErrorKind::PreconditionViolation, "mutant " + mutant.task_id + " judged against task " + original.id);

  CompletionRequest request{build_judge_prompt(tmpl, original.description, mutant.description, criterion), decoding};
  Verdict v{mutant.task_id, mutant.defect_type, original.benchmark, criterion, 0, {}, provider.model()};
  v.raw_reply = provider.complete(request);
  try {
    v.score = parse_verdict(v.raw_reply);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::VerdictParseError) throw;
    request.prompt += kVerdictReminder;
    v.raw_reply = provider.complete(request);
    v.score = parse_verdict(v.raw_reply);
  }
  return v;
}

/// Offline judge: compliance holds iff the defective text differs from the
/// original; naturalness always holds. Reads the <original>/<defective>
/// sections of the judge template.
inline std::shared_ptr<Provider> make_stub_judge(std::string id = "stub-judge") {
  return std::make_shared<StubProvider>(id, "stub-judge", [](const CompletionRequest& r) {
    auto section = [&](std::string_view tag) -> std::optional<std::string> {
      const std::string open = "<" + std::string(tag) + ">\n";
      const std::string close = "\n</" + std::string(tag) + ">";
      const auto a = r.prompt.find(open);
      if (a == std::string::npos) return std::nullopt;
      const auto b = r.prompt.find(close, a + open.size());
      if (b == std::string::npos) return std::nullopt;
      return r.prompt.substr(a + open.size(), b - a - open.size());
    };
    const bool naturalness = r.prompt.find(question_text(Criterion::Naturalness)) != std::string::npos;
    if (naturalness) return std::string(R"({"score": 1})");
    const auto orig = section("original");
    const auto mut = section("defective");
    const bool differs = orig && mut && *orig != *mut;
    return std::string(differs ? R"({"score": 1})" : R"({"score": 0})");
  });
}

// ---------------------------------------------------------------------------
// aggregation

struct QualityCell {
  std::size_t n = 0;  // judged mutants
  std::size_t compliance_judged = 0;
  std::size_t compliant = 0;
  std::size_t naturalness_judged = 0;
  std::size_t natural = 0;

  double compliance() const { return compliance_judged ? double(compliant) / double(compliance_judged) : 0.0; }
  double naturalness() const { return naturalness_judged ? double(natural) / double(naturalness_judged) : 0.0; }
};

struct QualityReport {
  std::map<std::pair<Benchmark, DefectType>, QualityCell> rows;
};

inline QualityReport quality_report(const std::vector<Verdict>& verdicts) {
  QualityReport report;
  std::set<std::tuple<std::string, DefectType, Criterion>> seen;
  std::map<std::pair<Benchmark, DefectType>, std::set<std::string>> mutants;
  for (const auto& v : verdicts) {
    if (!seen.emplace(v.task_id, v.defect_type, v.criterion).second)
      throw Error(ErrorKind::DuplicateVerdict,
                  fmt::format("{} {} judged twice on {}", v.task_id, to_string(v.defect_type), to_string(v.criterion)),
                  {{"task_id", v.task_id}});
    auto& cell = report.rows[{v.benchmark, v.defect_type}];
    mutants[{v.benchmark, v.defect_type}].insert(v.task_id);
    if (v.criterion == Criterion::Naturalness) {
      ++cell.naturalness_judged;
      cell.natural += static_cast<std::size_t>(v.score);
    } else {
      ++cell.compliance_judged;
      cell.compliant += static_cast<std::size_t>(v.score);
    }
  }
  for (auto& [key, cell] : report.rows) cell.n = mutants[key].size();
  return report;
}

namespace detail {
inline std::vector<std::pair<std::pair<Benchmark, DefectType>, QualityCell>> ordered_rows(const QualityReport& r) {
  std::vector<std::pair<std::pair<Benchmark, DefectType>, QualityCell>> out;
  for (auto b : kBenchmarks)
    for (auto d : {DefectType::LV, DefectType::SF, DefectType::US})
      if (auto it = r.rows.find({b, d}); it != r.rows.end()) out.emplace_back(it->first, it->second);
  return out;
}
}  // namespace detail

inline std::string render_quality_csv(const QualityReport& r) {
  std::string out = "Dataset,Mutation,N,Compliance,Naturalness\n";
  for (const auto& [key, cell] : detail::ordered_rows(r))
    out += fmt::format("{},{},{},{},{}\n", to_string(key.first), to_string(key.second), cell.n,
                       fixed(cell.compliance(), 2), fixed(cell.naturalness(), 2));
  return out;
}

inline std::string render_quality_text(const QualityReport& r) {
  std::string out = fmt::format("{:<14} {:<8} {:>6} {:>10} {:>11}\n", "Dataset", "Mutation", "N", "Compliance",
                                "Naturalness");
  for (const auto& [key, cell] : detail::ordered_rows(r))
    out += fmt::format("{:<14} {:<8} {:>6} {:>10} {:>11}\n", to_string(key.first), to_string(key.second), cell.n,
                       fixed(cell.compliance(), 2), fixed(cell.naturalness(), 2));
  return out;
}

inline Json quality_to_json(const QualityReport& r) {
  Json rows = Json::array();
  for (const auto& [key, cell] : detail::ordered_rows(r))
    rows.push_back({{"dataset", std::string(to_string(key.first))},
                    {"mutation", std::string(to_string(key.second))},
                    {"n", cell.n},
                    {"compliant", cell.compliant},
                    {"compliance_judged", cell.compliance_judged},
                    {"natural", cell.natural},
                    {"naturalness_judged", cell.naturalness_judged},
                    {"compliance", cell.compliance()},
                    {"naturalness", cell.naturalness()}});
  return {{"rows", rows}};
}

}  // namespace specprobe
