#pragma once

// Converters from the upstream benchmark distributions into the canonical
// task schema. Each runs once per benchmark at `specprobe import` time.

#include <regex>
#include <string>
#include <vector>

#include "specprobe/corpus.hpp"

namespace specprobe {

struct ImportResult {
  TaskSet tasks;
  std::size_t skipped = 0;
  std::vector<std::string> notes;
};

namespace detail {

inline std::string id_string(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorKind::MalformedRecord, "task id must be a string or integer");
}

inline std::string strip_prefix(std::string id, std::string_view prefix) {
  if (id.rfind(prefix, 0) == 0) id.erase(0, prefix.size());
  return id;
}

inline ImportResult finish_import(Benchmark b, std::vector<Task> tasks, std::size_t skipped,
                                  std::vector<std::string> notes) {
  if (tasks.empty()) throw Error(ErrorKind::EmptyCorpus, "import produced no tasks");
  return {TaskSet(b, std::move(tasks)), skipped, std::move(notes)};
}

}  // namespace detail

/// HumanEval rows: task_id, prompt, canonical_solution, test, entry_point.
inline ImportResult import_humaneval(std::string_view jsonl) {
  std::vector<Task> tasks;
  for (const auto& rec : parse_jsonl(jsonl)) {
    const auto& j = rec.value;
    Task t;
    t.benchmark = Benchmark::HumanEval;
    t.id = "humaneval/" + detail::strip_prefix(detail::id_string(detail::require_field(j, "task_id", rec.line_no)),
                                               "HumanEval/");
    t.description = detail::require_string(j, "prompt", rec.line_no);
    const auto entry = detail::require_string(j, "entry_point", rec.line_no);
    t.eval.mode = EvalMode::UnitTests;
    t.eval.entry_point = entry;
    t.eval.unit_tests = {detail::require_string(j, "test", rec.line_no), "check(" + entry + ")"};
    if (j.contains("canonical_solution"))
      t.reference_solution = t.description + detail::require_string(j, "canonical_solution", rec.line_no);
    tasks.push_back(std::move(t));
  }
  return detail::finish_import(Benchmark::HumanEval, std::move(tasks), 0, {});
}

/// MBPP rows: task_id, text, code, test_list, optional test_setup_code.
inline ImportResult import_mbpp(std::string_view jsonl) {
  static const std::regex call_re(R"(assert\s+\(?\s*(?:set\(\s*)?(?:math\.isclose\(\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*\()");
  std::vector<Task> tasks;
  for (const auto& rec : parse_jsonl(jsonl)) {
    const auto& j = rec.value;
    Task t;
    t.benchmark = Benchmark::MBPP;
    t.id = "mbpp/" + detail::id_string(detail::require_field(j, "task_id", rec.line_no));
    t.description = detail::require_string(j, "text", rec.line_no);
    t.eval.mode = EvalMode::UnitTests;
    if (j.contains("test_setup_code") && j.at("test_setup_code").is_string() &&
        !trim(j.at("test_setup_code").get<std::string>()).empty())
      t.eval.unit_tests.push_back(j.at("test_setup_code").get<std::string>());
    for (const auto& a : detail::require_field(j, "test_list", rec.line_no))
      t.eval.unit_tests.push_back(detail::string_or_throw(a, rec.line_no, "test_list[]"));
    for (const auto& a : t.eval.unit_tests) {
      std::smatch m;
      if (std::regex_search(a, m, call_re)) {
        t.eval.entry_point = m[1].str();
        break;
      }
    }
    if (j.contains("code")) t.reference_solution = detail::require_string(j, "code", rec.line_no);
    tasks.push_back(std::move(t));
  }
  return detail::finish_import(Benchmark::MBPP, std::move(tasks), 0, {});
}

/// LiveCodeBench rows: question_id, question_content, public_test_cases
/// (array or JSON-encoded string of {input, output, testtype}). Only stdin
/// cases are imported; problems with none are skipped. A non-upstream
/// `reference_solution` string is kept when present.
inline ImportResult import_livecodebench(std::string_view jsonl) {
  std::vector<Task> tasks;
  std::size_t skipped = 0;
  std::vector<std::string> notes;
  for (const auto& rec : parse_jsonl(jsonl)) {
    const auto& j = rec.value;
    Task t;
    t.benchmark = Benchmark::LiveCodeBench;
    t.id = "livecodebench/" + detail::id_string(detail::require_field(j, "question_id", rec.line_no));
    t.description = detail::require_string(j, "question_content", rec.line_no);
    t.eval.mode = EvalMode::Stdio;
    Json cases = detail::require_field(j, "public_test_cases", rec.line_no);
    if (cases.is_string()) {
      try {
        cases = Json::parse(cases.get<std::string>());
      } catch (const Json::parse_error&) {
        throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: public_test_cases is not JSON", rec.line_no),
                    {{"line", rec.line_no}});
      }
    }
    for (const auto& c : cases) {
      if (c.value("testtype", std::string("stdin")) != "stdin") continue;
      t.eval.stdio_cases.push_back(
          {detail::require_string(c, "input", rec.line_no), detail::require_string(c, "output", rec.line_no)});
    }
    if (j.contains("reference_solution") && j.at("reference_solution").is_string())
      t.reference_solution = j.at("reference_solution").get<std::string>();
    if (t.eval.stdio_cases.empty()) {
      ++skipped;
      notes.push_back(t.id + ": no stdin test cases");
      continue;
    }
    tasks.push_back(std::move(t));
  }
  return detail::finish_import(Benchmark::LiveCodeBench, std::move(tasks), skipped, std::move(notes));
}

}  // namespace specprobe
