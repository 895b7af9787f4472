#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "specprobe/error.hpp"
#include "specprobe/types.hpp"
#include "specprobe/util.hpp"

namespace specprobe {

enum class EvalMode { UnitTests, Stdio };

inline std::string_view to_string(EvalMode m) { return m == EvalMode::UnitTests ? "unit_tests" : "stdio"; }

struct StdioCase {
  std::string input;
  std::string expected_output;
  bool operator==(const StdioCase&) const = default;
};

struct EvalSpec {
  EvalMode mode = EvalMode::UnitTests;
  std::vector<std::string> unit_tests;
  std::vector<StdioCase> stdio_cases;
  std::optional<std::string> entry_point;
  bool operator==(const EvalSpec&) const = default;
};

struct Task {
  std::string id;
  Benchmark benchmark = Benchmark::HumanEval;
  std::string description;
  EvalSpec eval;
  std::optional<std::string> reference_solution;
  bool operator==(const Task&) const = default;
};

/// Stdout comparison form: trailing whitespace stripped per line, trailing
/// newlines dropped.
inline std::string normalize_output(std::string_view text) {
  std::string out;
  for (auto line : split_lines(text)) {
    out.append(rtrim(line));
    out.push_back('\n');
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

/// Lists every violated Task invariant; empty iff the task is well formed.
inline std::vector<std::string> validate_task(const Task& task) {
  std::vector<std::string> violations;
  if (task.id.empty()) violations.emplace_back("id empty");
  if (trim(task.description).empty()) violations.emplace_back("description empty");
  const auto& e = task.eval;
  if (e.unit_tests.empty() && e.stdio_cases.empty()) {
    violations.emplace_back("eval_spec empty");
  } else if ((e.mode == EvalMode::UnitTests && !e.stdio_cases.empty()) ||
             (e.mode == EvalMode::Stdio && !e.unit_tests.empty())) {
    violations.emplace_back("mode/field mismatch");
  }
  return violations;
}

class TaskSet {
 public:
  TaskSet() = default;

  TaskSet(Benchmark benchmark, std::vector<Task> tasks) : benchmark_(benchmark), tasks_(std::move(tasks)) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (tasks_[i].benchmark != benchmark_)
        throw Error(ErrorKind::PreconditionViolation, "task " + tasks_[i].id + " has a different benchmark tag");
      if (!index_.emplace(tasks_[i].id, i).second)
        throw Error(ErrorKind::PreconditionViolation, "duplicate task id " + tasks_[i].id, {{"id", tasks_[i].id}});
    }
  }

  Benchmark benchmark() const { return benchmark_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  std::size_t size() const { return tasks_.size(); }
  bool empty() const { return tasks_.empty(); }
  auto begin() const { return tasks_.begin(); }
  auto end() const { return tasks_.end(); }

  const Task* find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &tasks_[it->second];
  }

  bool operator==(const TaskSet& other) const { return benchmark_ == other.benchmark_ && tasks_ == other.tasks_; }

 private:
  Benchmark benchmark_ = Benchmark::HumanEval;
  std::vector<Task> tasks_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// canonical JSONL schema

inline Json task_to_json(const Task& t) {
  Json eval = {{"mode", std::string(to_string(t.eval.mode))}};
  if (!t.eval.unit_tests.empty() || t.eval.mode == EvalMode::UnitTests) eval["unit_tests"] = t.eval.unit_tests;
  if (!t.eval.stdio_cases.empty() || t.eval.mode == EvalMode::Stdio) {
    Json cases = Json::array();
    for (const auto& c : t.eval.stdio_cases) cases.push_back({{"input", c.input}, {"output", c.expected_output}});
    eval["stdio_cases"] = std::move(cases);
  }
  if (t.eval.entry_point) eval["entry_point"] = *t.eval.entry_point;
  Json j = {{"id", t.id},
            {"benchmark", std::string(to_string(t.benchmark))},
            {"description", t.description},
            {"eval", std::move(eval)}};
  if (t.reference_solution) j["reference_solution"] = *t.reference_solution;
  return j;
}

namespace detail {

inline const Json& require_field(const Json& obj, const char* key, std::size_t line) {
  if (!obj.is_object() || !obj.contains(key))
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: missing field '{}'", line, key),
                {{"line", line}, {"field", key}});
  return obj.at(key);
}

inline std::string require_string(const Json& obj, const char* key, std::size_t line) {
  const auto& v = require_field(obj, key, line);
  if (!v.is_string())
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: field '{}' must be a string", line, key),
                {{"line", line}, {"field", key}});
  return v.get<std::string>();
}

inline std::string string_or_throw(const Json& v, std::size_t line, const char* what) {
  if (!v.is_string())
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: {} must be a string", line, what),
                {{"line", line}, {"field", what}});
  return v.get<std::string>();
}

}  // namespace detail

/// Parses one canonical record. `line` is used only for error reporting.
inline Task task_from_json(const Json& j, std::size_t line = 0) {
  using detail::require_field;
  using detail::require_string;
  if (!j.is_object())
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: record is not an object", line), {{"line", line}});
  Task t;
  t.id = require_string(j, "id", line);
  try {
    t.benchmark = parse_benchmark(require_string(j, "benchmark", line));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MalformedRecord) throw;
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: {}", line, e.what()), {{"line", line}});
  }
  t.description = require_string(j, "description", line);
  const auto& eval = require_field(j, "eval", line);
  const auto mode = require_string(eval, "mode", line);
  if (mode == "unit_tests") {
    t.eval.mode = EvalMode::UnitTests;
  } else if (mode == "stdio") {
    t.eval.mode = EvalMode::Stdio;
  } else {
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: unknown eval mode '{}'", line, mode),
                {{"line", line}, {"field", "eval.mode"}});
  }
  if (eval.contains("unit_tests")) {
    const auto& tests = eval.at("unit_tests");
    if (!tests.is_array())
      throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: unit_tests must be an array", line),
                  {{"line", line}});
    for (const auto& s : tests) t.eval.unit_tests.push_back(detail::string_or_throw(s, line, "unit_tests[]"));
  }
  if (eval.contains("stdio_cases")) {
    const auto& cases = eval.at("stdio_cases");
    if (!cases.is_array())
      throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: stdio_cases must be an array", line),
                  {{"line", line}});
    for (const auto& c : cases) {
      if (c.is_array() && c.size() == 2) {
        t.eval.stdio_cases.push_back({detail::string_or_throw(c[0], line, "stdio_cases[][0]"),
                                      detail::string_or_throw(c[1], line, "stdio_cases[][1]")});
      } else {
        t.eval.stdio_cases.push_back({require_string(c, "input", line), require_string(c, "output", line)});
      }
    }
  }
  if (eval.contains("entry_point") && !eval.at("entry_point").is_null())
    t.eval.entry_point = detail::string_or_throw(eval.at("entry_point"), line, "entry_point");
  if (j.contains("reference_solution") && !j.at("reference_solution").is_null())
    t.reference_solution = detail::string_or_throw(j.at("reference_solution"), line, "reference_solution");

  if (const auto violations = validate_task(t); !violations.empty())
    throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: {}", line, join(violations, "; ")),
                {{"line", line}, {"violations", violations}});
  return t;
}

inline std::string serialize(const TaskSet& set) {
  std::vector<Json> rows;
  rows.reserve(set.size());
  for (const auto& t : set) rows.push_back(task_to_json(t));
  return to_jsonl(rows);
}

inline TaskSet parse_benchmark_jsonl(std::string_view text, Benchmark benchmark) {
  std::vector<Task> tasks;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& rec : parse_jsonl(text)) {
    auto task = task_from_json(rec.value, rec.line_no);
    if (task.benchmark != benchmark)
      throw Error(ErrorKind::MalformedRecord,
                  fmt::format("line {}: benchmark '{}' does not match '{}'", rec.line_no, to_string(task.benchmark),
                              to_string(benchmark)),
                  {{"line", rec.line_no}, {"field", "benchmark"}});
    if (!seen.emplace(task.id, rec.line_no).second)
      throw Error(ErrorKind::MalformedRecord, fmt::format("line {}: duplicate id '{}'", rec.line_no, task.id),
                  {{"line", rec.line_no}, {"field", "id"}});
    tasks.push_back(std::move(task));
  }
  if (tasks.empty()) throw Error(ErrorKind::EmptyCorpus, "no tasks in corpus");
  return TaskSet(benchmark, std::move(tasks));
}

inline TaskSet load_benchmark(const std::filesystem::path& path, Benchmark benchmark) {
  try {
    return parse_benchmark_jsonl(read_file(path), benchmark);
  } catch (Error& e) {
    if (e.kind() == ErrorKind::EmptyCorpus)
      throw Error(ErrorKind::EmptyCorpus, "no tasks in " + path.string(), {{"path", path.string()}});
    throw;
  }
}

inline void save_benchmark(const std::filesystem::path& path, const TaskSet& set) {
  write_file_atomic(path, serialize(set));
}

}  // namespace specprobe
