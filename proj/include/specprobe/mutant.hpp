#pragma once

#include <map>
#include <string>
#include <vector>

#include "specprobe/types.hpp"
#include "specprobe/util.hpp"

namespace specprobe {

enum class MutantOrigin { NativeRule, LLMGenerated };

inline std::string_view to_string(MutantOrigin o) { return o == MutantOrigin::NativeRule ? "native" : "llm"; }

/// A defective variant of one task description. Carries only the
/// description, so tests and reference solutions cannot be touched.
struct Mutant {
  std::string task_id;
  DefectType defect_type = DefectType::SF;
  std::string description;
  MutantOrigin origin = MutantOrigin::NativeRule;
  std::map<std::string, std::string> meta;

  std::string key() const { return task_id + "#" + std::string(to_string(defect_type)); }
  bool operator==(const Mutant&) const = default;
};

inline Json mutant_to_json(const Mutant& m) {
  return {{"task_id", m.task_id},
          {"defect_type", std::string(to_string(m.defect_type))},
          {"description", m.description},
          {"origin", std::string(to_string(m.origin))},
          {"meta", m.meta}};
}

inline Mutant mutant_from_json(const Json& j) {
  try {
    Mutant m;
    m.task_id = j.at("task_id").get<std::string>();
    m.defect_type = parse_defect_type(j.at("defect_type").get<std::string>());
    if (m.defect_type == DefectType::Clean) throw Error(ErrorKind::MalformedRecord, "mutant labelled CLEAN");
    m.description = j.at("description").get<std::string>();
    const auto origin = j.value("origin", std::string("native"));
    m.origin = origin == "llm" ? MutantOrigin::LLMGenerated : MutantOrigin::NativeRule;
    if (j.contains("meta")) m.meta = j.at("meta").get<std::map<std::string, std::string>>();
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("mutant record: ") + e.what());
  }
}

inline std::vector<Mutant> load_mutants(const std::filesystem::path& path) {
  std::vector<Mutant> out;
  for (const auto& rec : read_jsonl(path)) out.push_back(mutant_from_json(rec.value));
  return out;
}

inline std::string mutants_to_jsonl(const std::vector<Mutant>& mutants) {
  std::vector<Json> rows;
  for (const auto& m : mutants) rows.push_back(mutant_to_json(m));
  return to_jsonl(rows);
}

}  // namespace specprobe
