#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specprobe/corpus.hpp"
#include "specprobe/judge.hpp"
#include "specprobe/mutant.hpp"

namespace specprobe {

struct LabeledExample {
  std::string id;
  std::string text;
  DefectType label = DefectType::Clean;
  Benchmark benchmark = Benchmark::HumanEval;

  /// Task the example derives from ("task#TYPE" ids map back to "task").
  std::string task_id() const { return id.substr(0, id.find('#')); }
  bool operator==(const LabeledExample&) const = default;
};

inline Json example_to_json(const LabeledExample& e) {
  return {{"id", e.id}, {"text", e.text}, {"label", to_string(e.label)}, {"benchmark", to_string(e.benchmark)}};
}

inline LabeledExample example_from_json(const Json& j, std::size_t line = 0) {
  try {
    return {j.at("id").get<std::string>(), j.at("text").get<std::string>(),
            parse_defect_type(j.at("label").get<std::string>()), parse_benchmark(j.at("benchmark").get<std::string>())};
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("dataset record: ") + e.what(), {{"line", line}});
  }
}

inline std::vector<LabeledExample> load_examples(const std::filesystem::path& path) {
  std::vector<LabeledExample> out;
  for (const auto& r : read_jsonl(path)) out.push_back(example_from_json(r.value, r.line_no));
  return out;
}

inline std::string examples_to_jsonl(const std::vector<LabeledExample>& xs) {
  std::vector<Json> rows;
  for (const auto& x : xs) rows.push_back(example_to_json(x));
  return to_jsonl(rows);
}

struct AssembleOptions {
  bool require_compliance = true;
  double imbalance_warning_ratio = 0.5;  // warn when the smallest class is below this share of the largest
};

struct AssembleResult {
  std::vector<LabeledExample> examples;
  std::map<DefectType, std::size_t> counts;
  std::size_t filtered_out = 0;
  std::vector<std::string> warnings;
};

/// Originals become CLEAN examples, mutants keep their defect label. With
/// `require_compliance`, a mutant needs a compliance verdict of 1.
inline AssembleResult assemble(const std::vector<TaskSet>& corpora, const std::vector<Mutant>& mutants,
                               const std::vector<Verdict>& verdicts, const AssembleOptions& opt = {}) {
  std::map<std::string, const Task*> tasks;
  AssembleResult r;
  for (const auto& c : corpora)
    for (const auto& t : c) {
      if (!tasks.emplace(t.id, &t).second)
        throw Error(ErrorKind::DuplicateTask, "task " + t.id + " appears in two corpora", {{"task_id", t.id}});
      r.examples.push_back({t.id, t.description, DefectType::Clean, t.benchmark});
    }

  std::set<std::string> compliant;
  for (const auto& v : verdicts)
    if (v.criterion != Criterion::Naturalness && v.score == 1)
      compliant.insert(v.task_id + "#" + std::string(to_string(v.defect_type)));

  std::set<std::string> seen;
  for (const auto& m : mutants) {
    const auto it = tasks.find(m.task_id);
    if (it == tasks.end())
      throw Error(ErrorKind::DanglingMutant, "mutant references unknown task " + m.task_id, {{"task_id", m.task_id}});
    const auto key = m.key();
    if (!seen.insert(key).second) throw Error(ErrorKind::DuplicateTask, "duplicate mutant " + key, {{"id", key}});
    if (opt.require_compliance && !compliant.count(key)) {
      ++r.filtered_out;
      continue;
    }
    r.examples.push_back({key, m.description, m.defect_type, it->second->benchmark});
  }

  for (auto l : kLabels) r.counts[l] = 0;
  for (const auto& e : r.examples) ++r.counts[e.label];
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [l, n] : r.counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (hi > 0 && double(lo) < opt.imbalance_warning_ratio * double(hi)) {
    std::string detail;
    for (const auto& [l, n] : r.counts) detail += fmt::format(" {}={}", to_string(l), n);
    r.warnings.push_back("class imbalance:" + detail);
  }
  return r;
}

// ---------------------------------------------------------------------------
// splitting

struct SplitSpec {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 42;
  bool group_by_task = false;
};

inline constexpr std::array<std::string_view, 3> kSplitNames = {"train", "val", "test"};

struct Split {
  std::array<std::vector<LabeledExample>, 3> parts;
  const std::vector<LabeledExample>& train() const { return parts[0]; }
  const std::vector<LabeledExample>& val() const { return parts[1]; }
  const std::vector<LabeledExample>& test() const { return parts[2]; }
};

inline void validate_split_spec(const SplitSpec& s) {
  double sum = 0;
  for (double r : s.ratios) {
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidSplitSpec, "split ratios must be positive");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::InvalidSplitSpec, fmt::format("split ratios sum to {}, expected 1", sum));
}

/// Largest-remainder apportionment of n items over the ratios; ties go to the
/// earlier split.
inline std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> out{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double q = ratios[i] * double(n);
    out[i] = static_cast<std::size_t>(std::floor(q + 1e-9));
    rem[i] = q - double(out[i]);
    used += out[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++out[order[k % 3]];
  while (used > n) {  // only reachable through the epsilon above
    for (auto i = order.rbegin(); i != order.rend() && used > n; ++i)
      if (out[*i] > 0) {
        --out[*i];
        --used;
      }
  }
  return out;
}

/// Per-label seeded shuffle with largest-remainder allocation. With
/// `group_by_task`, whole task groups (original plus its mutants) are
/// allocated instead, which keeps them in one split but only approximately
/// preserves per-label proportions.
inline Split stratified_split(const std::vector<LabeledExample>& examples, const SplitSpec& spec) {
  validate_split_spec(spec);
  std::vector<int> assign(examples.size(), -1);

  if (!spec.group_by_task) {
    std::map<DefectType, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < examples.size(); ++i) by_label[examples[i].label].push_back(i);
    for (auto& [label, idx] : by_label) {
      if (idx.size() < 3)
        throw Error(ErrorKind::ClassTooSmall,
                    fmt::format("class {} has {} examples, need at least 3", to_string(label), idx.size()),
                    {{"label", std::string(to_string(label))}});
      Rng rng(mix_seed(spec.seed, to_string(label)));
      rng.shuffle(idx);
      const auto sizes = apportion(idx.size(), spec.ratios);
      std::size_t pos = 0;
      for (int s = 0; s < 3; ++s)
        for (std::size_t k = 0; k < sizes[s]; ++k) assign[idx[pos++]] = s;
    }
  } else {
    std::map<DefectType, std::size_t> label_counts;
    for (const auto& e : examples) ++label_counts[e.label];
    for (const auto& [label, n] : label_counts)
      if (n < 3)
        throw Error(ErrorKind::ClassTooSmall,
                    fmt::format("class {} has {} examples, need at least 3", to_string(label), n),
                    {{"label", std::string(to_string(label))}});
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto [it, fresh] = groups.try_emplace(examples[i].task_id());
      if (fresh) order.push_back(it->first);
      it->second.push_back(i);
    }
    Rng rng(mix_seed(spec.seed, "groups"));
    rng.shuffle(order);
    const auto sizes = apportion(order.size(), spec.ratios);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < sizes[s]; ++k)
        for (auto i : groups[order[pos++]]) assign[i] = s;
  }

  Split out;
  for (std::size_t i = 0; i < examples.size(); ++i) out.parts[static_cast<std::size_t>(assign[i])].push_back(examples[i]);
  return out;
}

inline Json split_manifest(const Split& s, const SplitSpec& spec) {
  Json j{{"seed", spec.seed}, {"ratios", spec.ratios}, {"group_by_task", spec.group_by_task}};
  for (std::size_t k = 0; k < 3; ++k) {
    Json ids = Json::array();
    for (const auto& e : s.parts[k]) ids.push_back(e.id);
    j[std::string(kSplitNames[k])] = ids;
  }
  return j;
}

// ---------------------------------------------------------------------------
// review sampling

struct ReviewItem {
  Benchmark benchmark;
  Mutant mutant;
  std::string original;
};

struct ReviewSample {
  std::vector<ReviewItem> items;
  std::map<std::pair<Benchmark, DefectType>, std::size_t> per_cell;
};

/// Equal-as-possible quotas over cells: cells smaller than the fair share are
/// taken whole and the rest is re-divided; leftover units go to cells in
/// seeded order.
inline std::vector<std::size_t> water_fill(const std::vector<std::size_t>& capacity, std::size_t n, Rng& rng) {
  std::vector<std::size_t> quota(capacity.size(), 0);
  std::vector<std::size_t> active(capacity.size());
  std::iota(active.begin(), active.end(), 0);
  std::size_t remaining = n;
  for (;;) {
    if (active.empty() || remaining == 0) break;
    const auto share = remaining / active.size();
    std::vector<std::size_t> still;
    for (auto c : active) {
      if (capacity[c] <= share) {
        quota[c] = capacity[c];
        remaining -= capacity[c];
      } else {
        still.push_back(c);
      }
    }
    if (still.size() == active.size()) {
      for (auto c : active) quota[c] = share;
      remaining -= share * active.size();
      rng.shuffle(active);
      for (std::size_t k = 0; k < remaining; ++k) ++quota[active[k]];
      remaining = 0;
      break;
    }
    active = std::move(still);
  }
  return quota;
}

inline ReviewSample sample_for_review(const std::vector<Mutant>& mutants, const std::vector<TaskSet>& corpora,
                                      std::size_t n, std::uint64_t seed) {
  if (n > mutants.size())
    throw Error(ErrorKind::InsufficientMutants, fmt::format("asked for {} review items from {} mutants", n, mutants.size()));
  std::map<std::string, const Task*> tasks;
  for (const auto& c : corpora)
    for (const auto& t : c) tasks[t.id] = &t;

  std::map<std::pair<Benchmark, DefectType>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < mutants.size(); ++i) {
    const auto it = tasks.find(mutants[i].task_id);
    if (it == tasks.end())
      throw Error(ErrorKind::DanglingMutant, "mutant references unknown task " + mutants[i].task_id,
                  {{"task_id", mutants[i].task_id}});
    cells[{it->second->benchmark, mutants[i].defect_type}].push_back(i);
  }
  std::vector<std::pair<Benchmark, DefectType>> keys;
  std::vector<std::size_t> capacity;
  for (const auto& [k, v] : cells) {
    keys.push_back(k);
    capacity.push_back(v.size());
  }
  Rng rng(mix_seed(seed, "review"));
  const auto quota = water_fill(capacity, n, rng);

  ReviewSample s;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    auto idx = cells[keys[c]];
    Rng cell_rng(mix_seed(seed, fmt::format("{}#{}", to_string(keys[c].first), to_string(keys[c].second))));
    cell_rng.shuffle(idx);
    idx.resize(quota[c]);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) s.items.push_back({keys[c].first, mutants[i], tasks[mutants[i].task_id]->description});
    s.per_cell[keys[c]] = quota[c];
  }
  return s;
}

inline std::string render_review_sheet(const ReviewSample& s) {
  std::string out = fmt::format("Review sample: {} mutants\n", s.items.size());
  for (const auto& [k, n] : s.per_cell) out += fmt::format("  {} {}: {}\n", to_string(k.first), to_string(k.second), n);
  for (std::size_t i = 0; i < s.items.size(); ++i) {
    const auto& it = s.items[i];
    out += fmt::format("\n==== [{}] {} ({}, {})\n", i + 1, it.mutant.key(), to_string(it.benchmark),
                       to_string(it.mutant.defect_type));
    out += "---- original ----\n" + it.original;
    if (!it.original.empty() && it.original.back() != '\n') out += '\n';
    out += "---- defective ----\n" + it.mutant.description;
    if (!it.mutant.description.empty() && it.mutant.description.back() != '\n') out += '\n';
    out += "compliant: [ ]   natural: [ ]\n";
  }
  return out;
}

}  // namespace specprobe
