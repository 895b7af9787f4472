#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "specprobe/error.hpp"
#include "specprobe/sandbox.hpp"
#include "specprobe/types.hpp"
#include "specprobe/util.hpp"

namespace specprobe {

// ---------------------------------------------------------------------------
// Pass@1

/// Exact passes/n with the raw counts kept for rendering and oracles.
struct PassRate {
  std::size_t passes = 0;
  std::size_t n = 0;
  double value() const { return n ? double(passes) / double(n) : 0.0; }
  double percent() const { return value() * 100.0; }
};

inline PassRate pass_at_1(const std::vector<ExecutionOutcome>& outcomes) {
  if (outcomes.empty()) throw Error(ErrorKind::EmptyInput, "pass_at_1 over no outcomes");
  std::set<std::string> seen;
  PassRate r;
  for (const auto& o : outcomes) {
    if (!seen.insert(o.task_id).second)
      throw Error(ErrorKind::DuplicateTask, "duplicate outcome for task " + o.task_id, {{"task_id", o.task_id}});
    r.passes += o.passed ? 1 : 0;
    ++r.n;
  }
  return r;
}

/// (orig - mutated) in percentage points; positive means a drop.
inline double delta_pp(double orig, double mutated) { return (orig - mutated) * 100.0; }

inline double relative_drop(double orig, double mutated) {
  if (orig == 0.0) throw Error(ErrorKind::ZeroBaseline, "relative drop against a zero baseline");
  return (orig - mutated) / orig * 100.0;
}

// ---------------------------------------------------------------------------
// confusion matrices

template <std::size_t K>
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, K>, K> counts{};  // rows = true, columns = predicted

  std::int64_t total() const {
    std::int64_t s = 0;
    for (const auto& row : counts)
      for (auto c : row) s += c;
    return s;
  }
  std::int64_t trace() const {
    std::int64_t s = 0;
    for (std::size_t k = 0; k < K; ++k) s += counts[k][k];
    return s;
  }
  std::int64_t true_count(std::size_t k) const {
    std::int64_t s = 0;
    for (auto c : counts[k]) s += c;
    return s;
  }
  std::int64_t predicted_count(std::size_t k) const {
    std::int64_t s = 0;
    for (const auto& row : counts) s += row[k];
    return s;
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) counts[i][j] += o.counts[i][j];
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

using LabelMatrix = ConfusionMatrix<kLabels.size()>;

inline LabelMatrix confusion(const std::vector<std::pair<DefectType, DefectType>>& pairs) {
  LabelMatrix m;
  for (const auto& [t, p] : pairs) ++m.counts[label_index(t)][label_index(p)];
  return m;
}

/// Gorodkin's R_K. The covariance terms are exact integers; only the final
/// ratio is floating point.
template <std::size_t K>
double mcc(const ConfusionMatrix<K>& m) {
  const auto s = m.total();
  if (s <= 0) throw Error(ErrorKind::EmptyMatrix, "MCC of an empty confusion matrix");
  const auto c = m.trace();
  __int128 pt = 0, pp = 0, tt = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const __int128 p = m.predicted_count(k), t = m.true_count(k);
    pt += p * t;
    pp += p * p;
    tt += t * t;
  }
  const __int128 s2 = __int128(s) * s;
  const __int128 num = __int128(c) * s - pt;
  const __int128 a = s2 - pp, b = s2 - tt;
  if (a == 0 || b == 0) return 0.0;
  return static_cast<double>(num) / (std::sqrt(static_cast<double>(a)) * std::sqrt(static_cast<double>(b)));
}

struct DetectorMetrics {
  double accuracy = 0, macro_precision = 0, macro_recall = 0, macro_f1 = 0, mcc = 0;

  DetectorMetrics& operator+=(const DetectorMetrics& o) {
    accuracy += o.accuracy;
    macro_precision += o.macro_precision;
    macro_recall += o.macro_recall;
    macro_f1 += o.macro_f1;
    mcc += o.mcc;
    return *this;
  }
};

inline Json metrics_to_json(const DetectorMetrics& d) {
  return {{"accuracy", d.accuracy},
          {"macro_precision", d.macro_precision},
          {"macro_recall", d.macro_recall},
          {"macro_f1", d.macro_f1},
          {"mcc", d.mcc}};
}

inline DetectorMetrics metrics_from_json(const Json& j) {
  return {j.at("accuracy").get<double>(), j.at("macro_precision").get<double>(), j.at("macro_recall").get<double>(),
          j.at("macro_f1").get<double>(), j.at("mcc").get<double>()};
}

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0;
};

template <std::size_t K>
ClassScores class_scores(const ConfusionMatrix<K>& m, std::size_t k) {
  const auto tp = double(m.counts[k][k]);
  const auto pred = double(m.predicted_count(k));
  const auto truth = double(m.true_count(k));
  ClassScores s;
  s.precision = pred > 0 ? tp / pred : 0.0;
  s.recall = truth > 0 ? tp / truth : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

template <std::size_t K>
DetectorMetrics macro_scores(const ConfusionMatrix<K>& m) {
  const auto total = m.total();
  if (total <= 0) throw Error(ErrorKind::EmptyMatrix, "metrics of an empty confusion matrix");
  DetectorMetrics d;
  for (std::size_t k = 0; k < K; ++k) {
    const auto s = class_scores(m, k);
    d.macro_precision += s.precision;
    d.macro_recall += s.recall;
    d.macro_f1 += s.f1;
  }
  d.macro_precision /= double(K);
  d.macro_recall /= double(K);
  d.macro_f1 /= double(K);
  d.accuracy = double(m.trace()) / double(total);
  d.mcc = mcc(m);
  return d;
}

/// Mean of per-seed metrics.
inline DetectorMetrics mean_metrics(const std::vector<DetectorMetrics>& runs) {
  if (runs.empty()) throw Error(ErrorKind::EmptyInput, "mean over no detector runs");
  DetectorMetrics d;
  for (const auto& r : runs) d += r;
  const auto n = double(runs.size());
  d.accuracy /= n;
  d.macro_precision /= n;
  d.macro_recall /= n;
  d.macro_f1 /= n;
  d.mcc /= n;
  return d;
}

inline std::string render_confusion(const LabelMatrix& m) {
  std::string out = fmt::format("{:>8}", "true\\pred");
  for (auto l : kLabels) out += fmt::format(" {:>6}", to_string(l));
  out += '\n';
  for (std::size_t i = 0; i < kLabels.size(); ++i) {
    out += fmt::format("{:>9}", to_string(kLabels[i]));
    for (std::size_t j = 0; j < kLabels.size(); ++j) out += fmt::format(" {:>6}", m.counts[i][j]);
    out += '\n';
  }
  return out;
}

inline Json confusion_to_json(const LabelMatrix& m) {
  Json labels = Json::array();
  for (auto l : kLabels) labels.push_back(to_string(l));
  Json rows = Json::array();
  for (const auto& r : m.counts) rows.push_back(r);
  return {{"labels", labels}, {"counts", rows}};
}

// ---------------------------------------------------------------------------
// specificity on clean inputs

struct SpecificityRow {
  std::size_t total = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::map<DefectType, std::size_t> fp_by_type;

  double specificity() const { return total ? double(tn) / double(total) : 0.0; }
  double fp_rate() const { return total ? double(fp) / double(total) : 0.0; }
};

struct SpecificityReport {
  std::vector<std::pair<Benchmark, SpecificityRow>> rows;  // benchmark order, empty groups omitted
  SpecificityRow total;
};

inline SpecificityReport specificity_report(const std::vector<DefectType>& predicted,
                                            const std::vector<Benchmark>& groups) {
  if (predicted.size() != groups.size())
    throw Error(ErrorKind::PreconditionViolation, "predictions and groups differ in length");
  std::map<Benchmark, SpecificityRow> by;
  auto add = [](SpecificityRow& r, DefectType p) {
    ++r.total;
    if (p == DefectType::Clean) {
      ++r.tn;
    } else {
      ++r.fp;
      ++r.fp_by_type[p];
    }
  };
  SpecificityReport rep;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    add(by[groups[i]], predicted[i]);
    add(rep.total, predicted[i]);
  }
  for (auto b : kBenchmarks)
    if (auto it = by.find(b); it != by.end() && it->second.total > 0) rep.rows.emplace_back(b, it->second);
  return rep;
}

// ---------------------------------------------------------------------------
// robustness cells

struct RobustnessCell {
  std::string model;
  Benchmark benchmark = Benchmark::HumanEval;
  DefectType condition = DefectType::Clean;
  PassRate rate;
};

inline Json robustness_cell_to_json(const RobustnessCell& c) {
  return {{"model", c.model},
          {"benchmark", to_string(c.benchmark)},
          {"condition", to_string(c.condition)},
          {"n", c.rate.n},
          {"passes", c.rate.passes},
          {"pass_at_1", c.rate.value()}};
}

inline RobustnessCell robustness_cell_from_json(const Json& j) {
  RobustnessCell c;
  c.model = j.at("model").get<std::string>();
  c.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
  c.condition = parse_defect_type(j.at("condition").get<std::string>());
  c.rate.n = j.at("n").get<std::size_t>();
  c.rate.passes = j.at("passes").get<std::size_t>();
  return c;
}

/// Groups outcomes by (model, benchmark, condition). Benchmark membership is
/// resolved through `benchmark_of` (task id -> benchmark).
inline std::vector<RobustnessCell> robustness_cells(const std::vector<ExecutionOutcome>& outcomes,
                                                    const std::map<std::string, Benchmark>& benchmark_of) {
  std::map<std::tuple<std::string, Benchmark, DefectType>, std::vector<ExecutionOutcome>> groups;
  for (const auto& o : outcomes) {
    const auto it = benchmark_of.find(o.task_id);
    if (it == benchmark_of.end())
      throw Error(ErrorKind::PreconditionViolation, "outcome for unknown task " + o.task_id);
    groups[{o.model, it->second, o.condition}].push_back(o);
  }
  std::vector<RobustnessCell> cells;
  for (const auto& [key, group] : groups) {
    const auto& [model, bench, cond] = key;
    cells.push_back({model, bench, cond, pass_at_1(group)});
  }
  return cells;
}

}  // namespace specprobe
