#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specprobe/detector.hpp"
#include "specprobe/judge.hpp"
#include "specprobe/metrics.hpp"

namespace specprobe {

inline constexpr std::array<DefectType, 3> kTableMutations = {DefectType::US, DefectType::LV, DefectType::SF};

/// Delta annotation at one decimal: "↓x" for a drop, "↑x" for a gain, "=" when
/// the rounded delta is zero.
inline std::string render_delta(double delta) {
  const double r = std::round(delta * 10.0) / 10.0;
  if (std::fabs(r) < 0.05) return "=";
  return (r > 0 ? "↓" : "↑") + fixed(std::fabs(r), 1);
}

inline std::string render_percent(double fraction, int decimals = 1) { return fixed(fraction * 100.0, decimals); }

// ---------------------------------------------------------------------------
// robustness table

struct RobustnessEntry {
  PassRate rate;
  std::optional<double> delta;  // percentage points against Orig; absent for Orig itself
};

struct RobustnessRow {
  std::string model;
  Benchmark benchmark;
  std::optional<RobustnessEntry> orig;
  std::map<DefectType, RobustnessEntry> mutated;
};

struct RobustnessTable {
  std::vector<RobustnessRow> rows;  // model order of first appearance, then benchmark order
};

inline RobustnessTable emit_robustness(const std::vector<RobustnessCell>& cells) {
  std::vector<std::string> models;
  std::map<std::pair<std::string, Benchmark>, RobustnessRow> rows;
  for (const auto& c : cells) {
    if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
    auto& row = rows[{c.model, c.benchmark}];
    row.model = c.model;
    row.benchmark = c.benchmark;
    if (c.condition == DefectType::Clean) {
      if (row.orig) throw Error(ErrorKind::DuplicateTask, "two Orig cells for " + c.model);
      row.orig = RobustnessEntry{c.rate, std::nullopt};
    } else {
      if (!row.mutated.emplace(c.condition, RobustnessEntry{c.rate, std::nullopt}).second)
        throw Error(ErrorKind::DuplicateTask,
                    fmt::format("two {} cells for {} on {}", to_string(c.condition), c.model, to_string(c.benchmark)));
    }
  }
  RobustnessTable t;
  for (const auto& m : models)
    for (auto b : kBenchmarks) {
      const auto it = rows.find({m, b});
      if (it == rows.end()) continue;
      auto row = it->second;
      if (!row.mutated.empty() && !row.orig)
        throw Error(ErrorKind::MissingBaseline,
                    fmt::format("no Orig cell for {} on {}", row.model, to_string(row.benchmark)),
                    {{"model", row.model}, {"benchmark", std::string(to_string(row.benchmark))}});
      for (auto& [d, e] : row.mutated) e.delta = delta_pp(row.orig->rate.value(), e.rate.value());
      t.rows.push_back(std::move(row));
    }
  return t;
}

inline std::string render_entry(const RobustnessEntry& e) {
  auto s = render_percent(e.rate.value());
  if (e.delta) s += " " + render_delta(*e.delta);
  return s;
}

inline std::string render_robustness_csv(const RobustnessTable& t) {
  std::string out = "Model,Benchmark,Condition,N,Passes,Pass@1,Delta,Annotation\n";
  for (const auto& r : t.rows) {
    auto line = [&](std::string_view cond, const RobustnessEntry& e) {
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.model, to_string(r.benchmark), cond, e.rate.n, e.rate.passes,
                         render_percent(e.rate.value()), e.delta ? fixed(*e.delta, 1) : "",
                         e.delta ? render_delta(*e.delta) : "");
    };
    if (r.orig) line("Orig", *r.orig);
    for (auto d : kTableMutations)
      if (auto it = r.mutated.find(d); it != r.mutated.end()) line(to_string(d), it->second);
  }
  return out;
}

inline std::string render_robustness_text(const RobustnessTable& t) {
  std::string out = fmt::format("{:<24} {:<14} {:>6} {:>14} {:>14} {:>14}\n", "Model", "Benchmark", "Orig", "US", "LV", "SF");
  for (const auto& r : t.rows) {
    out += fmt::format("{:<24} {:<14} {:>6}", r.model, to_string(r.benchmark), r.orig ? render_entry(*r.orig) : "-");
    for (auto d : kTableMutations) {
      const auto it = r.mutated.find(d);
      // the arrows are 3 bytes wide in UTF-8 but one column on screen
      const auto cell = it == r.mutated.end() ? std::string("-") : render_entry(it->second);
      const auto extra = cell.find("↓") != std::string::npos || cell.find("↑") != std::string::npos ? 2 : 0;
      out += fmt::format(" {:>{}}", cell, 14 + extra);
    }
    out += '\n';
  }
  return out;
}

inline Json robustness_to_json(const RobustnessTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json row{{"model", r.model}, {"benchmark", to_string(r.benchmark)}};
    auto entry = [](const RobustnessEntry& e) {
      Json j{{"n", e.rate.n}, {"passes", e.rate.passes}, {"pass_at_1", e.rate.value()},
             {"rendered", render_entry(e)}};
      if (e.delta) {
        j["delta_pp"] = *e.delta;
        j["annotation"] = render_delta(*e.delta);
      }
      return j;
    };
    if (r.orig) row["Orig"] = entry(*r.orig);
    for (const auto& [d, e] : r.mutated) row[std::string(to_string(d))] = entry(e);
    rows.push_back(row);
  }
  return {{"rows", rows}};
}

// ---------------------------------------------------------------------------
// relative-drop heatmap

struct HeatmapRow {
  std::string model;
  Benchmark benchmark;
  std::map<DefectType, double> drop;  // percent
};

inline std::vector<HeatmapRow> emit_heatmap(const RobustnessTable& t) {
  std::vector<HeatmapRow> out;
  for (const auto& r : t.rows) {
    if (!r.orig) continue;
    HeatmapRow h{r.model, r.benchmark, {}};
    for (const auto& [d, e] : r.mutated) h.drop[d] = relative_drop(r.orig->rate.value(), e.rate.value());
    out.push_back(std::move(h));
  }
  return out;
}

inline std::string render_heatmap_csv(const std::vector<HeatmapRow>& rows) {
  std::string out = "Model,Benchmark,US,LV,SF\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{}", r.model, to_string(r.benchmark));
    for (auto d : kTableMutations) {
      const auto it = r.drop.find(d);
      out += "," + (it == r.drop.end() ? std::string() : fixed(it->second, 1));
    }
    out += '\n';
  }
  return out;
}

inline std::string render_heatmap_text(const std::vector<HeatmapRow>& rows) {
  std::string out = fmt::format("{:<24} {:<14} {:>7} {:>7} {:>7}\n", "Model", "Benchmark", "US", "LV", "SF");
  for (const auto& r : rows) {
    out += fmt::format("{:<24} {:<14}", r.model, to_string(r.benchmark));
    for (auto d : kTableMutations) {
      const auto it = r.drop.find(d);
      out += fmt::format(" {:>7}", it == r.drop.end() ? std::string("-") : fixed(it->second, 1));
    }
    out += '\n';
  }
  return out;
}

inline Json heatmap_to_json(const std::vector<HeatmapRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j{{"model", r.model}, {"benchmark", to_string(r.benchmark)}};
    for (const auto& [d, v] : r.drop) j[std::string(to_string(d))] = v;
    out.push_back(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// detector table

struct DetectorRow {
  std::string backend;
  DetectorMetrics metrics;
  std::size_t seeds = 1;
  std::optional<LabelMatrix> matrix;
};

inline std::string render_detector_csv(const std::vector<DetectorRow>& rows) {
  std::string out = "Backend,Accuracy,Precision,Recall,F1,MCC\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{}\n", r.backend, fixed(r.metrics.accuracy, 3), fixed(r.metrics.macro_precision, 3),
                       fixed(r.metrics.macro_recall, 3), fixed(r.metrics.macro_f1, 3), fixed(r.metrics.mcc, 3));
  return out;
}

inline std::string render_detector_text(const std::vector<DetectorRow>& rows) {
  std::string out = fmt::format("{:<32} {:>8} {:>9} {:>6} {:>6} {:>6}\n", "Backend", "Accuracy", "Precision", "Recall",
                                "F1", "MCC");
  for (const auto& r : rows) {
    out += fmt::format("{:<32} {:>8} {:>9} {:>6} {:>6} {:>6}\n", r.backend, fixed(r.metrics.accuracy, 3),
                       fixed(r.metrics.macro_precision, 3), fixed(r.metrics.macro_recall, 3),
                       fixed(r.metrics.macro_f1, 3), fixed(r.metrics.mcc, 3));
    if (r.matrix) out += render_confusion(*r.matrix);
  }
  return out;
}

inline Json detector_to_json(const std::vector<DetectorRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j = metrics_to_json(r.metrics);
    j["backend"] = r.backend;
    j["seeds"] = r.seeds;
    if (r.matrix) j["confusion"] = confusion_to_json(*r.matrix);
    out.push_back(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// clean-flagging tables

inline std::string render_specificity_csv(const SpecificityReport& r) {
  std::string out = "Dataset,Total,TN,FP,Specificity,FP rate\n";
  auto line = [&](std::string_view name, const SpecificityRow& row) {
    out += fmt::format("{},{},{},{},{}%,{}%\n", name, row.total, row.tn, row.fp, render_percent(row.specificity()),
                       render_percent(row.fp_rate()));
  };
  for (const auto& [b, row] : r.rows) line(to_string(b), row);
  line("Total", r.total);
  return out;
}

inline std::string render_specificity_text(const SpecificityReport& r) {
  std::string out = fmt::format("{:<14} {:>6} {:>6} {:>6} {:>12} {:>8}\n", "Dataset", "Total", "TN", "FP",
                                "Specificity", "FP rate");
  auto line = [&](std::string_view name, const SpecificityRow& row) {
    out += fmt::format("{:<14} {:>6} {:>6} {:>6} {:>11}% {:>7}%\n", name, row.total, row.tn, row.fp,
                       render_percent(row.specificity()), render_percent(row.fp_rate()));
  };
  for (const auto& [b, row] : r.rows) line(to_string(b), row);
  line("Total", r.total);
  return out;
}

struct FlagModelRow {
  std::string model;
  std::size_t n = 0, f = 0;
  std::size_t p() const { return n - f; }
  double fail_percent() const { return n ? 100.0 * double(f) / double(n) : 0.0; }
};

struct FlagAggregate {
  std::size_t n = 0;           // flagged samples with at least one outcome
  std::size_t f = 0;           // of which fail on at least one model
  std::size_t failures = 0;    // total (sample, model) failures
  std::size_t models = 0;
  std::size_t p() const { return n - f; }
  double fail_percent() const { return n ? 100.0 * double(f) / double(n) : 0.0; }
  /// Mean number of failing models over the samples that fail at all.
  double mean_failing_models() const { return f ? double(failures) / double(f) : 0.0; }
};

struct FlagBenchmarkSection {
  Benchmark benchmark;
  std::vector<FlagModelRow> models;  // sorted by F descending, ties in first-seen order
  FlagAggregate aggregate;
};

struct FlaggedAnalysis {
  SpecificityReport table5;
  std::vector<FlagBenchmarkSection> table6;
};

/// Joins flagged ids with CLEAN-condition outcomes.
inline FlaggedAnalysis emit_flagged_analysis(const FlagReport& flags, const std::vector<ExecutionOutcome>& outcomes) {
  FlaggedAnalysis a;
  a.table5 = flags.specificity;
  std::map<std::string, Benchmark> flagged;
  for (std::size_t i = 0; i < flags.predictions.size(); ++i)
    if (flags.predictions[i].label != DefectType::Clean) flagged[flags.predictions[i].description_id] = flags.groups[i];

  std::vector<std::string> model_order;
  // (benchmark, task) -> model -> passed
  std::map<Benchmark, std::map<std::string, std::map<std::string, bool>>> grid;
  for (const auto& o : outcomes) {
    if (o.condition != DefectType::Clean) continue;
    const auto it = flagged.find(o.task_id);
    if (it == flagged.end()) continue;
    if (std::find(model_order.begin(), model_order.end(), o.model) == model_order.end()) model_order.push_back(o.model);
    grid[it->second][o.task_id][o.model] = o.passed;
  }
  for (auto b : kBenchmarks) {
    const auto g = grid.find(b);
    if (g == grid.end()) continue;
    FlagBenchmarkSection s{b, {}, {}};
    std::set<std::string> models_here;
    for (const auto& m : model_order) {
      FlagModelRow row{m};
      for (const auto& [task, by_model] : g->second)
        if (auto it = by_model.find(m); it != by_model.end()) {
          ++row.n;
          row.f += it->second ? 0 : 1;
        }
      if (row.n) {
        s.models.push_back(row);
        models_here.insert(m);
      }
    }
    std::stable_sort(s.models.begin(), s.models.end(), [](const auto& x, const auto& y) { return x.f > y.f; });
    s.aggregate.models = models_here.size();
    for (const auto& [task, by_model] : g->second) {
      std::size_t fails = 0;
      for (const auto& [m, passed] : by_model) fails += passed ? 0 : 1;
      ++s.aggregate.n;
      s.aggregate.failures += fails;
      if (fails) ++s.aggregate.f;
    }
    a.table6.push_back(std::move(s));
  }
  return a;
}

inline std::string aggregate_label(const FlagAggregate& g) {
  return fmt::format("Misclassified (Fail on avg {}/{} models)", fixed(g.mean_failing_models(), 1), g.models);
}

inline std::string render_table6_csv(const FlaggedAnalysis& a) {
  std::string out = "Benchmark,Model,N,F,P,%F\n";
  for (const auto& s : a.table6) {
    for (const auto& m : s.models)
      out += fmt::format("{},{},{},{},{},{}\n", to_string(s.benchmark), m.model, m.n, m.f, m.p(),
                         fixed(m.fail_percent(), 1));
    out += fmt::format("{},{},{},{},{},{}\n", to_string(s.benchmark), aggregate_label(s.aggregate), s.aggregate.n,
                       s.aggregate.f, s.aggregate.p(), fixed(s.aggregate.fail_percent(), 1));
  }
  return out;
}

inline std::string render_table6_text(const FlaggedAnalysis& a) {
  std::string out;
  for (const auto& s : a.table6) {
    out += fmt::format("{}\n{:<44} {:>4} {:>4} {:>4} {:>6}\n", to_string(s.benchmark), "Model", "N", "F", "P", "%F");
    for (const auto& m : s.models)
      out += fmt::format("{:<44} {:>4} {:>4} {:>4} {:>6}\n", m.model, m.n, m.f, m.p(), fixed(m.fail_percent(), 1));
    out += fmt::format("{:<44} {:>4} {:>4} {:>4} {:>6}\n\n", aggregate_label(s.aggregate), s.aggregate.n, s.aggregate.f,
                       s.aggregate.p(), fixed(s.aggregate.fail_percent(), 1));
  }
  return out;
}

inline Json flagged_to_json(const FlaggedAnalysis& a) {
  Json t5 = Json::object();
  for (const auto& [b, row] : a.table5.rows) t5[std::string(to_string(b))] = specificity_row_to_json(row);
  t5["Total"] = specificity_row_to_json(a.table5.total);
  Json t6 = Json::array();
  for (const auto& s : a.table6) {
    Json models = Json::array();
    for (const auto& m : s.models)
      models.push_back({{"model", m.model}, {"n", m.n}, {"f", m.f}, {"p", m.p()}, {"fail_percent", m.fail_percent()}});
    t6.push_back({{"benchmark", to_string(s.benchmark)},
                  {"models", models},
                  {"aggregate",
                   {{"n", s.aggregate.n},
                    {"f", s.aggregate.f},
                    {"p", s.aggregate.p()},
                    {"fail_percent", s.aggregate.fail_percent()},
                    {"mean_failing_models", s.aggregate.mean_failing_models()},
                    {"models", s.aggregate.models},
                    {"label", aggregate_label(s.aggregate)}}}});
  }
  return {{"table5", t5}, {"table6", t6}};
}

}  // namespace specprobe
