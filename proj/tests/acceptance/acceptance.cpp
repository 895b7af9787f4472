// Acceptance checks. Each criterion prints one "PASS name: ..." or
// "FAIL name: ..." line. With no argument every criterion runs.
//
//   acceptance [criterion]

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>

#include "specprobe/corpus_import.hpp"
#include "specprobe/dataset.hpp"
#include "specprobe/detector.hpp"
#include "specprobe/judge.hpp"
#include "specprobe/metrics.hpp"
#include "specprobe/mutator.hpp"
#include "specprobe/report.hpp"
#include "specprobe/sandbox.hpp"

namespace fs = std::filesystem;
using namespace specprobe;

namespace {

// Tolerances and budgets.
constexpr double kMetricTolerance = 1e-12;
constexpr double kMetricsBudgetSecs = 5.0;
constexpr double kSandboxBudgetSecs = 120.0;
constexpr double kSandboxTimeoutSecs = 20.0;
constexpr double kTimeoutSlackSecs = 5.0;
constexpr double kEndToEndBudgetSecs = 180.0;
constexpr std::size_t kMetricTrials = 1000;
constexpr std::size_t kSfTriples = 500;
constexpr std::size_t kFuzzStrings = 10000;
constexpr std::size_t kSplitTrials = 300;
constexpr std::size_t kMinSandboxCorpus = 20;

const fs::path kFixtures = SPECPROBE_FIXTURES;
const fs::path kCli = SPECPROBE_CLI;

struct Outcome {
  bool ok = true;
  std::string message;
};

Outcome pass(std::string msg) { return {true, std::move(msg)}; }
Outcome fail(std::string msg) { return {false, std::move(msg)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Test-side backend answering from a fixed id -> label map.
class MapBackend : public DetectorBackend {
 public:
  explicit MapBackend(std::map<std::string, DefectType> labels) : labels_(std::move(labels)) {}
  std::string name() const override { return "fixture-map"; }
  Prediction classify(const std::string& id, std::string_view) override {
    return {id, labels_.at(id), std::nullopt, name(), {}};
  }

 private:
  std::map<std::string, DefectType> labels_;
};

// ---------------------------------------------------------------------------
// metrics oracle

/// MCC as the Pearson correlation of one-hot true and predicted vectors,
/// computed over the expanded list of (true, predicted) pairs.
template <std::size_t K>
double oracle_mcc(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const double n = double(pairs.size());
  std::array<double, K> mean_t{}, mean_p{};
  for (auto [t, p] : pairs) {
    mean_t[t] += 1.0 / n;
    mean_p[p] += 1.0 / n;
  }
  long double cov_tp = 0, cov_tt = 0, cov_pp = 0;
  for (auto [t, p] : pairs)
    for (std::size_t k = 0; k < K; ++k) {
      const long double x = (t == k ? 1.0L : 0.0L) - mean_t[k];
      const long double y = (p == k ? 1.0L : 0.0L) - mean_p[k];
      cov_tp += x * y;
      cov_tt += x * x;
      cov_pp += y * y;
    }
  if (cov_tt == 0 || cov_pp == 0) return 0.0;
  return double(cov_tp / std::sqrt(cov_tt * cov_pp));
}

struct OracleScores {
  double p = 0, r = 0, f1 = 0, acc = 0;
};

template <std::size_t K>
OracleScores oracle_macro(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  OracleScores s;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (auto [t, p] : pairs) {
      if (t == k && p == k) ++tp;
      if (t != k && p == k) ++fp;
      if (t == k && p != k) ++fn;
    }
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = tp ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
    s.p += prec / K;
    s.r += rec / K;
    s.f1 += f1 / K;
    correct += tp;
  }
  s.acc = double(correct) / double(pairs.size());
  return s;
}

template <std::size_t K>
std::vector<std::pair<std::size_t, std::size_t>> expand(const ConfusionMatrix<K>& m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j)
      for (std::int64_t c = 0; c < m.counts[i][j]; ++c) out.emplace_back(i, j);
  return out;
}

/// Random matrix, biased toward sparse rows and columns so that degenerate
/// shapes (empty classes, constant predictions) show up.
template <std::size_t K>
ConfusionMatrix<K> random_matrix(Rng& rng) {
  ConfusionMatrix<K> m;
  const auto shape = rng.below(6);
  const auto dead_row = rng.below(K), dead_col = rng.below(K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      std::int64_t v = std::int64_t(rng.below(i == j ? 60 : 25));
      if (shape == 1 && i == dead_row) v = 0;
      if (shape == 2 && j == dead_col) v = 0;
      if (shape == 3 && j != dead_col) v = 0;  // constant predictor
      if (shape == 4 && rng.below(2)) v = 0;
      m.counts[i][j] = v;
    }
  if (m.total() == 0) m.counts[0][0] = 1;
  return m;
}

Outcome metrics_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240611);
  double worst = 0;
  std::size_t binary_checks = 0;
  for (std::size_t trial = 0; trial < kMetricTrials; ++trial) {
    const auto m = random_matrix<4>(rng);
    const auto pairs = expand(m);
    const auto got = macro_scores(m);
    const auto want = oracle_macro<4>(pairs);
    const double want_mcc = oracle_mcc<4>(pairs);
    for (auto [a, b, what] : {std::tuple{got.mcc, want_mcc, "mcc"}, {got.macro_precision, want.p, "precision"},
                              {got.macro_recall, want.r, "recall"}, {got.macro_f1, want.f1, "f1"},
                              {got.accuracy, want.acc, "accuracy"}}) {
      const double err = std::fabs(a - b);
      worst = std::max(worst, err);
      if (!(err <= kMetricTolerance))
        return fail(fmt::format("trial {} {}: got {:.17g}, oracle {:.17g}", trial, what, a, b));
    }

    // Binary collapse: the 2x2 matrix, the same counts embedded in a 4x4 with
    // two empty classes, and the textbook binary formula must agree.
    ConfusionMatrix<2> b2;
    ConfusionMatrix<4> b4;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) b2.counts[i][j] = b4.counts[i][j] = m.counts[i][j] + (i == j ? 1 : 0);
    const double tp = double(b2.counts[1][1]), tn = double(b2.counts[0][0]);
    const double fp = double(b2.counts[0][1]), fn = double(b2.counts[1][0]);
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    const double textbook = den > 0 ? (tp * tn - fp * fn) / std::sqrt(den) : 0.0;
    const double m2 = mcc(b2), m4 = mcc(b4);
    if (std::fabs(m2 - textbook) > kMetricTolerance || std::fabs(m4 - m2) > kMetricTolerance)
      return fail(fmt::format("binary collapse trial {}: 2x2 {:.17g}, 4x4 {:.17g}, textbook {:.17g}", trial, m2, m4,
                              textbook));
    ++binary_checks;
  }
  const double secs = seconds_since(t0);
  if (secs >= kMetricsBudgetSecs) return fail(fmt::format("took {:.2f}s, budget {}s", secs, kMetricsBudgetSecs));
  return pass(fmt::format("{} matrices, {} binary collapses, max error {:.3g}, {:.2f}s", kMetricTrials, binary_checks,
                          worst, secs));
}

// ---------------------------------------------------------------------------
// robustness table arithmetic

std::size_t tenths(double percent) { return static_cast<std::size_t>(std::llround(percent * 10.0)); }

/// Relative drop rendered at one decimal with exact integer rounding (half
/// away from zero).
std::string exact_relative_drop(std::int64_t orig, std::int64_t mutated) {
  const std::int64_t num = (orig - mutated) * 1000;  // tenths of a percent, times orig
  const std::int64_t mag = std::llabs(num);
  const std::int64_t q = (2 * mag + orig) / (2 * orig);
  const std::int64_t signed_q = num < 0 ? -q : q;
  const std::string sign = signed_q < 0 ? "-" : "";
  return fmt::format("{}{}.{}", sign, std::llabs(signed_q) / 10, std::llabs(signed_q) % 10);
}

Outcome table3_arithmetic() {
  const auto fixture = Json::parse(read_file(kFixtures / "table3.json"));
  std::vector<RobustnessCell> cells;
  std::map<std::tuple<std::string, Benchmark, DefectType>, std::string> expected;
  std::map<std::tuple<std::string, Benchmark, DefectType>, std::pair<double, double>> printed;
  for (const auto& row : fixture.at("rows")) {
    const auto model = row.at("model").get<std::string>();
    const auto bench = parse_benchmark(row.at("benchmark").get<std::string>());
    const double orig = row.at("orig").get<double>();
    cells.push_back({model, bench, DefectType::Clean, PassRate{tenths(orig), 1000}});
    for (auto d : kTableMutations) {
      const auto& c = row.at(std::string(to_string(d)));
      const double v = c.at("value").get<double>();
      cells.push_back({model, bench, d, PassRate{tenths(v), 1000}});
      expected[{model, bench, d}] = c.at("annotation").get<std::string>();
      printed[{model, bench, d}] = {orig, v};
    }
  }
  const auto table = emit_robustness(cells);
  std::size_t matched = 0, total = 0;
  std::vector<std::string> mismatches;
  for (const auto& r : table.rows)
    for (const auto& [d, e] : r.mutated) {
      ++total;
      const auto got = render_delta(*e.delta);
      const auto& want = expected.at({r.model, r.benchmark, d});
      if (got == want) {
        ++matched;
      } else {
        const auto& [o, v] = printed.at({r.model, r.benchmark, d});
        mismatches.push_back(fmt::format("{}/{}/{} {}->{} renders {} but printed {}", r.model, to_string(r.benchmark),
                                         to_string(d), fixed(o, 1), fixed(v, 1), got, want));
      }
    }

  // Relative drops, recomputed by exact integer arithmetic.
  std::size_t drops = 0;
  std::vector<std::string> drop_mismatches;
  for (const auto& h : emit_heatmap(table))
    for (const auto& [d, v] : h.drop) {
      ++drops;
      const auto& [o, m] = printed.at({h.model, h.benchmark, d});
      const auto want = exact_relative_drop(std::int64_t(tenths(o)), std::int64_t(tenths(m)));
      auto got = fixed(v, 1);
      if (got == "-0.0") got = "0.0";
      if (got != want)
        drop_mismatches.push_back(fmt::format("{}/{}/{} drop {} vs exact {}", h.model, to_string(h.benchmark),
                                              to_string(d), got, want));
    }
  const auto spot = fixed(relative_drop(0.726, 0.573), 1);
  const auto spot_delta = render_delta(delta_pp(0.726, 0.573));

  std::string msg = fmt::format("{}/{} delta annotations reproduced, {}/{} relative drops exact, 72.6->57.3 {} ({}%)",
                                matched, total, drops - drop_mismatches.size(), drops, spot_delta, spot);
  for (const auto& m : mismatches) msg += "; mismatch: " + m;
  for (const auto& m : drop_mismatches) msg += "; " + m;
  const bool ok = total == 90 && mismatches.empty() && drop_mismatches.empty() && spot == "21.1" &&
                  spot_delta == "↓15.3";
  return {ok, msg};
}

// ---------------------------------------------------------------------------
// specificity on clean inputs

Outcome table5_specificity() {
  const std::vector<std::tuple<Benchmark, std::size_t, std::size_t>> groups = {
      {Benchmark::HumanEval, 40, 0}, {Benchmark::MBPP, 197, 33}, {Benchmark::LiveCodeBench, 219, 50}};
  std::vector<DescriptionItem> items;
  std::map<std::string, DefectType> labels;
  const std::array<DefectType, 3> flag_cycle = {DefectType::LV, DefectType::US, DefectType::SF};
  for (const auto& [b, n, flagged] : groups)
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = fmt::format("{}/{}", slug(b), i);
      items.push_back({id, "description " + id, b, DefectType::Clean});
      labels[id] = i < flagged ? flag_cycle[i % 3] : DefectType::Clean;
    }
  MapBackend backend(labels);
  const auto rep = flag_clean_set(items, backend, 2);
  std::vector<std::string> got;
  for (const auto& [b, row] : rep.specificity.rows) got.push_back(render_percent(row.specificity()));
  const auto fp_total = render_percent(rep.specificity.total.fp_rate());
  const auto spec_total = render_percent(rep.specificity.total.specificity());
  const auto csv = render_specificity_csv(rep.specificity);
  const bool ok = got == std::vector<std::string>{"100.0", "83.2", "77.2"} && fp_total == "18.2" &&
                  spec_total == "81.8" && rep.specificity.total.total == 456 && rep.flagged.size() == 83 &&
                  csv.find("83.2") != std::string::npos && csv.find("18.2") != std::string::npos;
  return {ok, fmt::format("specificity {} / {} / {}, total {} with FP rate {}% over {} descriptions",
                          got.size() > 0 ? got[0] : "?", got.size() > 1 ? got[1] : "?", got.size() > 2 ? got[2] : "?",
                          spec_total, fp_total, rep.specificity.total.total)};
}

// ---------------------------------------------------------------------------
// flagged-sample failure aggregates

struct Table6Fixture {
  Benchmark benchmark;
  std::size_t flagged;
  std::size_t failing;
  std::vector<std::pair<std::string, std::size_t>> model_failures;  // printed order
  std::string percent;
  std::string label;
};

/// Failures are laid out cyclically over the failing samples, each model
/// taking a contiguous run that starts where the previous one stopped.
void build_table6(const Table6Fixture& fx, std::vector<DescriptionItem>& items, std::map<std::string, DefectType>& labels,
                  std::vector<ExecutionOutcome>& outcomes) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < fx.flagged; ++i) {
    ids.push_back(fmt::format("{}/flagged{}", slug(fx.benchmark), i));
    items.push_back({ids.back(), "text", fx.benchmark, DefectType::Clean});
    labels[ids.back()] = DefectType::US;
  }
  // A few unflagged descriptions that must not enter the aggregate.
  for (std::size_t i = 0; i < 3; ++i) {
    const auto id = fmt::format("{}/clean{}", slug(fx.benchmark), i);
    items.push_back({id, "text", fx.benchmark, DefectType::Clean});
    labels[id] = DefectType::Clean;
    for (const auto& [model, f] : fx.model_failures) {
      ExecutionOutcome o;
      o.task_id = id;
      o.model = model;
      outcomes.push_back(o);
    }
  }
  std::size_t cursor = 0;
  for (const auto& [model, f] : fx.model_failures) {
    std::set<std::size_t> failing;
    for (std::size_t k = 0; k < f; ++k) failing.insert((cursor + k) % fx.failing);
    cursor = (cursor + f) % fx.failing;
    for (std::size_t i = 0; i < fx.flagged; ++i) {
      ExecutionOutcome o;
      o.task_id = ids[i];
      o.condition = DefectType::Clean;
      o.model = model;
      o.passed = !failing.count(i);
      o.category = o.passed ? OutcomeCategory::Pass : OutcomeCategory::WrongAnswer;
      outcomes.push_back(o);
      // A mutated-condition outcome that must be ignored.
      auto m = o;
      m.condition = DefectType::SF;
      m.passed = false;
      outcomes.push_back(m);
    }
  }
}

Outcome table6_aggregate() {
  const std::vector<Table6Fixture> fixtures = {
      {Benchmark::MBPP,
       33,
       30,
       {{"CodeLlama-34B", 25},
        {"CodeLlama-7B", 24},
        {"StarCoder2-15B", 23},
        {"DeepSeek-Coder-33B", 21},
        {"Qwen2.5-Coder-32B", 20},
        {"DeepSeek-Coder-6.7B", 20},
        {"Codestral-22B", 20},
        {"GPT-5-mini", 19},
        {"Qwen2.5-Coder-7B", 15},
        {"Claude Sonnet", 15}},
       "90.9",
       "Misclassified (Fail on avg 6.7/10 models)"},
      {Benchmark::LiveCodeBench,
       50,
       49,
       {{"StarCoder2-15B", 49},
        {"CodeLlama-7B", 45},
        {"CodeLlama-34B", 43},
        {"DeepSeek-Coder-33B", 43},
        {"DeepSeek-Coder-6.7B", 41},
        {"Codestral-22B", 41},
        {"Qwen2.5-Coder-7B", 39},
        {"Qwen2.5-Coder-32B", 36},
        {"GPT-5-mini", 27},
        {"Claude Sonnet", 15}},
       "98.0",
       "Misclassified (Fail on avg 7.7/10 models)"},
  };
  std::vector<DescriptionItem> items;
  std::map<std::string, DefectType> labels;
  std::vector<ExecutionOutcome> outcomes;
  for (const auto& fx : fixtures) build_table6(fx, items, labels, outcomes);
  MapBackend backend(labels);
  const auto analysis = emit_flagged_analysis(flag_clean_set(items, backend, 1), outcomes);
  const auto csv = render_table6_csv(analysis);

  std::vector<std::string> parts;
  bool ok = analysis.table6.size() == fixtures.size();
  for (std::size_t k = 0; ok && k < fixtures.size(); ++k) {
    const auto& fx = fixtures[k];
    const auto& sec = analysis.table6[k];
    const auto pct = fixed(sec.aggregate.fail_percent(), 1);
    const auto label = aggregate_label(sec.aggregate);
    bool rows_ok = sec.models.size() == fx.model_failures.size();
    for (std::size_t i = 0; rows_ok && i < sec.models.size(); ++i)
      rows_ok = sec.models[i].model == fx.model_failures[i].first && sec.models[i].f == fx.model_failures[i].second &&
                sec.models[i].n == fx.flagged;
    ok = ok && sec.benchmark == fx.benchmark && sec.aggregate.n == fx.flagged && sec.aggregate.f == fx.failing &&
         pct == fx.percent && label == fx.label && rows_ok && csv.find(label) != std::string::npos;
    parts.push_back(fmt::format("{} {}/{} failing = {}%, \"{}\"{}", to_string(sec.benchmark), sec.aggregate.f,
                                sec.aggregate.n, pct, label, rows_ok ? "" : " (per-model rows differ)"));
  }
  return {ok, join(parts, "; ")};
}

// ---------------------------------------------------------------------------
// judge quality aggregation

Outcome table2_quality() {
  const auto fixture = Json::parse(read_file(kFixtures / "table2.json"));
  std::vector<Verdict> verdicts;
  std::vector<std::string> expected_lines;
  std::size_t total_n = 0;
  // The count for each proportion is the one nearest p * n that renders to
  // the printed value; US/HumanEval is pinned to its known count.
  auto count_for = [](const std::string& printed, std::size_t n) -> std::optional<std::size_t> {
    const double p = std::stod(printed);
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c <= n; ++c)
      if (fixed(double(c) / double(n), 2) == printed &&
          (!best || std::fabs(double(c) - p * double(n)) < std::fabs(double(*best) - p * double(n))))
        best = c;
    return best;
  };
  for (const auto& row : fixture.at("rows")) {
    const auto b = parse_benchmark(row.at("benchmark").get<std::string>());
    const auto d = parse_defect_type(row.at("mutation").get<std::string>());
    const auto n = row.at("n").get<std::size_t>();
    const auto comp = row.at("compliance").get<std::string>();
    const auto nat = row.at("naturalness").get<std::string>();
    auto cc = count_for(comp, n);
    const auto nc = count_for(nat, n);
    if (b == Benchmark::HumanEval && d == DefectType::US) cc = 143;
    if (!cc || !nc) return fail(fmt::format("no count renders {}/{} at n={}", comp, nat, n));
    total_n += n;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = fmt::format("{}/{}", slug(b), i);
      verdicts.push_back({id, d, b, compliance_criterion(d), i < *cc ? 1 : 0, "", "judge"});
      verdicts.push_back({id, d, b, Criterion::Naturalness, i < *nc ? 1 : 0, "", "judge"});
    }
    expected_lines.push_back(fmt::format("{},{},{},{},{}", to_string(b), to_string(d), n, comp, nat));
  }
  const auto csv = render_quality_csv(quality_report(verdicts));
  std::vector<std::string> missing;
  for (const auto& line : expected_lines)
    if (csv.find(line + "\n") == std::string::npos) missing.push_back(line);
  const bool us_he = csv.find("HumanEval,US,160,0.89,") != std::string::npos;
  std::string msg = fmt::format("{}/{} cells rendered as printed, {} mutants in total, US/HumanEval 143/160 -> {}",
                                expected_lines.size() - missing.size(), expected_lines.size(), total_n,
                                us_he ? "0.89" : "wrong");
  for (const auto& m : missing) msg += "; missing " + m;
  return {missing.empty() && us_he && total_n == 6573, msg};
}

// ---------------------------------------------------------------------------
// sandbox

std::vector<Task> sandbox_corpus() {
  std::vector<Task> tasks;
  const auto up = kFixtures / "upstream";
  for (const auto& set : {import_humaneval(read_file(up / "humaneval.jsonl")).tasks,
                          import_mbpp(read_file(up / "mbpp.jsonl")).tasks,
                          import_livecodebench(read_file(up / "livecodebench.jsonl")).tasks})
    for (const auto& t : set.tasks()) tasks.push_back(t);
  return tasks;
}

/// Scheduler state letter from /proc, or 0 when the process is gone.
char process_state(pid_t pid) {
  std::error_code ec;
  const auto path = fs::path("/proc") / std::to_string(pid) / "stat";
  if (!fs::exists(path, ec)) return 0;
  try {
    const auto stat = read_file(path);
    const auto close = stat.rfind(')');
    return close != std::string::npos && close + 2 < stat.size() ? stat[close + 2] : 0;
  } catch (const Error&) {
    return 0;
  }
}

std::string excerpt_line(std::string_view s) {
  auto out = replace_all(std::string(s.substr(0, 300)), "\n", " | ");
  return out;
}

GenerationResult reference_generation(const Task& t) {
  GenerationResult g;
  g.task_id = t.id;
  g.model = "reference";
  g.extracted_code = t.reference_solution;
  g.extraction_status = ExtractionStatus::Fenced;
  return g;
}

Outcome run_references(const std::vector<Task>& tasks, const SandboxOptions& opt, std::vector<std::string>& failures) {
  std::size_t passed = 0;
  for (const auto& t : tasks) {
    const auto o = execute_generation(reference_generation(t), t, opt);
    if (o.passed) ++passed;
    else failures.push_back(fmt::format("{} {} {}", t.id, to_string(o.category), excerpt_line(o.stderr_excerpt)));
  }
  return {passed == tasks.size(), fmt::format("{}/{}", passed, tasks.size())};
}

Outcome sandbox_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  SandboxOptions opt;
  opt.timeout_secs = kSandboxTimeoutSecs;
  std::vector<std::string> notes;

  const auto tasks = sandbox_corpus();
  std::size_t with_reference = 0;
  for (const auto& t : tasks) with_reference += t.reference_solution ? 1 : 0;
  if (tasks.size() < kMinSandboxCorpus || with_reference != tasks.size())
    return fail(fmt::format("fixture corpus has {} tasks, {} with references", tasks.size(), with_reference));

  std::vector<std::string> failures;
  const auto before = run_references(tasks, opt, failures);
  if (!before.ok) return fail("references before adversaries: " + before.message + "; " + join(failures, "; "));

  // Adversary 1: spins forever.
  EvalSpec spin_spec;
  spin_spec.mode = EvalMode::UnitTests;
  spin_spec.unit_tests = {"assert f() == 1"};
  spin_spec.entry_point = "f";
  const auto spin = execute_unit_tests("def f():\n    while True:\n        pass\n", spin_spec, opt);
  const double limit_ms = (kSandboxTimeoutSecs + kTimeoutSlackSecs) * 1000.0;
  if (spin.category != OutcomeCategory::Timeout || double(spin.duration_ms) > limit_ms)
    return fail(fmt::format("spinning program: {} after {} ms", to_string(spin.category), spin.duration_ms));
  notes.push_back(fmt::format("spinner Timeout in {:.1f}s", double(spin.duration_ms) / 1000.0));

  // Adversary 2: forks a SIGTERM-ignoring child, reports its pid, then spins.
  // The whole process group must be gone once the call returns.
  const char* forker =
      "import os, signal, sys, time\n"
      "pid = os.fork()\n"
      "if pid == 0:\n"
      "    signal.signal(signal.SIGTERM, signal.SIG_IGN)\n"
      "    while True:\n"
      "        time.sleep(0.05)\n"
      "print(pid, flush=True)\n"
      "while True:\n"
      "    pass\n";
  sandbox_detail::TempDir forker_dir;
  write_file_atomic(forker_dir.path() / "forker.py", forker);
  if (sandbox_detail::dropping(opt)) sandbox_detail::chown_tree(forker_dir.path());
  const auto fr = run_isolated(forker_dir.path(), "forker.py", {}, opt);
  const double fr_secs = double(fr.duration_ms) / 1000.0;
  if (!fr.timed_out || fr_secs > kSandboxTimeoutSecs + kTimeoutSlackSecs)
    return fail(fmt::format("forking spinner: timed_out={} after {:.1f}s", fr.timed_out, fr_secs));
  const auto child = std::atoi(std::string(trim(fr.out)).c_str());
  if (child > 0) {
    bool gone = false;
    for (int i = 0; i < 150 && !gone; ++i) {
      gone = (::kill(child, 0) != 0 && errno == ESRCH) || process_state(child) == 'Z';
      if (!gone) ::usleep(20000);
    }
    if (!gone) {
      ::kill(child, SIGKILL);
      return fail(fmt::format("forked child {} survived the timeout", child));
    }
  }
  notes.push_back(fmt::format("forking spinner Timeout in {:.1f}s, child reaped", fr_secs));

  // Adversary 3: filesystem and environment tampering, without spinning.
  ::setenv("SPECPROBE_SECRET", "hunter2", 1);
  const auto fixtures_before = [&] {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(kFixtures)) names.push_back(e.path().string());
    std::sort(names.begin(), names.end());
    return names;
  }();
  const std::string tamper = fmt::format(
      "import os, sys\n"
      "leak = os.environ.get('SPECPROBE_SECRET')\n"
      "payload = 'raise SystemExit(3)\\n'\n"
      "targets = ['/tmp/sitecustomize.py', '../sitecustomize.py', '../usercustomize.py',\n"
      "           os.path.expanduser('~/../sitecustomize.py'), {fixtures} + '/planted.py']\n"
      "for t in targets:\n"
      "    try:\n"
      "        with open(t, 'a') as fh:\n"
      "            fh.write(payload)\n"
      "    except OSError:\n"
      "        pass\n"
      "for k in ('PYTHONPATH', 'PYTHONSTARTUP'):\n"
      "    os.environ[k] = '/tmp'\n"
      "with open('keep.txt', 'w') as fh:\n"
      "    fh.write('x')\n"
      "def f():\n"
      "    return leak\n",
      fmt::arg("fixtures", Json(kFixtures.string()).dump()));
  EvalSpec env_spec;
  env_spec.mode = EvalMode::UnitTests;
  env_spec.unit_tests = {"assert f() is None"};
  env_spec.entry_point = "f";
  // Planted files outside the per-run directory are removed on every exit
  // path, so a failure cannot poison the next run of this binary.
  struct Planted {
    ~Planted() {
      std::error_code ec;
      for (auto p : {fs::path("/tmp/sitecustomize.py"), fs::path("/tmp/usercustomize.py"), kFixtures / "planted.py"})
        fs::remove(p, ec);
    }
  } planted;
  const auto tampered = execute_unit_tests(tamper, env_spec, opt);
  if (tampered.category != OutcomeCategory::Pass)
    return fail(fmt::format("environment leaked into the sandbox: {} {}", to_string(tampered.category),
                            excerpt_line(tampered.stderr_excerpt)));
  std::vector<std::string> fixtures_after;
  for (const auto& e : fs::recursive_directory_iterator(kFixtures)) fixtures_after.push_back(e.path().string());
  std::sort(fixtures_after.begin(), fixtures_after.end());
  if (fixtures_after != fixtures_before) return fail("adversary created files in the fixture tree");

  // A later run sees a fresh directory with nothing left behind.
  const auto fresh = execute_unit_tests(
      "import os, sys\n"
      "def f():\n"
      "    planted = 'sitecustomize' in sys.modules and \\\n"
      "        (sys.modules['sitecustomize'].__file__ or '').startswith('/tmp')\n"
      "    return sorted(os.listdir('.')), planted\n",
      [] {
        EvalSpec s;
        s.mode = EvalMode::UnitTests;
        s.unit_tests = {"assert 'keep.txt' not in f()[0] and not f()[1]"};
        s.entry_point = "f";
        return s;
      }(),
      opt);
  if (fresh.category != OutcomeCategory::Pass)
    return fail(fmt::format("state survived between runs: {} {}", to_string(fresh.category),
                            excerpt_line(fresh.stderr_excerpt)));

  failures.clear();
  const auto after = run_references(tasks, opt, failures);
  ::unsetenv("SPECPROBE_SECRET");
  if (!after.ok) return fail("references after adversaries: " + after.message + "; " + join(failures, "; "));
  const double secs = seconds_since(t0);
  if (secs >= kSandboxBudgetSecs) return fail(fmt::format("took {:.1f}s, budget {}s", secs, kSandboxBudgetSecs));
  return pass(fmt::format("references {} before and {} after adversaries; {}; {:.1f}s", before.message, after.message,
                          join(notes, "; "), secs));
}

// ---------------------------------------------------------------------------
// native SF operators

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::multiset<std::string> token_multiset(std::string_view s) {
  const auto toks = whitespace_tokens(s);
  return {toks.begin(), toks.end()};
}

bool is_delim(char c) { return sf_detail::kDelimiters.find(c) != std::string_view::npos; }
// Flips may produce ';' from ':'.
bool is_delim_or_semicolon(char c) { return c == ';' || is_delim(c); }

std::string strip_chars(std::string_view s, const std::function<bool(char)>& drop) {
  std::string out;
  for (char c : s)
    if (!drop(c)) out += c;
  return out;
}

std::string random_description(Rng& rng) {
  static const std::vector<std::string> words = {
      "return",  "the",    "number", "of",     "elements", "in",    "list",   "that",   "are",    "greater",
      "than",    "given",  "value",  "write",  "function", "which", "takes",  "string", "and",    "prints",
      "maximum", "sum",    "each",   "query",  "integer",  "array", "sorted", "order",  "output", "input"};
  std::string out;
  const auto sentences = 1 + rng.below(4);
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto n = 3 + rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += rng.below(8) == 0 ? "  " : " ";
      auto w = words[rng.below(words.size())];
      switch (rng.below(12)) {
        case 0: w = "(" + w + ")"; break;
        case 1: w = "[" + w + "]"; break;
        case 2: w = "`" + w + "`"; break;
        case 3: w += ":"; break;
        case 4: w = "\"" + w + "\""; break;
        default: break;
      }
      out += w;
    }
    out += rng.below(3) == 0 ? ".\n\n" : ". ";
  }
  switch (rng.below(4)) {
    case 0:
      out += "\n    >>> f([1, 2, 3])\n    6\n    >>> f([])\n    0\n";
      break;
    case 1:
      out += "\nExample:\nInput: 3 4\nOutput: 7\n";
      break;
    case 2:
      out += "\n\tindented detail line\n";
      break;
    default:
      break;
  }
  return out;
}

std::string check_sf_triple(std::string_view desc, std::uint64_t seed, SfCorruptionKind kind, const Mutant& m) {
  const auto& out = m.description;
  if (m.meta.at("sf_kind") != to_string(kind)) return "sf_kind meta mismatch";
  switch (kind) {
    case SfCorruptionKind::TokenTypo: {
      const auto a = whitespace_tokens(desc), b = whitespace_tokens(out);
      if (a.size() != b.size()) return "typo changed the token count";
      std::size_t changed = 0;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) {
          ++changed;
          if (edit_distance(a[i], b[i]) > 2) return fmt::format("typo edit distance > 2 ({} -> {})", a[i], b[i]);
        }
      if (changed != 1) return fmt::format("typo changed {} tokens", changed);
      if (edit_distance(desc, out) > 2) return "typo edit distance over the text > 2";
      break;
    }
    case SfCorruptionKind::DelimiterCorruption: {
      if (strip_chars(desc, is_delim_or_semicolon) != strip_chars(out, is_delim_or_semicolon))
        return "delimiter kind touched non-delimiters";
      std::size_t diffs = 0;
      if (desc.size() == out.size()) {
        for (std::size_t i = 0; i < desc.size(); ++i)
          if (desc[i] != out[i]) {
            ++diffs;
            if (!is_delim(desc[i])) return "delimiter flip hit a non-delimiter";
          }
        if (diffs != 1) return fmt::format("delimiter flip changed {} characters", diffs);
      } else if (desc.size() != out.size() + 1) {
        return "delimiter drop removed more than one character";
      }
      break;
    }
    case SfCorruptionKind::WhitespaceCorruption:
      if (token_multiset(desc) != token_multiset(out)) return "whitespace kind changed the token multiset";
      break;
    case SfCorruptionKind::ExampleBlockCorruption: {
      const auto& span = m.meta.at("span");
      const auto parts = split(span, '-');
      if (parts.size() != 2) return "example span meta malformed: " + span;
      const auto b = std::stoul(parts[0]), e = std::stoul(parts[1]);
      if (b > e || e > desc.size()) return "example span out of range";
      const auto suffix = desc.substr(e);
      if (out.substr(0, b) != desc.substr(0, b)) return "example kind touched text before the block";
      if (out.size() < suffix.size() || out.substr(out.size() - suffix.size()) != suffix)
        return "example kind touched text after the block";
      break;
    }
  }
  const auto again = mutate_sf(desc, seed, kind);
  if (again.description != out || again.meta != m.meta) return "not deterministic";
  return {};
}

/// Whether the kind has anything to act on, judged independently of the
/// operator implementation.
bool kind_has_target(std::string_view desc, SfCorruptionKind kind) {
  switch (kind) {
    case SfCorruptionKind::TokenTypo: {
      for (const auto& w : whitespace_tokens(desc)) {
        std::size_t alpha = 0;
        for (char c : w) alpha += sf_detail::is_alpha(c);
        if (alpha >= 4) return true;
      }
      return false;
    }
    case SfCorruptionKind::DelimiterCorruption:
      return std::any_of(desc.begin(), desc.end(), is_delim);
    case SfCorruptionKind::WhitespaceCorruption:
      return std::any_of(desc.begin(), desc.end(), is_space);
    case SfCorruptionKind::ExampleBlockCorruption:
      return !find_example_blocks(desc).empty();
  }
  return false;
}

Outcome sf_operator_properties() {
  std::vector<std::string> pool;
  for (const auto& t : sandbox_corpus()) pool.push_back(t.description);
  Rng rng(7);
  for (int i = 0; i < 40; ++i) pool.push_back(random_description(rng));
  std::map<SfCorruptionKind, std::size_t> applied, not_applicable;
  for (std::size_t trial = 0; trial < kSfTriples; ++trial) {
    const auto& desc = pool[rng.below(pool.size())];
    const auto seed = rng.next();
    const auto kind = kSfKinds[rng.below(kSfKinds.size())];
    try {
      const auto m = mutate_sf(desc, seed, kind);
      if (const auto err = check_sf_triple(desc, seed, kind, m); !err.empty())
        return fail(fmt::format("triple {} ({}, seed {}): {}", trial, to_string(kind), seed, err));
      ++applied[kind];
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotApplicable) throw;
      if (kind != SfCorruptionKind::TokenTypo && kind_has_target(desc, kind))
        return fail(fmt::format("triple {}: {} reported NotApplicable on a description with a target", trial,
                                to_string(kind)));
      ++not_applicable[kind];
    }
  }
  std::vector<std::string> parts;
  for (auto k : kSfKinds)
    parts.push_back(fmt::format("{} {} applied/{} n/a", to_string(k), applied[k], not_applicable[k]));
  for (auto k : kSfKinds)
    if (applied[k] == 0) return fail("kind never applied: " + join(parts, ", "));
  return pass(fmt::format("{} triples: {}", kSfTriples, join(parts, ", ")));
}

// ---------------------------------------------------------------------------
// splits

Outcome split_properties() {
  Rng rng(99);
  for (std::size_t trial = 0; trial < kSplitTrials; ++trial) {
    std::vector<LabeledExample> xs;
    std::map<DefectType, std::size_t> per_class;
    for (auto l : kLabels) {
      const auto n = 3 + rng.below(trial % 10 == 0 ? 400 : 60);
      per_class[l] = n;
      for (std::size_t i = 0; i < n; ++i)
        xs.push_back({fmt::format("t{}-{}#{}", trial, i, to_string(l)), "x", l, Benchmark::MBPP});
    }
    Rng(rng.next()).shuffle(xs);
    SplitSpec spec;
    spec.seed = rng.next();
    if (trial % 2) {
      const double a = 0.2 + 0.6 * double(rng.below(1000)) / 1000.0;
      const double b = (1.0 - a) * (0.1 + 0.8 * double(rng.below(1000)) / 1000.0);
      spec.ratios = {a, b, 1.0 - a - b};
    }
    const auto s = stratified_split(xs, spec);

    std::multiset<std::string> in, out;
    for (const auto& e : xs) in.insert(e.id);
    for (const auto& part : s.parts)
      for (const auto& e : part) out.insert(e.id);
    if (in != out) return fail(fmt::format("trial {}: split is not a partition", trial));

    for (auto l : kLabels)
      for (std::size_t k = 0; k < 3; ++k) {
        const auto got = std::count_if(s.parts[k].begin(), s.parts[k].end(), [&](const auto& e) { return e.label == l; });
        const double want = spec.ratios[k] * double(per_class[l]);
        if (std::fabs(double(got) - want) > 1.0 + 1e-9)
          return fail(fmt::format("trial {}: {} in {} has {}, target {:.2f}", trial, to_string(l), kSplitNames[k], got,
                                  want));
      }
    const auto again = stratified_split(xs, spec);
    if (again.parts != s.parts) return fail(fmt::format("trial {}: same seed gave a different split", trial));
  }

  auto sizes_for = [](std::size_t n) {
    std::vector<LabeledExample> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back({fmt::format("x{}", i), "x", DefectType::LV, Benchmark::MBPP});
    const auto s = stratified_split(xs, SplitSpec{});
    return std::array<std::size_t, 3>{s.parts[0].size(), s.parts[1].size(), s.parts[2].size()};
  };
  const auto s101 = sizes_for(101), s250 = sizes_for(250);
  if (s101 != std::array<std::size_t, 3>{81, 10, 10})
    return fail(fmt::format("101 examples split {}/{}/{}", s101[0], s101[1], s101[2]));
  if (s250 != std::array<std::size_t, 3>{200, 25, 25})
    return fail(fmt::format("250 examples split {}/{}/{}", s250[0], s250[1], s250[2]));
  return pass(fmt::format("{} random datasets partitioned within +/-1 per class, deterministic; 101 -> 81/10/10, "
                          "250 -> 200/25/25",
                          kSplitTrials));
}

// ---------------------------------------------------------------------------
// reply parsers

std::string fuzz_verdict_string(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "{",  "}",       "\"score\"", "\"Score\"", "\"scores\"", ":",      "0",     "1",     "2",    "01",   "1.0",
      "-0", "true",    "null",      " ",         "\n",         "\t",     "\r",    ",",     "\"a\"", "[",    "]",
      "\"", "\\u0073", "score",     "'score'",   "1e0",        "\"1\"", "{}",    "//",    "\f",   "\xc2\xa0", "0x1"};
  static const std::vector<std::string> templates = {
      "{\"score\": 1}", "{\"score\":0}", " {\"score\" :1 } ", "{\"score\": 1, \"why\": \"x\"}", "{\"score\": 1}}",
      "{\"score\": 1}\n", "{\"score\": true}", "{\"score\": 1.0}", "{\"score\": \"1\"}", "{\"score\": 0}x"};
  std::string s;
  switch (rng.below(4)) {
    case 0: {  // random bytes
      const auto n = rng.below(24);
      for (std::size_t i = 0; i < n; ++i) s += static_cast<char>(rng.below(256));
      break;
    }
    case 1: {  // random piece sequences
      const auto n = 1 + rng.below(10);
      for (std::size_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
      break;
    }
    default: {  // mutated templates
      s = templates[rng.below(templates.size())];
      const auto edits = rng.below(3);
      for (std::size_t e = 0; e < edits && !s.empty(); ++e) {
        const auto pos = rng.below(s.size() + 1);
        switch (rng.below(3)) {
          case 0: s.insert(pos, pieces[rng.below(pieces.size())]); break;
          case 1: if (pos < s.size()) s.erase(pos, 1); break;
          default: if (pos < s.size()) s[pos] = static_cast<char>(32 + rng.below(95)); break;
        }
      }
      break;
    }
  }
  return s;
}

/// Independent acceptance rule: a strict JSON document that is an object with
/// exactly the key "score" mapped to the unsigned integer 0 or 1.
std::optional<int> verdict_oracle(const std::string& s) {
  const auto j = Json::parse(s, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.size() != 1 || !j.contains("score")) return std::nullopt;
  const auto& v = j.at("score");
  if (!v.is_number_unsigned()) return std::nullopt;
  const auto u = v.get<std::uint64_t>();
  if (u > 1) return std::nullopt;
  return int(u);
}

std::string fuzz_label_string(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "CLEAN", "clean", "LV", "lv", "US", "us", "SF", "sf", "Sf", "the", "label", "is", "bus", "SFX", "clean-ish",
      "LV2",   "_sf",   ":",  ".",  "\n", " ",  "**", "\"", "(",  ")",  "Label:", "US.", "sf!", "uS", "focus"};
  std::string s;
  if (rng.below(5) == 0) {
    const auto n = rng.below(20);
    for (std::size_t i = 0; i < n; ++i) s += static_cast<char>(rng.below(256));
    return s;
  }
  const auto n = rng.below(6);
  for (std::size_t i = 0; i < n; ++i) {
    s += pieces[rng.below(pieces.size())];
    if (rng.below(2)) s += " ";
  }
  return s;
}

/// Independent rule: split on non-word characters and accept iff exactly one
/// distinct class name appears among the tokens.
std::optional<DefectType> label_oracle(const std::string& s) {
  std::set<std::string> classes;
  std::string tok;
  auto flush = [&] {
    std::string low;
    for (char c : tok) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (low == "clean" || low == "lv" || low == "us" || low == "sf") classes.insert(low);
    tok.clear();
  };
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') tok += c;
    else flush();
  }
  flush();
  if (classes.size() != 1) return std::nullopt;
  return parse_defect_type(*classes.begin());
}

Outcome parser_fuzz() {
  Rng rng(1234);
  std::size_t verdict_accepts = 0, oracle_accepts = 0, false_accepts = 0, label_accepts = 0, label_disagree = 0;
  std::string first_bad;
  for (std::size_t i = 0; i < kFuzzStrings; ++i) {
    const auto s = fuzz_verdict_string(rng);
    std::optional<int> got;
    try {
      got = parse_verdict(s);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::VerdictParseError) throw;
    }
    const auto want = verdict_oracle(s);
    oracle_accepts += want ? 1 : 0;
    if (got) {
      ++verdict_accepts;
      if (!want || *want != *got) {
        ++false_accepts;
        if (first_bad.empty()) first_bad = Json(s).dump();
      }
    }
  }
  std::string first_label;
  for (std::size_t i = 0; i < kFuzzStrings; ++i) {
    const auto s = fuzz_label_string(rng);
    std::optional<DefectType> got;
    try {
      got = parse_label(s);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::LabelParseError) throw;
    }
    label_accepts += got ? 1 : 0;
    if (got != label_oracle(s)) {
      ++label_disagree;
      if (first_label.empty()) first_label = Json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
    }
  }
  std::string msg = fmt::format(
      "parse_verdict accepted {} of {} strings ({} valid per JSON oracle), {} false acceptances; parse_label "
      "accepted {}, {} disagreements with the single-class oracle",
      verdict_accepts, kFuzzStrings, oracle_accepts, false_accepts, label_accepts, label_disagree);
  if (!first_bad.empty()) msg += "; first false acceptance " + first_bad;
  if (!first_label.empty()) msg += "; first label disagreement " + first_label;
  return {false_accepts == 0 && label_disagree == 0 && verdict_accepts > 0 && label_accepts > 0, msg};
}

// ---------------------------------------------------------------------------
// offline end-to-end

int run_cli(const std::string& args, const fs::path& log) {
  const auto cmd = fmt::format("'{}' {} >>'{}' 2>&1", kCli.string(), args, log.string());
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : 128 + WTERMSIG(rc);
}

std::size_t data_rows(const fs::path& csv) {
  const auto lines = split_lines(read_file(csv));
  std::size_t n = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) n += trim(lines[i]).empty() ? 0 : 1;
  return n;
}

Outcome offline_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  sandbox_detail::TempDir work;
  const auto run = work.path() / "run";
  const auto log = work.path() / "cli.log";
  const auto up = kFixtures / "upstream";
  const auto g = fmt::format("--run '{}' --offline --seed 7 --workers 2 --timeout-secs 10", run.string());
  const std::vector<std::string> steps = {
      fmt::format("{} import --benchmark HumanEval --source '{}' --limit 4", g, (up / "humaneval.jsonl").string()),
      fmt::format("{} import --benchmark MBPP --source '{}' --limit 3", g, (up / "mbpp.jsonl").string()),
      fmt::format("{} import --benchmark LiveCodeBench --source '{}' --limit 3", g,
                  (up / "livecodebench.jsonl").string()),
      g + " mutate --defects SF --native",
      g + " judge",
      g + " build-dataset",
      g + " split",
      g + " generate",
      g + " execute",
      g + " evaluate",
      g + " detect --backend heuristic --input dataset",
      g + " flag-clean --backend heuristic",
      g + " report",
  };
  for (const auto& s : steps) {
    const int rc = run_cli(s, log);
    if (rc != 0) {
      auto tail = read_file(log);
      if (tail.size() > 1500) tail = tail.substr(tail.size() - 1500);
      return fail(fmt::format("step `{}` exited {}: {}", s.substr(g.size() + 1), rc, tail));
    }
  }
  const double secs = seconds_since(t0);
  std::vector<std::string> missing, empty;
  const std::vector<std::string> stems = {"quality", "robustness", "detector", "flagged_t5", "flagged_t6", "heatmap"};
  std::size_t files = 0;
  for (const auto& stem : stems)
    for (auto ext : {".csv", ".txt", ".json"}) {
      const auto p = run / "reports" / (stem + ext);
      if (!fs::exists(p)) missing.push_back(p.filename().string());
      else ++files;
    }
  if (!missing.empty()) return fail("missing report files: " + join(missing, ", "));
  for (const auto& stem : stems)
    if (data_rows(run / "reports" / (stem + ".csv")) == 0) empty.push_back(stem);
  // Only SF mutants exist offline and the heuristic may flag nothing, so the
  // flagged-sample table is allowed to be empty.
  std::erase(empty, "flagged_t6");
  if (!empty.empty()) return fail("reports without rows: " + join(empty, ", "));
  const auto tasks = read_jsonl(run / "tasks" / "humaneval.jsonl").size() + read_jsonl(run / "tasks" / "mbpp.jsonl").size() +
                     read_jsonl(run / "tasks" / "livecodebench.jsonl").size();
  if (tasks != 10) return fail(fmt::format("imported {} tasks, expected 10", tasks));
  if (secs >= kEndToEndBudgetSecs) return fail(fmt::format("took {:.1f}s, budget {}s", secs, kEndToEndBudgetSecs));
  return pass(fmt::format("{} steps on {} tasks, {} report files populated, {:.1f}s", steps.size(), tasks, files, secs));
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"metrics_oracle", metrics_oracle},
      {"table3_arithmetic", table3_arithmetic},
      {"table5_specificity", table5_specificity},
      {"table6_aggregate", table6_aggregate},
      {"table2_quality", table2_quality},
      {"sandbox_properties", sandbox_properties},
      {"sf_operator_properties", sf_operator_properties},
      {"split_properties", split_properties},
      {"parser_fuzz", parser_fuzz},
      {"offline_end_to_end", offline_end_to_end},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  bool any = false, all_ok = true;
  for (const auto& [name, fn] : criteria()) {
    if (!only.empty() && only != name) continue;
    any = true;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.message << std::endl;
    all_ok = all_ok && o.ok;
  }
  if (!any) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  return all_ok ? 0 : 1;
}
