#include <gtest/gtest.h>

#include "specprobe/metrics.hpp"

using namespace specprobe;

namespace {
ExecutionOutcome outcome(const std::string& id, bool passed, const std::string& model = "m",
                         DefectType cond = DefectType::Clean) {
  ExecutionOutcome o;
  o.task_id = id;
  o.model = model;
  o.condition = cond;
  o.passed = passed;
  o.category = passed ? OutcomeCategory::Pass : OutcomeCategory::WrongAnswer;
  return o;
}
}  // namespace

TEST(PassAt1, CountsPasses) {
  const auto r = pass_at_1({outcome("a", true), outcome("b", false), outcome("c", true)});
  EXPECT_EQ(r.passes, 2u);
  EXPECT_EQ(r.n, 3u);
  EXPECT_DOUBLE_EQ(r.value(), 2.0 / 3.0);
}

TEST(PassAt1, Errors) {
  try {
    pass_at_1({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
  }
  try {
    pass_at_1({outcome("a", true), outcome("a", false)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DuplicateTask);
  }
}

TEST(Drops, DeltaAndRelative) {
  EXPECT_NEAR(delta_pp(0.726, 0.573), 15.3, 1e-9);
  EXPECT_NEAR(relative_drop(0.726, 0.573), 21.0743801652, 1e-8);
  EXPECT_LT(relative_drop(0.5, 0.6), 0.0);
  try {
    relative_drop(0.0, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroBaseline);
  }
}

TEST(Mcc, PerfectInverseAndDegenerate) {
  LabelMatrix m;
  for (std::size_t k = 0; k < 4; ++k) m.counts[k][k] = 5;
  EXPECT_DOUBLE_EQ(mcc(m), 1.0);

  ConfusionMatrix<2> inv;
  inv.counts[0][1] = 3;
  inv.counts[1][0] = 3;
  EXPECT_DOUBLE_EQ(mcc(inv), -1.0);

  LabelMatrix constant;  // every prediction CLEAN
  for (std::size_t k = 0; k < 4; ++k) constant.counts[k][0] = 4;
  EXPECT_EQ(mcc(constant), 0.0);
  EXPECT_THROW(mcc(LabelMatrix{}), Error);
}

TEST(Mcc, BinaryFormula) {
  ConfusionMatrix<2> b;
  b.counts = {{{50, 10}, {5, 35}}};  // rows true {neg, pos}
  const double tp = 35, tn = 50, fp = 10, fn = 5;
  const double want = (tp * tn - fp * fn) / std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  EXPECT_NEAR(mcc(b), want, 1e-12);
}

TEST(Macro, ZeroDivisionCountsAsZero) {
  LabelMatrix m;
  m.counts[0][0] = 3;
  m.counts[1][0] = 1;  // LV never predicted; US and SF absent entirely
  const auto d = macro_scores(m);
  EXPECT_DOUBLE_EQ(d.macro_precision, (0.75 + 0 + 0 + 0) / 4);
  EXPECT_DOUBLE_EQ(d.macro_recall, (1.0 + 0 + 0 + 0) / 4);
  EXPECT_DOUBLE_EQ(d.accuracy, 0.75);
}

TEST(Confusion, FromPairs) {
  const auto m = confusion({{DefectType::LV, DefectType::LV}, {DefectType::LV, DefectType::US},
                            {DefectType::Clean, DefectType::Clean}});
  EXPECT_EQ(m.counts[label_index(DefectType::LV)][label_index(DefectType::US)], 1);
  EXPECT_EQ(m.total(), 3);
  EXPECT_EQ(m.trace(), 2);
  EXPECT_NE(render_confusion(m).find("CLEAN"), std::string::npos);
  EXPECT_EQ(confusion_to_json(m).at("counts").size(), 4u);
}

TEST(MeanMetrics, Averages) {
  const auto m = mean_metrics({{1, 1, 1, 1, 1}, {0, 0, 0, 0, 0.5}});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.mcc, 0.75);
  EXPECT_THROW(mean_metrics({}), Error);
  const auto back = metrics_from_json(metrics_to_json(m));
  EXPECT_DOUBLE_EQ(back.mcc, 0.75);
}

TEST(Specificity, PerBenchmarkAndTotal) {
  const auto r = specificity_report({DefectType::Clean, DefectType::LV, DefectType::Clean, DefectType::SF},
                                    {Benchmark::MBPP, Benchmark::MBPP, Benchmark::HumanEval, Benchmark::MBPP});
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].first, Benchmark::HumanEval);
  EXPECT_DOUBLE_EQ(r.rows[1].second.specificity(), 1.0 / 3.0);
  EXPECT_EQ(r.rows[1].second.fp_by_type.at(DefectType::LV), 1u);
  EXPECT_EQ(r.total.fp, 2u);
  EXPECT_THROW(specificity_report({DefectType::Clean}, {}), Error);
}

TEST(Robustness, GroupsByModelBenchmarkCondition) {
  const std::vector<ExecutionOutcome> os = {outcome("a", true), outcome("b", false),
                                            outcome("a", false, "m", DefectType::US), outcome("x", true, "m2")};
  const auto cells = robustness_cells(os, {{"a", Benchmark::MBPP}, {"b", Benchmark::MBPP}, {"x", Benchmark::HumanEval}});
  ASSERT_EQ(cells.size(), 3u);
  for (const auto& c : cells) {
    const auto back = robustness_cell_from_json(robustness_cell_to_json(c));
    EXPECT_EQ(back.rate.passes, c.rate.passes);
    EXPECT_EQ(back.model, c.model);
  }
  EXPECT_THROW(robustness_cells(os, {}), Error);
}
