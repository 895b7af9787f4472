#include <gtest/gtest.h>

#include "specprobe/harness.hpp"

using namespace specprobe;

namespace {
Task unit_task() {
  Task t;
  t.id = "mbpp/1";
  t.benchmark = Benchmark::MBPP;
  t.description = "Return the square of n.";
  t.eval.unit_tests = {"assert sq(3) == 9"};
  t.eval.entry_point = "sq";
  return t;
}
}  // namespace

TEST(Extract, PrefersPythonFence) {
  const auto e = extract_code("text\n```\nplain\n```\n```python\ndef f(): pass\n```\n", "gpt");
  EXPECT_EQ(e.status, ExtractionStatus::Fenced);
  EXPECT_EQ(*e.code, "def f(): pass");
}

TEST(Extract, FallsBackToFirstFence) {
  const auto e = extract_code("```\nx = 1\n```\n```\ny = 2\n```", "gpt");
  EXPECT_EQ(*e.code, "x = 1");
}

TEST(Extract, ModelSpecificDelimiters) {
  const auto registry = DelimiterRegistry::load_default();
  const auto raw = "[PYTHON]\ndef f():\n    return 1\n[/PYTHON]";
  const auto e = extract_code(raw, "CodeLlama-7b-Instruct", registry);
  EXPECT_EQ(e.status, ExtractionStatus::FallbackDelimiter);
  EXPECT_EQ(*e.code, "\ndef f():\n    return 1\n");
  // Another model does not get the CodeLlama delimiters.
  const auto other = extract_code("[PYTHON]\nx = 1\n[/PYTHON]", "gpt-5-mini", registry);
  EXPECT_EQ(other.status, ExtractionStatus::Failed);
  const auto sc = extract_code("<code>import sys</code>", "starcoder2-15b", registry);
  EXPECT_EQ(sc.status, ExtractionStatus::FallbackDelimiter);
}

TEST(Extract, WholeReplyOnlyWhenItLooksLikeCode) {
  EXPECT_EQ(extract_code("def f(x):\n    return x\n", "m").status, ExtractionStatus::WholeReply);
  EXPECT_EQ(extract_code("import sys\nprint(1)", "m").status, ExtractionStatus::WholeReply);
  const auto prose = extract_code("I cannot solve this without more details.", "m");
  EXPECT_EQ(prose.status, ExtractionStatus::Failed);
  EXPECT_FALSE(prose.code);
}

TEST(Registry, RejectsBadConfig) {
  EXPECT_THROW(DelimiterRegistry::from_json(Json::object()), Error);
  EXPECT_THROW(DelimiterRegistry::from_json(Json::array({{{"open", "a"}}})), Error);
  EXPECT_EQ(DelimiterRegistry().matching("CODELLAMA-34b").size(), 1u);
}

TEST(Generate, GreedyPromptAndExtraction) {
  CompletionRequest seen;
  StubProvider p("p", "model-x", [&](const CompletionRequest& r) {
    seen = r;
    return std::string("```python\ndef sq(n):\n    return n * n\n```");
  });
  const auto tmpl = TemplateStore{}.load("generate");
  const auto t = unit_task();
  const auto g = generate_solution("Return the square of the number.", t, DefectType::LV, p, tmpl, DelimiterRegistry(),
                                   Decoding{0.7, 100});
  EXPECT_EQ(seen.decoding.temperature, 0.0);
  EXPECT_EQ(seen.decoding.max_tokens, 100);
  EXPECT_NE(seen.prompt.find("Return the square of the number."), std::string::npos);
  EXPECT_NE(seen.prompt.find("`sq`"), std::string::npos);
  EXPECT_EQ(g.condition, DefectType::LV);
  EXPECT_EQ(g.model, "model-x");
  EXPECT_EQ(g.extraction_status, ExtractionStatus::Fenced);
  EXPECT_EQ(generation_from_json(generation_to_json(g)), g);
}

TEST(Generate, EmptyDescriptionRejected) {
  StubProvider p("p", "m", [](const CompletionRequest&) { return std::string("x"); });
  EXPECT_THROW(generate_solution("  ", unit_task(), DefectType::Clean, p, TemplateStore{}.load("generate")), Error);
}

TEST(Generate, FormatHintFollowsEvalMode) {
  auto t = unit_task();
  EXPECT_NE(format_hint(t).find("sq"), std::string::npos);
  t.eval.mode = EvalMode::Stdio;
  EXPECT_NE(format_hint(t).find("standard input"), std::string::npos);
}

TEST(GenerationJson, FailedExtractionRoundTrips) {
  GenerationResult g{"t", DefectType::US, "m", "no code here", std::nullopt, ExtractionStatus::Failed};
  EXPECT_EQ(generation_from_json(generation_to_json(g)), g);
  for (auto s : {ExtractionStatus::Fenced, ExtractionStatus::FallbackDelimiter, ExtractionStatus::WholeReply,
                 ExtractionStatus::Failed})
    EXPECT_EQ(parse_extraction_status(to_string(s)), s);
}
