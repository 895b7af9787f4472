#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specprobe/corpus.hpp"
#include "specprobe/fenced.hpp"
#include "specprobe/judge.hpp"
#include "specprobe/mutant.hpp"
#include "specprobe/provider.hpp"
#include "specprobe/templates.hpp"

namespace specprobe {

enum class SfCorruptionKind { TokenTypo, DelimiterCorruption, WhitespaceCorruption, ExampleBlockCorruption };

inline constexpr std::array<SfCorruptionKind, 4> kSfKinds = {
    SfCorruptionKind::TokenTypo, SfCorruptionKind::DelimiterCorruption, SfCorruptionKind::WhitespaceCorruption,
    SfCorruptionKind::ExampleBlockCorruption};

inline std::string_view to_string(SfCorruptionKind k) {
  switch (k) {
    case SfCorruptionKind::TokenTypo: return "TokenTypo";
    case SfCorruptionKind::DelimiterCorruption: return "DelimiterCorruption";
    case SfCorruptionKind::WhitespaceCorruption: return "WhitespaceCorruption";
    case SfCorruptionKind::ExampleBlockCorruption: return "ExampleBlockCorruption";
  }
  return "?";
}

inline SfCorruptionKind parse_sf_kind(std::string_view s) {
  for (auto k : kSfKinds)
    if (to_lower(to_string(k)) == to_lower(s)) return k;
  if (s == "typo") return SfCorruptionKind::TokenTypo;
  if (s == "delimiter") return SfCorruptionKind::DelimiterCorruption;
  if (s == "whitespace") return SfCorruptionKind::WhitespaceCorruption;
  if (s == "example") return SfCorruptionKind::ExampleBlockCorruption;
  throw Error(ErrorKind::ConfigError, "unknown SF corruption kind '" + std::string(s) + "'");
}

struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool contains(std::size_t pos) const { return pos >= begin && pos < end; }
};

namespace sf_detail {

struct LineInfo {
  std::size_t begin, end;  // end excludes '\n'
  std::string_view text;
};

inline std::vector<LineInfo> lines_of(std::string_view text) {
  std::vector<LineInfo> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    out.push_back({pos, nl, text.substr(pos, nl - pos)});
    pos = nl + 1;
  }
  return out;
}

inline bool is_trigger(std::string_view line) {
  const auto t = trim(line);
  return t.rfind(">>>", 0) == 0 || t.rfind("Example", 0) == 0;
}

inline bool is_docstring_fence(std::string_view line) {
  const auto t = trim(line);
  return t == "\"\"\"" || t == "'''";
}

inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

inline constexpr std::string_view kDelimiters = "()[]{}:\"'`";

inline char flipped(char c) {
  switch (c) {
    case '(': return '[';
    case ')': return ']';
    case '[': return '(';
    case ']': return ')';
    case '{': return '(';
    case '}': return ')';
    case ':': return ';';
    case '"': return '\'';
    case '\'': return '"';
    case '`': return '\'';
    default: return c;
  }
}

}  // namespace sf_detail

/// Example regions of a description: a block starts at a line beginning with
/// ">>>" or "Example" and runs over the following non-blank lines (blank lines
/// directly after an "Example ...:" heading are skipped). Docstring quotes end
/// a block.
inline std::vector<TextSpan> find_example_blocks(std::string_view text) {
  using namespace sf_detail;
  const auto lines = lines_of(text);
  std::vector<TextSpan> blocks;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (!is_trigger(lines[i].text)) {
      ++i;
      continue;
    }
    std::size_t last = i;
    std::size_t j = i + 1;
    if (trim(lines[i].text).rfind("Example", 0) == 0 && !trim(lines[i].text).empty() &&
        trim(lines[i].text).back() == ':') {
      while (j < lines.size() && trim(lines[j].text).empty()) ++j;
    }
    while (j < lines.size() && !trim(lines[j].text).empty() && !is_docstring_fence(lines[j].text)) {
      last = j;
      ++j;
    }
    blocks.push_back({lines[i].begin, lines[last].end});
    i = std::max(j, last + 1);
  }
  return blocks;
}

namespace sf_detail {

inline std::string typo(std::string_view text, Rng& rng, std::map<std::string, std::string>& meta) {
  const auto blocks = find_example_blocks(text);
  auto in_example = [&](std::size_t pos) {
    return std::any_of(blocks.begin(), blocks.end(), [&](const TextSpan& b) { return b.contains(pos); });
  };
  std::vector<TextSpan> words;
  for (std::size_t i = 0; i < text.size();) {
    if (!is_alpha(text[i])) {
      ++i;
      continue;
    }
    const auto b = i;
    while (i < text.size() && is_alpha(text[i])) ++i;
    const bool glued_to_word = (b > 0 && (std::isalnum(static_cast<unsigned char>(text[b - 1])) || text[b - 1] == '_')) ||
                               (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '_'));
    const bool called = i < text.size() && text[i] == '(';
    if (i - b >= 3 && !glued_to_word && !called && !in_example(b)) words.push_back({b, i});
  }
  if (words.empty()) throw Error(ErrorKind::NotApplicable, "TokenTypo: no eligible word", {{"kind", "TokenTypo"}});

  const auto w = words[rng.below(words.size())];
  std::string word(text.substr(w.begin, w.end - w.begin));
  std::vector<std::size_t> swaps;
  for (std::size_t k = 0; k + 1 < word.size(); ++k)
    if (word[k] != word[k + 1]) swaps.push_back(k);

  std::string op;
  switch (rng.below(3)) {
    case 0: op = swaps.empty() ? "duplicate" : "transpose"; break;
    case 1: op = word.size() >= 4 ? "delete" : "duplicate"; break;
    default: op = "duplicate"; break;
  }
  if (op == "transpose") {
    const auto k = swaps[rng.below(swaps.size())];
    std::swap(word[k], word[k + 1]);
  } else if (op == "delete") {
    word.erase(rng.below(word.size()), 1);
  } else {
    const auto k = rng.below(word.size());
    word.insert(word.begin() + static_cast<std::ptrdiff_t>(k), word[k]);
  }
  meta["op"] = op;
  meta["target"] = std::string(text.substr(w.begin, w.end - w.begin));
  std::string out(text.substr(0, w.begin));
  out += word;
  out += text.substr(w.end);
  return out;
}

inline std::string delimiter(std::string_view text, Rng& rng, std::map<std::string, std::string>& meta) {
  std::vector<std::size_t> sites;
  for (std::size_t i = 0; i < text.size(); ++i)
    if (kDelimiters.find(text[i]) != std::string_view::npos) sites.push_back(i);
  if (sites.empty())
    throw Error(ErrorKind::NotApplicable, "DelimiterCorruption: no delimiters", {{"kind", "DelimiterCorruption"}});
  const auto pos = sites[rng.below(sites.size())];
  std::string out(text);
  if (rng.below(2) == 0) {
    out[pos] = flipped(text[pos]);
    meta["op"] = "flip";
  } else {
    out.erase(pos, 1);
    meta["op"] = "drop";
  }
  meta["target"] = std::string(1, text[pos]);
  return out;
}

struct WsRun {
  std::size_t begin, end;
};

inline std::vector<WsRun> whitespace_runs(std::string_view text) {
  std::vector<WsRun> runs;
  for (std::size_t i = 0; i < text.size();) {
    if (!is_space(text[i])) {
      ++i;
      continue;
    }
    const auto b = i;
    while (i < text.size() && is_space(text[i])) ++i;
    runs.push_back({b, i});
  }
  return runs;
}

inline std::string random_indent(Rng& rng) {
  static const std::array<std::string_view, 6> choices = {"", "  ", "   ", "\t", "        ", " \t "};
  return std::string(choices[rng.below(choices.size())]);
}

/// Rewrites whitespace only: runs are replaced with other non-empty runs and
/// indentation may be inserted at line starts, so the non-whitespace token
/// sequence is preserved.
inline std::string whitespace(std::string_view text, Rng& rng, std::map<std::string, std::string>& meta) {
  const auto lines = lines_of(text);
  const auto runs = whitespace_runs(text);
  std::string out;
  switch (rng.below(3)) {
    case 0: {  // indentation
      meta["op"] = "indent";
      bool changed = false;
      const auto forced = rng.below(lines.size());
      for (std::size_t li = 0; li < lines.size(); ++li) {
        auto line = lines[li].text;
        std::size_t k = 0;
        while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
        std::string indent(line.substr(0, k));
        if (!trim(line).empty() && rng.below(2) == 0) indent = random_indent(rng);
        if (li == forced && indent == line.substr(0, k)) indent += "  ";
        changed = changed || indent != line.substr(0, k);
        out += indent;
        out += line.substr(k);
        if (lines[li].end < text.size()) out += '\n';
      }
      if (!changed) out = "  " + std::string(text);
      return out;
    }
    case 1: {  // blank-line layout
      meta["op"] = "blank-lines";
      if (runs.empty()) return "\n" + std::string(text);
      std::vector<bool> pick(runs.size(), false);
      pick[rng.below(runs.size())] = true;
      for (std::size_t r = 0; r < runs.size(); ++r)
        if (rng.below(4) == 0) pick[r] = true;
      std::size_t pos = 0;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        out += text.substr(pos, runs[r].begin - pos);
        const auto run = text.substr(runs[r].begin, runs[r].end - runs[r].begin);
        if (!pick[r]) {
          out += run;
        } else if (run.find("\n\n") != std::string_view::npos) {
          out += '\n';  // collapse an existing blank line
        } else {
          out += "\n\n";
          out += (run == "\n\n" ? "\n" : "");
        }
        pos = runs[r].end;
      }
      out += text.substr(pos);
      if (out == text) out = std::string(text) + "\n\n";
      return out;
    }
    default: {  // inter-word spacing
      meta["op"] = "spacing";
      if (runs.empty()) return "  " + std::string(text);
      static const std::array<std::string_view, 4> fills = {"  ", "   ", "\t", " \t"};
      std::vector<bool> pick(runs.size(), false);
      pick[rng.below(runs.size())] = true;
      for (std::size_t r = 0; r < runs.size(); ++r)
        if (rng.below(3) == 0) pick[r] = true;
      std::size_t pos = 0;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        out += text.substr(pos, runs[r].begin - pos);
        const auto run = text.substr(runs[r].begin, runs[r].end - runs[r].begin);
        if (pick[r] && run.find('\n') == std::string_view::npos) {
          std::string fill(fills[rng.below(fills.size())]);
          if (fill == run) fill += ' ';
          out += fill;
        } else if (pick[r]) {
          out += std::string(run) + " ";  // trailing space before the newline run
        } else {
          out += run;
        }
        pos = runs[r].end;
      }
      out += text.substr(pos);
      return out;
    }
  }
}

inline std::string scramble_block(std::string_view block, Rng& rng, std::map<std::string, std::string>& meta) {
  const auto lines = lines_of(block);
  std::vector<std::string> ops;
  if (lines.size() >= 2) ops.emplace_back("collapse");
  const bool has_markers = block.find(">>>") != std::string_view::npos ||
                           block.find("Input:") != std::string_view::npos ||
                           block.find("Output:") != std::string_view::npos;
  if (has_markers) ops.emplace_back("markers");
  ops.emplace_back("indent");
  const auto op = ops[rng.below(ops.size())];
  meta["op"] = op;

  std::string out;
  if (op == "collapse") {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i) out += ' ';
      out += i ? std::string(trim(lines[i].text)) : std::string(rtrim(lines[i].text));
    }
  } else if (op == "markers") {
    static const std::array<std::string_view, 3> prompts = {">>", "> > >", ">>>>"};
    out = std::string(block);
    out = replace_all(std::move(out), ">>>", prompts[rng.below(prompts.size())]);
    out = replace_all(std::move(out), "Input:", rng.below(2) ? "Input" : "Input;");
    out = replace_all(std::move(out), "Output:", rng.below(2) ? "Output" : "Output;");
  }
  if (out.empty() || out == block) {
    meta["op"] = "indent";
    out.clear();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto line = lines[i].text;
      std::size_t k = 0;
      while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
      auto indent = random_indent(rng);
      if (i == 0 && indent == line.substr(0, k)) indent += "   ";
      out += indent;
      out += line.substr(k);
      if (i + 1 < lines.size()) out += '\n';
    }
    if (out == block) out = "    " + std::string(block);
  }
  return out;
}

inline std::string example_block(std::string_view text, Rng& rng, std::map<std::string, std::string>& meta) {
  const auto blocks = find_example_blocks(text);
  if (blocks.empty())
    throw Error(ErrorKind::NotApplicable, "ExampleBlockCorruption: no example block",
                {{"kind", "ExampleBlockCorruption"}});
  const auto b = blocks[rng.below(blocks.size())];
  std::string out(text.substr(0, b.begin));
  out += scramble_block(text.substr(b.begin, b.end - b.begin), rng, meta);
  out += text.substr(b.end);
  meta["span"] = fmt::format("{}-{}", b.begin, b.end);
  return out;
}

}  // namespace sf_detail

inline constexpr std::size_t kMinSfLength = 10;

/// Native syntax/formatting corruption. Pure in (description, seed, kind):
/// exactly one corruption of the requested kind is applied.
inline Mutant mutate_sf(std::string_view description, std::uint64_t seed, SfCorruptionKind kind,
                        std::string task_id = {}) {
  if (description.size() < kMinSfLength)
    throw Error(ErrorKind::NotApplicable, "description shorter than 10 characters",
                {{"kind", std::string(to_string(kind))}});
  Rng rng(fnv1a64(description, mix_seed(seed, to_string(kind))));
  Mutant m;
  m.task_id = std::move(task_id);
  m.defect_type = DefectType::SF;
  m.origin = MutantOrigin::NativeRule;
  m.meta = {{"generator", "native-sf"},
            {"prompt_version", "native-sf.v1"},
            {"sf_kind", std::string(to_string(kind))},
            {"seed", std::to_string(seed)}};
  switch (kind) {
    case SfCorruptionKind::TokenTypo: m.description = sf_detail::typo(description, rng, m.meta); break;
    case SfCorruptionKind::DelimiterCorruption: m.description = sf_detail::delimiter(description, rng, m.meta); break;
    case SfCorruptionKind::WhitespaceCorruption: m.description = sf_detail::whitespace(description, rng, m.meta); break;
    case SfCorruptionKind::ExampleBlockCorruption:
      m.description = sf_detail::example_block(description, rng, m.meta);
      break;
  }
  if (m.description == description)
    throw Error(ErrorKind::NotApplicable, "corruption left the description unchanged",
                {{"kind", std::string(to_string(kind))}});
  return m;
}

/// Chooses a kind uniformly among those applicable to the description.
inline Mutant mutate_sf_any(std::string_view description, std::uint64_t seed, std::string task_id = {}) {
  Rng rng(fnv1a64(description, mix_seed(seed, "sf-kind")));
  std::vector<SfCorruptionKind> order(kSfKinds.begin(), kSfKinds.end());
  rng.shuffle(order);
  for (auto kind : order) {
    try {
      return mutate_sf(description, seed, kind, task_id);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotApplicable) throw;
    }
  }
  throw Error(ErrorKind::NotApplicable, "no SF corruption kind applies", {{"task_id", task_id}});
}

// ---------------------------------------------------------------------------
// LLM-generated mutations

inline constexpr std::string_view kRefusalSentinel = "NO_MUTATION";

inline std::string mutation_template_name(DefectType d) {
  switch (d) {
    case DefectType::LV: return "mutate_lv";
    case DefectType::US: return "mutate_us";
    case DefectType::SF: return "mutate_sf";
    case DefectType::Clean: break;
  }
  throw Error(ErrorKind::PreconditionViolation, "CLEAN is not a mutation target");
}

/// Extracts the single fenced block of a mutation reply.
inline std::string parse_mutation_reply(std::string_view reply) {
  const auto blocks = find_fenced_blocks(reply);
  if (blocks.empty() && reply.find(kRefusalSentinel) != std::string_view::npos)
    throw Error(ErrorKind::RefusedMutation, "model reports no applicable transformation");
  if (blocks.size() != 1)
    throw Error(ErrorKind::UnparseableReply,
                fmt::format("expected exactly one fenced block, found {}", blocks.size()),
                {{"raw_reply", std::string(reply.substr(0, 500))}});
  if (trim(blocks.front().body).empty())
    throw Error(ErrorKind::UnparseableReply, "fenced block is empty");
  return blocks.front().body;
}

struct MutationRequestOptions {
  std::uint64_t seed = 0;
  int attempt = 1;
  std::string template_version = "v1";
  Decoding decoding{0.0, 4096};
};

inline Mutant request_mutation(const Task& task, DefectType defect, Provider& provider, const TemplateStore& templates,
                               const MutationRequestOptions& opt = {}) {
  if (defect == DefectType::Clean)
    throw Error(ErrorKind::PreconditionViolation, "CLEAN is not a mutation target", {{"task_id", task.id}});
  const auto tmpl = templates.load(mutation_template_name(defect), opt.template_version);
  Rng rng(mix_seed(opt.seed, task.id + "#" + std::string(to_string(defect)) + "#" + std::to_string(opt.attempt)));
  const auto lv_count = 1 + rng.below(5);
  const auto prompt = tmpl.render({{"description", task.description}, {"count", std::to_string(lv_count)}});
  const auto reply = provider.complete({prompt, opt.decoding});

  Mutant m;
  m.task_id = task.id;
  m.defect_type = defect;
  m.origin = MutantOrigin::LLMGenerated;
  m.description = parse_mutation_reply(reply);
  m.meta = {{"generator", provider.id()},
            {"model", provider.model()},
            {"prompt_version", tmpl.id()},
            {"seed", std::to_string(opt.seed)},
            {"attempt", std::to_string(opt.attempt)}};
  if (defect == DefectType::LV) m.meta["lv_transformations"] = std::to_string(lv_count);
  return m;
}

// ---------------------------------------------------------------------------
// generate -> judge -> refine

inline constexpr std::size_t kUsLengthPercent = 115;

/// Structural checks applied before a mutant is sent to the judge.
inline std::optional<std::string> mutant_rejection(const Mutant& m, const Task& source) {
  if (m.defect_type == DefectType::Clean) return "mutant labelled CLEAN";
  if (trim(m.description).empty()) return "empty description";
  if (m.description == source.description) return "identical to source description";
  if (m.defect_type == DefectType::US &&
      m.description.size() * 100 > source.description.size() * kUsLengthPercent)
    return "US mutant longer than the original plus 15%";
  return std::nullopt;
}

struct SuiteOptions {
  double threshold = 0.85;
  int attempt_budget = 3;
  std::size_t parallelism = 4;
  std::vector<DefectType> defects{DefectType::LV, DefectType::US, DefectType::SF};
  bool native_sf = false;
  std::uint64_t seed = 0;
  bool allow_same_judge = false;
  std::string template_version = "v1";
};

struct ExhaustedCell {
  Benchmark benchmark;
  DefectType defect;
  double achieved_rate;
  int attempts;
};

struct SuiteResult {
  std::vector<Mutant> mutants;
  std::vector<Verdict> verdicts;
  QualityReport report;
  std::vector<ExhaustedCell> exhausted;
  std::vector<std::string> refused;   // "task#DEFECT" with no defective variant
  std::vector<std::string> rejected;  // final-round structural rejections
};

/// Runs the generation loop for every (benchmark, defect) cell. A cell is
/// regenerated for tasks whose mutant was rejected or judged non-compliant
/// until its compliance reaches the threshold or the attempt budget runs
/// out; exhausted cells are reported rather than thrown.
inline SuiteResult run_defect_suite(const std::vector<TaskSet>& corpora, Provider* mutator, Provider& judge,
                                    const TemplateStore& templates, const SuiteOptions& opt) {
  if (!(opt.threshold >= 0.0 && opt.threshold <= 1.0))
    throw Error(ErrorKind::PreconditionViolation, "threshold must lie in [0, 1]");
  if (opt.attempt_budget < 1) throw Error(ErrorKind::PreconditionViolation, "attempt budget must be positive");
  if (mutator && mutator->id() == judge.id() && !opt.allow_same_judge)
    throw Error(ErrorKind::ConfigError, "judge provider must differ from the mutation provider (" + judge.id() + ")");
  const auto judge_tmpl = templates.load("judge", opt.template_version);

  SuiteResult result;
  for (const auto& corpus : corpora) {
    for (auto defect : opt.defects) {
      if (defect == DefectType::Clean) throw Error(ErrorKind::PreconditionViolation, "CLEAN is not a mutation target");
      const bool native = defect == DefectType::SF && opt.native_sf;
      if (!native && !mutator)
        throw Error(ErrorKind::ConfigError, fmt::format("no mutation provider for {}", to_string(defect)));

      struct Slot {
        const Task* task = nullptr;
        std::optional<Mutant> mutant;
        std::vector<Verdict> verdicts;
        bool refused = false;
        bool compliant = false;
        std::string rejection;
      };
      std::vector<Slot> slots;
      for (const auto& t : corpus) {
        Slot s;
        s.task = &t;
        slots.push_back(std::move(s));
      }

      double rate = 1.0;
      int round = 1;
      for (;; ++round) {
        std::vector<std::size_t> pending;
        for (std::size_t i = 0; i < slots.size(); ++i)
          if (!slots[i].refused && !slots[i].compliant) pending.push_back(i);

        parallel_for(pending.size(), opt.parallelism, [&](std::size_t k) {
          auto& slot = slots[pending[k]];
          const auto& task = *slot.task;
          Mutant m;
          try {
            if (native) {
              m = mutate_sf_any(task.description, mix_seed(opt.seed, std::to_string(round)), task.id);
              m.meta["attempt"] = std::to_string(round);
            } else {
              m = request_mutation(task, defect, *mutator, templates,
                                   {opt.seed, round, opt.template_version, Decoding{0.0, 4096}});
            }
          } catch (const Error& e) {
            if (e.kind() == ErrorKind::RefusedMutation || e.kind() == ErrorKind::NotApplicable) {
              slot.refused = true;
              slot.mutant.reset();
              return;
            }
            if (e.kind() != ErrorKind::UnparseableReply) throw;
            slot.rejection = e.what();
            return;
          }
          if (auto why = mutant_rejection(m, task)) {
            slot.rejection = *why;
            return;
          }
          std::vector<Verdict> verdicts;
          verdicts.push_back(judge_instance(m, task, compliance_criterion(defect), judge, judge_tmpl));
          verdicts.push_back(judge_instance(m, task, Criterion::Naturalness, judge, judge_tmpl));
          slot.compliant = verdicts.front().score == 1;
          slot.rejection.clear();
          slot.mutant = std::move(m);
          slot.verdicts = std::move(verdicts);
        });

        std::size_t applicable = 0, compliant = 0;
        for (const auto& s : slots) {
          if (s.refused) continue;
          ++applicable;
          if (s.compliant) ++compliant;
        }
        rate = applicable ? double(compliant) / double(applicable) : 1.0;
        if (rate >= opt.threshold || round >= opt.attempt_budget) break;
      }
      if (rate < opt.threshold) result.exhausted.push_back({corpus.benchmark(), defect, rate, round});

      for (const auto& s : slots) {
        const auto key = s.task->id + "#" + std::string(to_string(defect));
        if (s.refused) {
          result.refused.push_back(key);
          continue;
        }
        if (!s.rejection.empty() && !s.mutant) result.rejected.push_back(key + ": " + s.rejection);
        if (!s.mutant) continue;
        result.mutants.push_back(*s.mutant);
        result.verdicts.insert(result.verdicts.end(), s.verdicts.begin(), s.verdicts.end());
      }
    }
  }
  result.report = quality_report(result.verdicts);
  return result;
}

/// As run_defect_suite, but an exhausted cell is an error.
inline SuiteResult generate_defect_suite(const std::vector<TaskSet>& corpora, Provider* mutator, Provider& judge,
                                         const TemplateStore& templates, const SuiteOptions& opt) {
  auto result = run_defect_suite(corpora, mutator, judge, templates, opt);
  if (!result.exhausted.empty()) {
    const auto& c = result.exhausted.front();
    throw Error(ErrorKind::BudgetExhausted,
                fmt::format("{} x {} reached compliance {:.3f} < {:.2f} after {} attempts", to_string(c.benchmark),
                            to_string(c.defect), c.achieved_rate, opt.threshold, c.attempts),
                {{"benchmark", std::string(to_string(c.benchmark))},
                 {"defect", std::string(to_string(c.defect))},
                 {"achieved_rate", c.achieved_rate}});
  }
  return result;
}

}  // namespace specprobe
