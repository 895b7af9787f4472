// specprobe command-line entry point.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specprobe/corpus_import.hpp"
#include "specprobe/dataset.hpp"
#include "specprobe/detector.hpp"
#include "specprobe/detector_endpoint.hpp"
#include "specprobe/harness.hpp"
#include "specprobe/http_provider.hpp"
#include "specprobe/metrics.hpp"
#include "specprobe/mutator.hpp"
#include "specprobe/report.hpp"
#include "specprobe/sandbox.hpp"

namespace fs = std::filesystem;
using namespace specprobe;

namespace {

constexpr std::string_view kVersion = "0.1.0";

struct Globals {
  std::string run = "run";
  bool offline = false;
  std::uint64_t seed = 0;
  std::size_t workers = 4;
  double timeout_secs = 20;
  std::string providers;
  std::string cache = "record";
  std::vector<std::string> argv;
};

Error missing_stage(std::string_view stage, const fs::path& path) {
  return Error(ErrorKind::MissingStage, "missing stage: " + std::string(stage), {{"path", path.string()}});
}

fs::path require(const fs::path& path, std::string_view stage) {
  if (!fs::exists(path)) throw missing_stage(stage, path);
  return path;
}

std::string file_hash(const fs::path& p) {
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = fnv1a64("");
    for (const auto& f : files) h = fnv1a64(fs::relative(f, p).string() + read_file(f), h);
    return hex64(h);
  }
  return fs::exists(p) ? hex64(fnv1a64(read_file(p))) : std::string("absent");
}

/// manifests/<stage>.json: inputs and outputs with content hashes, the
/// configuration and versions. No timestamps, so reruns are byte-identical.
void write_manifest(const Globals& g, const std::string& stage, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, Json config) {
  const fs::path run(g.run);
  auto hashes = [&](const std::vector<fs::path>& ps) {
    Json j = Json::object();
    for (const auto& p : ps) j[fs::relative(p, run).generic_string()] = file_hash(p);
    return j;
  };
  std::vector<std::string> templates;
  if (fs::exists(asset_root() / "templates"))
    for (const auto& e : fs::directory_iterator(asset_root() / "templates"))
      templates.push_back(e.path().filename().string() + ":" + file_hash(e.path()));
  std::sort(templates.begin(), templates.end());
  config["offline"] = g.offline;
  config["seed"] = g.seed;
  const Json m{{"stage", stage},
               {"argv", g.argv},
               {"config", config},
               {"inputs", hashes(inputs)},
               {"outputs", hashes(outputs)},
               {"versions", {{"specprobe", kVersion}, {"templates", templates}}}};
  write_file_atomic(run / "manifests" / (stage + ".json"), m.dump(2) + "\n");
}

std::vector<TaskSet> load_tasks(const Globals& g) {
  const auto dir = fs::path(g.run) / "tasks";
  std::vector<TaskSet> out;
  for (auto b : kBenchmarks) {
    const auto p = dir / (slug(b) + ".jsonl");
    if (fs::exists(p)) out.push_back(load_benchmark(p, b));
  }
  if (out.empty()) throw missing_stage("import", dir);
  return out;
}

std::map<std::string, const Task*> task_index(const std::vector<TaskSet>& corpora) {
  std::map<std::string, const Task*> idx;
  for (const auto& c : corpora)
    for (const auto& t : c) idx[t.id] = &t;
  return idx;
}

std::vector<fs::path> task_files(const Globals& g) {
  std::vector<fs::path> out;
  for (auto b : kBenchmarks) {
    const auto p = fs::path(g.run) / "tasks" / (slug(b) + ".jsonl");
    if (fs::exists(p)) out.push_back(p);
  }
  return out;
}

std::vector<ProviderHandle> provider_configs(const Globals& g) {
  fs::path path = g.providers;
  if (path.empty()) {
    if (const char* env = std::getenv("SPECPROBE_PROVIDERS"); env && *env) path = env;
    else path = asset_root() / "config" / "providers.json";
  }
  if (!fs::exists(path)) throw Error(ErrorKind::ConfigError, "provider config not found: " + path.string());
  return load_provider_configs(path);
}

std::shared_ptr<Provider> remote_provider(const Globals& g, const std::string& id) {
  if (g.offline) throw Error(ErrorKind::ConfigError, "remote provider '" + id + "' requested in offline mode");
  const auto all = provider_configs(g);
  return make_provider(find_provider(all, id), fs::path(g.run) / "cache", parse_cache_mode(g.cache));
}

std::vector<Json> read_values(const fs::path& p) {
  std::vector<Json> out;
  for (auto& r : read_jsonl(p)) out.push_back(std::move(r.value));
  return out;
}

std::vector<Verdict> load_verdicts(const fs::path& p) {
  std::vector<Verdict> out;
  for (const auto& j : read_values(p)) out.push_back(verdict_from_json(j));
  return out;
}

std::vector<GenerationResult> load_generations(const fs::path& p) {
  std::vector<GenerationResult> out;
  for (const auto& r : read_jsonl(p)) out.push_back(generation_from_json(r.value, r.line_no));
  return out;
}

std::vector<ExecutionOutcome> load_outcomes(const fs::path& p) {
  std::vector<ExecutionOutcome> out;
  for (const auto& r : read_jsonl(p)) out.push_back(outcome_from_json(r.value, r.line_no));
  return out;
}

template <class T, class F>
std::string jsonl_of(const std::vector<T>& xs, F to_json) {
  std::vector<Json> rows;
  for (const auto& x : xs) rows.push_back(to_json(x));
  return to_jsonl(rows);
}

std::vector<DefectType> parse_defects(const std::vector<std::string>& raw) {
  std::vector<DefectType> out;
  for (const auto& item : raw)
    for (const auto& s : split(item, ',')) {
      if (trim(s).empty()) continue;
      const auto d = parse_defect_type(trim(s));
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    }
  return out;
}

std::vector<Benchmark> selected_benchmarks(const std::vector<std::string>& raw, const std::vector<TaskSet>& corpora) {
  std::vector<Benchmark> out;
  for (const auto& item : raw)
    for (const auto& s : split(item, ','))
      if (!trim(s).empty() && trim(s) != "all") out.push_back(parse_benchmark(trim(s)));
  if (out.empty())
    for (const auto& c : corpora) out.push_back(c.benchmark());
  return out;
}

// ---------------------------------------------------------------------------
// stages

struct ImportArgs {
  std::string benchmark, source, format = "upstream";
  std::size_t limit = 0;
};

void cmd_import(const Globals& g, const ImportArgs& a) {
  const auto b = parse_benchmark(a.benchmark);
  const auto text = read_file(a.source);
  ImportResult res;
  if (a.format == "canonical") {
    res.tasks = parse_benchmark_jsonl(text, b);
  } else if (a.format == "upstream") {
    switch (b) {
      case Benchmark::HumanEval: res = import_humaneval(text); break;
      case Benchmark::MBPP: res = import_mbpp(text); break;
      case Benchmark::LiveCodeBench: res = import_livecodebench(text); break;
    }
  } else {
    throw Error(ErrorKind::ConfigError, "--format must be upstream or canonical");
  }
  auto tasks = res.tasks.tasks();
  if (a.limit && tasks.size() > a.limit) tasks.resize(a.limit);
  const TaskSet set(b, std::move(tasks));
  const auto out = fs::path(g.run) / "tasks" / (slug(b) + ".jsonl");
  save_benchmark(out, set);
  for (const auto& n : res.notes) std::cerr << "note: " << n << "\n";
  std::cout << fmt::format("imported {} {} tasks ({} skipped) -> {}\n", set.size(), to_string(b), res.skipped,
                           out.string());
  write_manifest(g, "import-" + slug(b), {}, {out},
                 {{"benchmark", to_string(b)}, {"source_hash", hex64(fnv1a64(text))}, {"format", a.format},
                  {"limit", a.limit}});
}

struct MutateArgs {
  std::vector<std::string> benchmarks, defects{"lv,us,sf"};
  bool native = false, allow_same_judge = false;
  std::string provider, judge, template_version = "v1";
  double threshold = 0.85;
  int budget = 3;
};

/// Keeps records of (benchmark, defect) cells not touched by this run.
template <class T, class KeyFn>
std::vector<T> merge_cells(std::vector<T> old, const std::vector<T>& fresh, KeyFn cell_of,
                           const std::set<std::pair<Benchmark, DefectType>>& replaced) {
  std::vector<T> out;
  for (auto& x : old)
    if (auto c = cell_of(x); !c || !replaced.count(*c)) out.push_back(std::move(x));
  out.insert(out.end(), fresh.begin(), fresh.end());
  return out;
}

void cmd_mutate(const Globals& g, const MutateArgs& a) {
  const auto corpora = load_tasks(g);
  const auto benches = selected_benchmarks(a.benchmarks, corpora);
  const auto defects = parse_defects(a.defects);
  if (defects.empty()) throw Error(ErrorKind::ConfigError, "no defect types selected");
  for (auto d : defects)
    if (d == DefectType::Clean) throw Error(ErrorKind::ConfigError, "CLEAN is not a mutation target");
  const bool native = a.native || g.offline;
  const bool llm_needed =
      std::any_of(defects.begin(), defects.end(), [&](DefectType d) { return d != DefectType::SF || !native; });
  if (g.offline && llm_needed)
    throw Error(ErrorKind::ConfigError, "offline mode supports only native SF mutations (--defects sf)");

  std::vector<TaskSet> selected;
  for (const auto& c : corpora)
    if (std::find(benches.begin(), benches.end(), c.benchmark()) != benches.end()) selected.push_back(c);
  if (selected.empty()) throw missing_stage("import", fs::path(g.run) / "tasks");

  std::shared_ptr<Provider> mutator;
  if (llm_needed) {
    if (a.provider.empty()) throw Error(ErrorKind::ConfigError, "--provider is required for LLM mutations");
    mutator = remote_provider(g, a.provider);
  }
  const bool judged = g.offline || !a.judge.empty();
  if (llm_needed && !judged) throw Error(ErrorKind::ConfigError, "--judge is required for LLM mutations");

  std::vector<Mutant> mutants;
  std::vector<Verdict> verdicts;
  std::vector<ExhaustedCell> exhausted;
  std::vector<std::string> refused;
  if (judged) {
    auto judge = g.offline ? make_stub_judge() : remote_provider(g, a.judge);
    SuiteOptions opt;
    opt.threshold = a.threshold;
    opt.attempt_budget = a.budget;
    opt.parallelism = g.workers;
    opt.defects = defects;
    opt.native_sf = native;
    opt.seed = g.seed;
    opt.allow_same_judge = a.allow_same_judge;
    opt.template_version = a.template_version;
    auto res = run_defect_suite(selected, mutator.get(), *judge, TemplateStore(), opt);
    mutants = std::move(res.mutants);
    verdicts = std::move(res.verdicts);
    exhausted = std::move(res.exhausted);
    refused = std::move(res.refused);
  } else {
    for (const auto& c : selected)
      for (const auto& t : c) {
        try {
          mutants.push_back(mutate_sf_any(t.description, g.seed, t.id));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::NotApplicable) throw;
          refused.push_back(t.id + "#SF");
        }
      }
  }

  std::set<std::pair<Benchmark, DefectType>> cells;
  for (const auto& c : selected)
    for (auto d : defects) cells.insert({c.benchmark(), d});
  const auto idx = task_index(corpora);
  auto mutant_cell = [&](const Mutant& m) -> std::optional<std::pair<Benchmark, DefectType>> {
    const auto it = idx.find(m.task_id);
    if (it == idx.end()) return std::nullopt;
    return std::make_pair(it->second->benchmark, m.defect_type);
  };
  auto verdict_cell = [](const Verdict& v) -> std::optional<std::pair<Benchmark, DefectType>> {
    return std::make_pair(v.benchmark, v.defect_type);
  };

  const fs::path run(g.run);
  const auto mpath = run / "mutants.jsonl", vpath = run / "verdicts.jsonl";
  auto all_mutants = merge_cells(fs::exists(mpath) ? load_mutants(mpath) : std::vector<Mutant>{}, mutants, mutant_cell, cells);
  write_file_atomic(mpath, mutants_to_jsonl(all_mutants));
  std::vector<fs::path> outputs{mpath};
  if (judged) {
    auto all_verdicts = merge_cells(fs::exists(vpath) ? load_verdicts(vpath) : std::vector<Verdict>{}, verdicts,
                                    verdict_cell, cells);
    write_file_atomic(vpath, jsonl_of(all_verdicts, verdict_to_json));
    outputs.push_back(vpath);
  }
  std::cout << fmt::format("{} mutants ({} without a defective variant) -> {}\n", mutants.size(), refused.size(),
                           mpath.string());
  Json cfg{{"benchmarks", Json::array()}, {"defects", Json::array()}, {"native", native},
           {"threshold", a.threshold}, {"budget", a.budget}, {"provider", a.provider},
           {"judge", g.offline ? "stub-judge" : a.judge}, {"template_version", a.template_version}};
  for (auto b : benches) cfg["benchmarks"].push_back(to_string(b));
  for (auto d : defects) cfg["defects"].push_back(to_string(d));
  write_manifest(g, "mutate", task_files(g), outputs, cfg);

  if (!exhausted.empty()) {
    Json cells_json = Json::array();
    for (const auto& c : exhausted)
      cells_json.push_back({{"benchmark", to_string(c.benchmark)}, {"defect", to_string(c.defect)},
                            {"achieved_rate", c.achieved_rate}, {"attempts", c.attempts}});
    const auto& c = exhausted.front();
    throw Error(ErrorKind::BudgetExhausted,
                fmt::format("{} x {} reached compliance {} below {} after {} attempts; refine the prompt",
                            to_string(c.benchmark), to_string(c.defect), fixed(c.achieved_rate, 3),
                            fixed(a.threshold, 2), c.attempts),
                {{"cells", cells_json}});
  }
}

void cmd_judge(const Globals& g, const std::string& judge_id, const std::string& version) {
  const fs::path run(g.run);
  const auto corpora = load_tasks(g);
  const auto mutants = load_mutants(require(run / "mutants.jsonl", "mutate"));
  const auto idx = task_index(corpora);
  if (!g.offline && judge_id.empty()) throw Error(ErrorKind::ConfigError, "--judge is required");
  auto judge = g.offline ? make_stub_judge() : remote_provider(g, judge_id);
  const auto tmpl = TemplateStore().load("judge", version);
  std::vector<std::array<std::optional<Verdict>, 2>> slots(mutants.size());
  parallel_for(mutants.size(), g.workers, [&](std::size_t i) {
    const auto& m = mutants[i];
    const auto it = idx.find(m.task_id);
    if (it == idx.end())
      throw Error(ErrorKind::DanglingMutant, "mutant references unknown task " + m.task_id, {{"task_id", m.task_id}});
    slots[i][0] = judge_instance(m, *it->second, compliance_criterion(m.defect_type), *judge, tmpl);
    slots[i][1] = judge_instance(m, *it->second, Criterion::Naturalness, *judge, tmpl);
  });
  std::vector<Verdict> verdicts;
  for (auto& s : slots)
    for (auto& v : s) verdicts.push_back(std::move(*v));
  const auto report = quality_report(verdicts);
  write_file_atomic(run / "verdicts.jsonl", jsonl_of(verdicts, verdict_to_json));
  std::cout << render_quality_text(report);
  write_manifest(g, "judge", {run / "mutants.jsonl"}, {run / "verdicts.jsonl"},
                 {{"judge", g.offline ? "stub-judge" : judge_id}, {"template", "judge." + version}});
}

void cmd_build_dataset(const Globals& g, bool no_filter) {
  const fs::path run(g.run);
  const auto corpora = load_tasks(g);
  const auto mutants = load_mutants(require(run / "mutants.jsonl", "mutate"));
  std::vector<Verdict> verdicts;
  if (!no_filter) verdicts = load_verdicts(require(run / "verdicts.jsonl", "judge"));
  AssembleOptions opt;
  opt.require_compliance = !no_filter;
  const auto res = assemble(corpora, mutants, verdicts, opt);
  write_file_atomic(run / "dataset.jsonl", examples_to_jsonl(res.examples));
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << fmt::format("{} examples ({} mutants filtered out):", res.examples.size(), res.filtered_out);
  for (const auto& [l, n] : res.counts) std::cout << " " << to_string(l) << "=" << n;
  std::cout << "\n";
  auto inputs = task_files(g);
  inputs.push_back(run / "mutants.jsonl");
  if (!no_filter) inputs.push_back(run / "verdicts.jsonl");
  write_manifest(g, "build-dataset", inputs, {run / "dataset.jsonl"}, {{"compliance_filter", !no_filter}});
}

void cmd_split(const Globals& g, const std::string& ratios, bool group) {
  const fs::path run(g.run);
  const auto examples = load_examples(require(run / "dataset.jsonl", "build-dataset"));
  SplitSpec spec;
  spec.seed = g.seed;
  spec.group_by_task = group;
  const auto parts = split(ratios, ',');
  if (parts.size() != 3) throw Error(ErrorKind::InvalidSplitSpec, "--ratios needs three comma-separated values");
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      spec.ratios[i] = std::stod(parts[i]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidSplitSpec, "bad ratio '" + parts[i] + "'");
    }
  }
  const auto s = stratified_split(examples, spec);
  const auto dir = run / "splits";
  std::vector<fs::path> outputs;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto p = dir / (std::string(kSplitNames[k]) + ".jsonl");
    write_file_atomic(p, examples_to_jsonl(s.parts[k]));
    outputs.push_back(p);
  }
  write_file_atomic(dir / "manifest.json", split_manifest(s, spec).dump(2) + "\n");
  outputs.push_back(dir / "manifest.json");
  std::cout << fmt::format("train={} val={} test={}\n", s.train().size(), s.val().size(), s.test().size());
  write_manifest(g, "split", {run / "dataset.jsonl"}, outputs, {{"ratios", spec.ratios}, {"group_by_task", group}});
}

void cmd_sample_review(const Globals& g, std::size_t n) {
  const fs::path run(g.run);
  const auto corpora = load_tasks(g);
  const auto mutants = load_mutants(require(run / "mutants.jsonl", "mutate"));
  const auto s = sample_for_review(mutants, corpora, n, g.seed);
  const auto dir = run / "review";
  write_file_atomic(dir / "sheet.txt", render_review_sheet(s));
  Json items = Json::array();
  for (const auto& it : s.items) items.push_back(it.mutant.key());
  write_file_atomic(dir / "sample.json", Json{{"n", n}, {"seed", g.seed}, {"items", items}}.dump(2) + "\n");
  std::cout << fmt::format("{} review items -> {}\n", s.items.size(), (dir / "sheet.txt").string());
  write_manifest(g, "sample-review", {run / "mutants.jsonl"}, {dir / "sheet.txt", dir / "sample.json"}, {{"n", n}});
}

struct GenerateArgs {
  std::vector<std::string> providers;
  std::vector<std::string> conditions{"clean,lv,us,sf"};
  std::string template_version = "v1";
};

void cmd_generate(const Globals& g, const GenerateArgs& a) {
  const fs::path run(g.run);
  const auto corpora = load_tasks(g);
  const auto conditions = parse_defects(a.conditions);
  const bool needs_mutants =
      std::any_of(conditions.begin(), conditions.end(), [](DefectType d) { return d != DefectType::Clean; });
  std::vector<Mutant> mutants;
  if (needs_mutants) mutants = load_mutants(require(run / "mutants.jsonl", "mutate"));

  struct Job {
    const Task* task;
    DefectType condition;
    std::string description;
  };
  std::vector<Job> jobs;
  std::map<std::string, std::vector<const Mutant*>> by_task;
  for (const auto& m : mutants) by_task[m.task_id].push_back(&m);
  for (const auto& c : corpora)
    for (const auto& t : c)
      for (auto cond : conditions) {
        if (cond == DefectType::Clean) {
          jobs.push_back({&t, cond, t.description});
          continue;
        }
        for (const auto* m : by_task[t.id])
          if (m->defect_type == cond) jobs.push_back({&t, cond, m->description});
      }

  const auto tmpl = TemplateStore().load("generate", a.template_version);
  const auto registry = DelimiterRegistry::load_default();
  std::vector<std::shared_ptr<Provider>> providers;
  std::vector<int> max_tokens;
  if (g.offline) {
    // Replies with the task's reference solution.
    providers.push_back(nullptr);
    max_tokens.push_back(4096);
  } else {
    if (a.providers.empty()) throw Error(ErrorKind::ConfigError, "--provider is required (or use --offline)");
    const auto all = provider_configs(g);
    for (const auto& id : a.providers) {
      providers.push_back(remote_provider(g, id));
      max_tokens.push_back(find_provider(all, id).max_tokens);
    }
  }

  std::vector<GenerationResult> results;
  std::vector<Json> gaps;
  std::mutex mu;
  for (std::size_t p = 0; p < providers.size(); ++p) {
    std::vector<std::optional<GenerationResult>> slots(jobs.size());
    parallel_for(jobs.size(), g.workers, [&](std::size_t i) {
      const auto& job = jobs[i];
      std::shared_ptr<Provider> prov = providers[p];
      if (!prov) {
        const auto reply = "```python\n" + job.task->reference_solution.value_or("") + "\n```\n";
        prov = std::make_shared<StubProvider>("stub-reference", "stub-reference",
                                              [reply](const CompletionRequest&) { return reply; });
      }
      try {
        slots[i] = generate_solution(job.description, *job.task, job.condition, *prov, tmpl, registry,
                                     Decoding{0.0, max_tokens[p]});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::ProviderError) throw;
        std::lock_guard lock(mu);
        gaps.push_back({{"task_id", job.task->id}, {"condition", to_string(job.condition)},
                        {"model", prov->model()}, {"error", e.to_json()}});
      }
    });
    for (auto& s : slots)
      if (s) results.push_back(std::move(*s));
  }

  const auto path = run / "generations.jsonl";
  std::set<std::tuple<std::string, DefectType, std::string>> fresh;
  for (const auto& r : results) fresh.insert({r.task_id, r.condition, r.model});
  std::vector<GenerationResult> merged;
  if (fs::exists(path))
    for (auto& r : load_generations(path))
      if (!fresh.count({r.task_id, r.condition, r.model})) merged.push_back(std::move(r));
  merged.insert(merged.end(), results.begin(), results.end());
  write_file_atomic(path, jsonl_of(merged, generation_to_json));
  write_file_atomic(run / "generation_gaps.jsonl", to_jsonl(gaps));
  std::cout << fmt::format("{} generations ({} failed requests) -> {}\n", results.size(), gaps.size(), path.string());
  Json cfg{{"providers", g.offline ? Json::array({"stub-reference"}) : Json(a.providers)},
           {"template", "generate." + a.template_version},
           {"conditions", Json::array()}};
  for (auto c : conditions) cfg["conditions"].push_back(to_string(c));
  auto inputs = task_files(g);
  if (needs_mutants) inputs.push_back(run / "mutants.jsonl");
  write_manifest(g, "generate", inputs, {path, run / "generation_gaps.jsonl"}, cfg);
}

void cmd_execute(const Globals& g) {
  const fs::path run(g.run);
  const auto corpora = load_tasks(g);
  const auto gens = load_generations(require(run / "generations.jsonl", "generate"));
  SandboxOptions opt;
  opt.timeout_secs = g.timeout_secs;
  const auto outcomes = execute_all(gens, task_index(corpora), opt, g.workers);
  write_file_atomic(run / "outcomes.jsonl", jsonl_of(outcomes, outcome_to_json));
  std::map<OutcomeCategory, std::size_t> counts;
  for (const auto& o : outcomes) ++counts[o.category];
  std::cout << fmt::format("{} outcomes:", outcomes.size());
  for (const auto& [c, n] : counts) std::cout << " " << to_string(c) << "=" << n;
  std::cout << "\n";
  // duration_ms varies between runs; the manifest hashes only the stable fields.
  std::vector<Json> stable;
  for (const auto& o : outcomes) {
    auto j = outcome_to_json(o);
    j.erase("duration_ms");
    j.erase("stderr_excerpt");
    stable.push_back(j);
  }
  write_manifest(g, "execute", {run / "generations.jsonl"}, {},
                 {{"timeout_secs", g.timeout_secs}, {"outcome_hash", hex64(fnv1a64(to_jsonl(stable)))}});
}

void cmd_evaluate(const Globals& g) {
  const fs::path run(g.run);
  const auto corpora = load_tasks(g);
  const auto outcomes = load_outcomes(require(run / "outcomes.jsonl", "execute"));
  std::map<std::string, Benchmark> bench;
  for (const auto& c : corpora)
    for (const auto& t : c) bench[t.id] = t.benchmark;
  const auto cells = robustness_cells(outcomes, bench);
  Json arr = Json::array();
  for (const auto& c : cells) arr.push_back(robustness_cell_to_json(c));
  const auto out = run / "metrics" / "robustness.json";
  write_file_atomic(out, arr.dump(2) + "\n");
  std::cout << render_robustness_text(emit_robustness(cells));
  write_manifest(g, "evaluate", {run / "outcomes.jsonl"}, {out}, Json::object());
}

struct DetectArgs {
  std::string backend = "heuristic", name, row, input = "test", exemplars;
};

std::unique_ptr<DetectorBackend> make_backend(const Globals& g, const std::string& spec, const std::string& exemplars) {
  if (spec == "heuristic") return std::make_unique<HeuristicBackend>();
  if (spec.rfind("fixed:", 0) == 0) return std::make_unique<FixedBackend>(parse_defect_type(spec.substr(6)));
  if (g.offline) throw Error(ErrorKind::ConfigError, "backend '" + spec + "' needs the network (offline mode)");
  if (spec.rfind("endpoint:", 0) == 0) return std::make_unique<EndpointBackend>(spec.substr(9));
  for (const auto& [prefix, mode] : {std::pair{std::string("llm:"), PromptMode::ZeroShot},
                                     std::pair{std::string("llm-fewshot:"), PromptMode::FewShot}}) {
    if (spec.rfind(prefix, 0) != 0) continue;
    std::vector<FewShotExemplar> ex;
    if (mode == PromptMode::FewShot) ex = exemplars.empty() ? default_exemplars() : load_exemplars(exemplars);
    return std::make_unique<RemoteLlmBackend>(remote_provider(g, spec.substr(prefix.size())), mode, ex);
  }
  throw Error(ErrorKind::ConfigError,
              "unknown backend '" + spec + "' (heuristic, fixed:LABEL, llm:ID, llm-fewshot:ID, endpoint:URL)");
}

std::string safe_name(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  return s;
}

void cmd_detect(const Globals& g, const DetectArgs& a) {
  const fs::path run(g.run);
  fs::path input = a.input == "dataset" ? run / "dataset.jsonl" : run / "splits" / (a.input + ".jsonl");
  require(input, a.input == "dataset" ? "build-dataset" : "split");
  const auto examples = load_examples(input);
  std::vector<DescriptionItem> items;
  for (const auto& e : examples) items.push_back({e.id, e.text, e.benchmark, e.label});
  auto backend = make_backend(g, a.backend, a.exemplars);
  const auto ev = evaluate_detector(items, *backend, g.workers);
  const auto name = safe_name(a.name.empty() ? backend->name() : a.name);
  const auto dir = run / "detect" / name;
  write_file_atomic(dir / "predictions.jsonl", jsonl_of(ev.predictions, prediction_to_json));
  Json errors = Json::array();
  for (const auto& e : ev.errors) errors.push_back({{"id", e.id}, {"error", e.error}});
  Json m = metrics_to_json(ev.metrics);
  m["backend"] = backend->name();
  m["row"] = a.row.empty() ? backend->name() : a.row;
  m["seed"] = g.seed;
  m["input"] = a.input;
  m["confusion"] = confusion_to_json(ev.matrix);
  m["errors"] = errors;
  write_file_atomic(dir / "metrics.json", m.dump(2) + "\n");
  std::cout << render_detector_text({{backend->name(), ev.metrics, 1, ev.matrix}});
  if (!ev.errors.empty()) std::cerr << fmt::format("warning: {} items could not be classified\n", ev.errors.size());
  write_manifest(g, "detect-" + name, {input}, {dir / "predictions.jsonl", dir / "metrics.json"},
                 {{"backend", a.backend}, {"row", m["row"]}});
}

void cmd_flag_clean(const Globals& g, const std::string& backend_spec, const std::string& source,
                    const std::string& exemplars) {
  const fs::path run(g.run);
  std::vector<DescriptionItem> items;
  std::vector<fs::path> inputs;
  if (source == "tasks") {
    for (const auto& c : load_tasks(g))
      for (const auto& t : c) items.push_back({t.id, t.description, t.benchmark, DefectType::Clean});
    inputs = task_files(g);
  } else {
    const auto p = require(run / "splits" / (source + ".jsonl"), "split");
    for (const auto& e : load_examples(p))
      if (e.label == DefectType::Clean) items.push_back({e.id, e.text, e.benchmark, DefectType::Clean});
    inputs.push_back(p);
  }
  auto backend = make_backend(g, backend_spec, exemplars);
  const auto rep = flag_clean_set(items, *backend, g.workers);
  write_file_atomic(run / "flag_report.json", flag_report_to_json(rep).dump(2) + "\n");
  std::cout << render_specificity_text(rep.specificity);
  if (!rep.errors.empty()) std::cerr << fmt::format("warning: {} items could not be classified\n", rep.errors.size());
  write_manifest(g, "flag-clean", inputs, {run / "flag_report.json"}, {{"backend", backend_spec}, {"source", source}});
}

void cmd_report(const Globals& g) {
  const fs::path run(g.run);
  const auto dir = run / "reports";
  std::vector<fs::path> inputs, outputs;
  auto emit = [&](const std::string& stem, const std::string& csv, const std::string& text, const Json& json) {
    write_file_atomic(dir / (stem + ".csv"), csv);
    write_file_atomic(dir / (stem + ".txt"), text);
    write_file_atomic(dir / (stem + ".json"), json.dump(2) + "\n");
    for (auto ext : {".csv", ".txt", ".json"}) outputs.push_back(dir / (stem + ext));
  };
  auto note_missing = [&](const std::string& what, const fs::path& p) {
    std::cerr << fmt::format("warning: {} not found, {} report is empty\n", p.string(), what);
  };

  // Judge quality table.
  QualityReport quality;
  if (const auto p = run / "verdicts.jsonl"; fs::exists(p)) {
    quality = quality_report(load_verdicts(p));
    inputs.push_back(p);
  } else {
    note_missing("quality", p);
  }
  emit("quality", render_quality_csv(quality), render_quality_text(quality), quality_to_json(quality));

  // Robustness table and heatmap.
  std::vector<RobustnessCell> cells;
  if (const auto p = run / "metrics" / "robustness.json"; fs::exists(p)) {
    for (const auto& j : Json::parse(read_file(p))) cells.push_back(robustness_cell_from_json(j));
    inputs.push_back(p);
  } else {
    note_missing("robustness", p);
  }
  const auto table = emit_robustness(cells);
  emit("robustness", render_robustness_csv(table), render_robustness_text(table), robustness_to_json(table));

  // Detector table: runs sharing a row label are averaged.
  std::vector<DetectorRow> rows;
  if (const auto d = run / "detect"; fs::exists(d)) {
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(d))
      if (fs::exists(e.path() / "metrics.json")) runs.push_back(e.path() / "metrics.json");
    std::sort(runs.begin(), runs.end());
    std::vector<std::string> order;
    std::map<std::string, std::vector<DetectorMetrics>> by_row;
    std::map<std::string, LabelMatrix> pooled;
    for (const auto& p : runs) {
      const auto j = Json::parse(read_file(p));
      const auto row = j.value("row", j.value("backend", p.parent_path().filename().string()));
      if (!by_row.count(row)) order.push_back(row);
      by_row[row].push_back(metrics_from_json(j));
      LabelMatrix m;
      const auto& counts = j.at("confusion").at("counts");
      for (std::size_t r = 0; r < kLabels.size(); ++r)
        for (std::size_t c = 0; c < kLabels.size(); ++c) m.counts[r][c] = counts[r][c].get<std::int64_t>();
      pooled[row] += m;
      inputs.push_back(p);
    }
    for (const auto& r : order) rows.push_back({r, mean_metrics(by_row[r]), by_row[r].size(), pooled[r]});
  } else {
    note_missing("detector", d);
  }
  emit("detector", render_detector_csv(rows), render_detector_text(rows), detector_to_json(rows));

  // Clean-flagging tables.
  FlaggedAnalysis flagged;
  if (const auto p = run / "flag_report.json"; fs::exists(p)) {
    const auto rep = flag_report_from_json(Json::parse(read_file(p)));
    std::vector<ExecutionOutcome> outcomes;
    if (const auto o = run / "outcomes.jsonl"; fs::exists(o)) {
      outcomes = load_outcomes(o);
      inputs.push_back(o);
    }
    flagged = emit_flagged_analysis(rep, outcomes);
    inputs.push_back(p);
  } else {
    note_missing("flagged", p);
  }
  const auto fj = flagged_to_json(flagged);
  emit("flagged_t5", render_specificity_csv(flagged.table5), render_specificity_text(flagged.table5), fj["table5"]);
  emit("flagged_t6", render_table6_csv(flagged), render_table6_text(flagged), fj["table6"]);

  // Heatmap last: a zero baseline is an error for this report only.
  const auto heat = emit_heatmap(table);
  emit("heatmap", render_heatmap_csv(heat), render_heatmap_text(heat), heatmap_to_json(heat));

  std::cout << fmt::format("{} report files -> {}\n", outputs.size(), dir.string());
  write_manifest(g, "report", inputs, outputs, Json::object());
}

}  // namespace

int main(int argc, char** argv) {
  Globals g;
  for (int i = 1; i < argc; ++i) g.argv.emplace_back(argv[i]);

  CLI::App app{"specprobe: description-defect mutation, judging, Pass@1 evaluation and detection"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.add_option("--run", g.run, "Run directory");
  app.add_flag("--offline", g.offline, "Stub judge, stub generator, heuristic detector and native SF only");
  app.add_option("--seed", g.seed, "Seed for every randomized stage");
  app.add_option("--workers", g.workers, "Parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--timeout-secs", g.timeout_secs, "Per-execution timeout in seconds")->check(CLI::PositiveNumber);
  app.add_option("--providers", g.providers, "Provider config (JSON array)");
  app.add_option("--cache", g.cache, "Provider response cache: off, record or replay")
      ->check(CLI::IsMember({"off", "record", "replay"}));

  ImportArgs imp;
  auto* c_import = app.add_subcommand("import", "Import a benchmark into the run directory");
  c_import->add_option("--benchmark", imp.benchmark)->required();
  c_import->add_option("--source", imp.source, "Upstream or canonical JSONL file")->required()->check(CLI::ExistingFile);
  c_import->add_option("--format", imp.format)->check(CLI::IsMember({"upstream", "canonical"}));
  c_import->add_option("--limit", imp.limit, "Keep only the first N tasks");

  MutateArgs mut;
  auto* c_mutate = app.add_subcommand("mutate", "Generate defective descriptions");
  c_mutate->add_option("--benchmark", mut.benchmarks, "Benchmarks (default: all imported)");
  c_mutate->add_option("--defects", mut.defects, "Comma-separated defect types");
  c_mutate->add_flag("--native", mut.native, "Use the native SF operators");
  c_mutate->add_option("--provider", mut.provider, "Mutation provider id");
  c_mutate->add_option("--judge", mut.judge, "Judge provider id");
  c_mutate->add_option("--threshold", mut.threshold)->check(CLI::Range(0.0, 1.0));
  c_mutate->add_option("--budget", mut.budget, "Regeneration rounds per cell")->check(CLI::PositiveNumber);
  c_mutate->add_flag("--allow-same-judge", mut.allow_same_judge);
  c_mutate->add_option("--template-version", mut.template_version);

  std::string judge_id, judge_version = "v1";
  auto* c_judge = app.add_subcommand("judge", "Score mutants with the judge protocol");
  c_judge->add_option("--judge", judge_id, "Judge provider id");
  c_judge->add_option("--template-version", judge_version);

  bool no_filter = false;
  auto* c_dataset = app.add_subcommand("build-dataset", "Assemble the labeled dataset");
  c_dataset->add_flag("--no-compliance-filter", no_filter);

  std::string ratios = "0.8,0.1,0.1";
  bool group = false;
  auto* c_split = app.add_subcommand("split", "Stratified train/val/test split");
  c_split->add_option("--ratios", ratios);
  c_split->add_flag("--group-by-task", group, "Keep a task's original and mutants in one split");

  std::size_t review_n = 100;
  auto* c_review = app.add_subcommand("sample-review", "Stratified sample of mutants for manual review");
  c_review->add_option("--n", review_n);

  GenerateArgs gen;
  auto* c_generate = app.add_subcommand("generate", "Query code models on clean and mutated descriptions");
  c_generate->add_option("--provider", gen.providers, "Provider id (repeatable)");
  c_generate->add_option("--conditions", gen.conditions, "Comma-separated conditions");
  c_generate->add_option("--template-version", gen.template_version);

  auto* c_execute = app.add_subcommand("execute", "Run extracted solutions in the sandbox");
  auto* c_evaluate = app.add_subcommand("evaluate", "Compute Pass@1 cells");

  DetectArgs det;
  auto* c_detect = app.add_subcommand("detect", "Evaluate a detector backend on a labeled split");
  c_detect->add_option("--backend", det.backend);
  c_detect->add_option("--name", det.name, "Output directory name under detect/");
  c_detect->add_option("--row", det.row, "Report row label; runs sharing it are averaged");
  c_detect->add_option("--input", det.input, "train, val, test or dataset");
  c_detect->add_option("--exemplars", det.exemplars, "Few-shot exemplar file");

  std::string flag_backend = "heuristic", flag_source = "tasks", flag_exemplars;
  auto* c_flag = app.add_subcommand("flag-clean", "Run a detector over presumed-clean originals");
  c_flag->add_option("--backend", flag_backend);
  c_flag->add_option("--source", flag_source, "tasks or a split name");
  c_flag->add_option("--exemplars", flag_exemplars);

  auto* c_report = app.add_subcommand("report", "Render every report from the run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(g.run);
    if (*c_import) cmd_import(g, imp);
    else if (*c_mutate) cmd_mutate(g, mut);
    else if (*c_judge) cmd_judge(g, judge_id, judge_version);
    else if (*c_dataset) cmd_build_dataset(g, no_filter);
    else if (*c_split) cmd_split(g, ratios, group);
    else if (*c_review) cmd_sample_review(g, review_n);
    else if (*c_generate) cmd_generate(g, gen);
    else if (*c_execute) cmd_execute(g);
    else if (*c_evaluate) cmd_evaluate(g);
    else if (*c_detect) cmd_detect(g, det);
    else if (*c_flag) cmd_flag_clean(g, flag_backend, flag_source, flag_exemplars);
    else if (*c_report) cmd_report(g);
  } catch (const Error& e) {
    std::cerr << e.to_json().dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
