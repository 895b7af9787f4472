#pragma once

#include <fcntl.h>
#include <grp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "specprobe/corpus.hpp"
#include "specprobe/harness.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

enum class OutcomeCategory { Pass, WrongAnswer, RuntimeError, Timeout, ExtractionFailed, HarnessError };

inline std::string_view to_string(OutcomeCategory c) {
  switch (c) {
    case OutcomeCategory::Pass: return "Pass";
    case OutcomeCategory::WrongAnswer: return "WrongAnswer";
    case OutcomeCategory::RuntimeError: return "RuntimeError";
    case OutcomeCategory::Timeout: return "Timeout";
    case OutcomeCategory::ExtractionFailed: return "ExtractionFailed";
    case OutcomeCategory::HarnessError: return "HarnessError";
  }
  return "?";
}

inline OutcomeCategory parse_outcome_category(std::string_view s) {
  for (auto c : {OutcomeCategory::Pass, OutcomeCategory::WrongAnswer, OutcomeCategory::RuntimeError,
                 OutcomeCategory::Timeout, OutcomeCategory::ExtractionFailed, OutcomeCategory::HarnessError})
    if (to_string(c) == s) return c;
  throw Error(ErrorKind::MalformedRecord, "unknown outcome category '" + std::string(s) + "'");
}

struct ExecutionOutcome {
  std::string task_id;
  DefectType condition = DefectType::Clean;
  std::string model;
  bool passed = false;
  OutcomeCategory category = OutcomeCategory::HarnessError;
  std::int64_t duration_ms = 0;
  std::string stderr_excerpt;
};

inline Json outcome_to_json(const ExecutionOutcome& o) {
  return {{"task_id", o.task_id},         {"condition", to_string(o.condition)},
          {"model", o.model},             {"passed", o.passed},
          {"category", to_string(o.category)}, {"duration_ms", o.duration_ms},
          {"stderr_excerpt", o.stderr_excerpt}};
}

inline ExecutionOutcome outcome_from_json(const Json& j, std::size_t line = 0) {
  try {
    ExecutionOutcome o;
    o.task_id = j.at("task_id").get<std::string>();
    o.condition = parse_defect_type(j.at("condition").get<std::string>());
    o.model = j.at("model").get<std::string>();
    o.passed = j.at("passed").get<bool>();
    o.category = parse_outcome_category(j.at("category").get<std::string>());
    o.duration_ms = j.value("duration_ms", std::int64_t{0});
    o.stderr_excerpt = j.value("stderr_excerpt", std::string{});
    if (o.passed != (o.category == OutcomeCategory::Pass))
      throw Error(ErrorKind::MalformedRecord, "passed must equal category == Pass", {{"line", line}});
    return o;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("outcome record: ") + e.what(), {{"line", line}});
  }
}

struct SandboxOptions {
  double timeout_secs = 20.0;
  std::uint64_t memory_bytes = 2ull << 30;
  std::size_t output_cap = 1u << 20;
  std::string interpreter = "python3";
  bool isolate_network = true;
  bool drop_privileges = true;  // only effective when running as root
  std::size_t excerpt_bytes = 2000;
};

struct ProcessResult {
  int exit_code = -1;
  int term_signal = 0;
  bool timed_out = false;
  bool output_overflow = false;
  std::string out;
  std::string err;
  std::int64_t duration_ms = 0;
};

namespace sandbox_detail {

inline constexpr uid_t kNobody = 65534;

inline std::string resolve_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? name : std::string();
  const char* path = std::getenv("PATH");
  for (const auto& dir : split(path ? path : "/usr/local/bin:/usr/bin:/bin", ':')) {
    if (dir.empty()) continue;
    const auto candidate = dir + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return {};
}

class TempDir {
 public:
  TempDir() {
    auto templ = (std::filesystem::temp_directory_path() / "specprobe-XXXXXX").string();
    std::vector<char> buf(templ.begin(), templ.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data()))
      throw Error(ErrorKind::HarnessError, std::string("mkdtemp failed: ") + std::strerror(errno));
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline bool dropping(const SandboxOptions& opt) { return opt.drop_privileges && ::geteuid() == 0; }

inline void chown_tree(const std::filesystem::path& p) {
  if (::chown(p.c_str(), kNobody, kNobody) != 0)
    throw Error(ErrorKind::HarnessError, std::string("chown failed: ") + std::strerror(errno));
  if (std::filesystem::is_directory(p))
    for (const auto& e : std::filesystem::directory_iterator(p))
      if (::chown(e.path().c_str(), kNobody, kNobody) != 0)
        throw Error(ErrorKind::HarnessError, std::string("chown failed: ") + std::strerror(errno));
}

[[noreturn]] inline void child_fail(int fd, const char* what) {
  const int err = errno;
  const auto msg = std::string(what) + ": " + std::strerror(err);
  [[maybe_unused]] auto n = ::write(fd, msg.data(), msg.size());
  ::_exit(127);
}

}  // namespace sandbox_detail

/// Runs `interpreter -I -B <script>` inside `dir` with stdin from `stdin_path`
/// (or /dev/null), a scrubbed environment, resource limits and a wall-clock
/// deadline after which the whole process group is killed.
inline ProcessResult run_isolated(const std::filesystem::path& dir, const std::string& script,
                                  const std::filesystem::path& stdin_path, const SandboxOptions& opt) {
  using namespace sandbox_detail;
  const auto exe = resolve_executable(opt.interpreter);
  if (exe.empty()) throw Error(ErrorKind::HarnessError, "interpreter not found: " + opt.interpreter);

  int out_pipe[2], err_pipe[2], status_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) || ::pipe2(err_pipe, O_CLOEXEC) || ::pipe2(status_pipe, O_CLOEXEC))
    throw Error(ErrorKind::HarnessError, std::string("pipe failed: ") + std::strerror(errno));

  const std::string home = dir.string();
  std::vector<std::string> env_store = {"PATH=/usr/local/bin:/usr/bin:/bin", "LANG=C.UTF-8", "HOME=" + home,
                                        "PYTHONDONTWRITEBYTECODE=1", "PYTHONHASHSEED=0", "TMPDIR=" + home};
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::vector<std::string> argv_store = {exe, "-I", "-B", script};
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);
  const std::string stdin_file = stdin_path.empty() ? "/dev/null" : stdin_path.string();
  const bool drop = dropping(opt);

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorKind::HarnessError, std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    const int sfd = status_pipe[1];
    if (opt.isolate_network) ::unshare(CLONE_NEWNET);  // best effort
    const int in = ::open(stdin_file.c_str(), O_RDONLY);
    if (in < 0) child_fail(sfd, "open stdin");
    if (::dup2(in, 0) < 0 || ::dup2(out_pipe[1], 1) < 0 || ::dup2(err_pipe[1], 2) < 0) child_fail(sfd, "dup2");
    if (::chdir(home.c_str()) != 0) child_fail(sfd, "chdir");
    rlimit as{opt.memory_bytes, opt.memory_bytes};
    rlimit core{0, 0};
    rlimit fsize{64ull << 20, 64ull << 20};
    ::setrlimit(RLIMIT_AS, &as);
    ::setrlimit(RLIMIT_CORE, &core);
    ::setrlimit(RLIMIT_FSIZE, &fsize);
    if (drop) {
      rlimit nproc{512, 512};
      ::setrlimit(RLIMIT_NPROC, &nproc);
      if (::setgroups(0, nullptr) != 0 || ::setgid(kNobody) != 0 || ::setuid(kNobody) != 0)
        child_fail(sfd, "privilege drop");
    }
    ::execve(exe.c_str(), argv.data(), envp.data());
    child_fail(sfd, "execve");
  }

  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  ::close(status_pipe[1]);
  ProcessResult r;
  const auto deadline = start + std::chrono::milliseconds(static_cast<std::int64_t>(opt.timeout_secs * 1000.0));
  int wstatus = 0;
  bool reaped = false;
  struct Stream {
    int fd;
    std::string* sink;
  };
  std::vector<Stream> open_streams = {{out_pipe[0], &r.out}, {err_pipe[0], &r.err}};
  char buf[65536];

  auto kill_group = [&] {
    ::kill(-pid, SIGKILL);
    ::kill(pid, SIGKILL);
  };

  while (!open_streams.empty()) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      r.timed_out = true;
      kill_group();
      break;
    }
    std::vector<pollfd> fds;
    for (const auto& s : open_streams) fds.push_back({s.fd, POLLIN, 0});
    const auto wait_ms = std::min<std::int64_t>(
        100, std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1);
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(wait_ms));
    if (rc < 0 && errno != EINTR) break;
    for (std::size_t i = fds.size(); i-- > 0;) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const auto n = ::read(fds[i].fd, buf, sizeof buf);
      if (n <= 0) {
        ::close(fds[i].fd);
        open_streams.erase(open_streams.begin() + static_cast<std::ptrdiff_t>(i));
        continue;
      }
      auto* sink = open_streams[i].sink;
      sink->append(buf, static_cast<std::size_t>(n));
      if (r.out.size() + r.err.size() > opt.output_cap) r.output_overflow = true;
    }
    if (r.output_overflow) {
      kill_group();
      break;
    }
    // A grandchild may keep the pipes open after the main process exits.
    if (!reaped && ::waitpid(pid, &wstatus, WNOHANG) == pid) {
      reaped = true;
      kill_group();
    }
  }
  for (const auto& s : open_streams) ::close(s.fd);
  if (!reaped) {
    if (r.timed_out || r.output_overflow) kill_group();
    while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
    }
  }
  kill_group();
  r.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();

  std::string spawn_error;
  for (;;) {
    const auto n = ::read(status_pipe[0], buf, sizeof buf);
    if (n <= 0) break;
    spawn_error.append(buf, static_cast<std::size_t>(n));
  }
  ::close(status_pipe[0]);
  if (!spawn_error.empty()) throw Error(ErrorKind::HarnessError, "sandbox spawn failed: " + spawn_error);

  if (WIFEXITED(wstatus)) r.exit_code = WEXITSTATUS(wstatus);
  if (WIFSIGNALED(wstatus)) r.term_signal = WTERMSIG(wstatus);
  if (r.output_overflow) {
    r.out.resize(std::min(r.out.size(), opt.output_cap));
    r.err.resize(std::min(r.err.size(), opt.output_cap));
  }
  return r;
}

inline std::string last_nonblank_line(std::string_view text) {
  const auto lines = split_lines(text);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it)
    if (!trim(*it).empty()) return std::string(trim(*it));
  return {};
}

inline std::string excerpt(std::string_view s, std::size_t n) {
  if (s.size() <= n) return std::string(s);
  return "..." + std::string(s.substr(s.size() - n));
}

inline OutcomeCategory classify_process(const ProcessResult& r) {
  if (r.timed_out) return OutcomeCategory::Timeout;
  if (r.output_overflow) return OutcomeCategory::RuntimeError;
  if (r.term_signal == 0 && r.exit_code == 0) return OutcomeCategory::Pass;
  if (last_nonblank_line(r.err).rfind("AssertionError", 0) == 0) return OutcomeCategory::WrongAnswer;
  return OutcomeCategory::RuntimeError;
}

inline bool defines_entry_point(std::string_view code, std::string_view entry) {
  if (entry.empty()) return true;
  const std::regex re("(^|\\n)[ \\t]*(async[ \\t]+)?def[ \\t]+" + std::string(entry) + "[ \\t]*\\(");
  return std::regex_search(code.begin(), code.end(), re);
}

/// Program text for a unit-test task. A reply that only completes a body is
/// appended to the signature stub when the stub defines the entry point.
inline std::string assemble_unit_program(std::string_view code, const EvalSpec& spec, std::string_view stub = {}) {
  std::string program;
  const std::string entry = spec.entry_point.value_or("");
  if (!entry.empty() && !defines_entry_point(code, entry) && defines_entry_point(stub, entry)) {
    program = std::string(stub);
    if (!program.empty() && program.back() != '\n') program += '\n';
  }
  program += code;
  for (const auto& t : spec.unit_tests) {
    program += "\n\n";
    program += t;
  }
  program += '\n';
  return program;
}

inline ExecutionOutcome execute_unit_tests(std::string_view code, const EvalSpec& spec, const SandboxOptions& opt,
                                           std::string_view stub = {}) {
  if (spec.mode != EvalMode::UnitTests)
    throw Error(ErrorKind::PreconditionViolation, "execute_unit_tests needs a unit_tests spec");
  ExecutionOutcome o;
  try {
    sandbox_detail::TempDir tmp;
    write_file_atomic(tmp.path() / "solution.py", assemble_unit_program(code, spec, stub));
    if (sandbox_detail::dropping(opt)) sandbox_detail::chown_tree(tmp.path());
    const auto r = run_isolated(tmp.path(), "solution.py", {}, opt);
    o.category = classify_process(r);
    o.duration_ms = r.duration_ms;
    o.stderr_excerpt = excerpt(r.err, opt.excerpt_bytes);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::HarnessError && e.kind() != ErrorKind::IoError) throw;
    o.category = OutcomeCategory::HarnessError;
    o.stderr_excerpt = e.what();
  }
  o.passed = o.category == OutcomeCategory::Pass;
  return o;
}

inline ExecutionOutcome execute_stdio(std::string_view code, const EvalSpec& spec, const SandboxOptions& opt) {
  if (spec.mode != EvalMode::Stdio) throw Error(ErrorKind::PreconditionViolation, "execute_stdio needs a stdio spec");
  ExecutionOutcome o;
  o.category = OutcomeCategory::Pass;
  try {
    sandbox_detail::TempDir tmp;
    std::string program(code);
    if (program.empty() || program.back() != '\n') program += '\n';
    write_file_atomic(tmp.path() / "solution.py", program);
    for (std::size_t i = 0; i < spec.stdio_cases.size(); ++i) {
      const auto& c = spec.stdio_cases[i];
      write_file_atomic(tmp.path() / "input.txt", c.input);
      if (sandbox_detail::dropping(opt)) sandbox_detail::chown_tree(tmp.path());
      const auto r = run_isolated(tmp.path(), "solution.py", tmp.path() / "input.txt", opt);
      o.duration_ms += r.duration_ms;
      auto cat = classify_process(r);
      if (cat == OutcomeCategory::Pass && normalize_output(r.out) != normalize_output(c.expected_output)) {
        cat = OutcomeCategory::WrongAnswer;
        o.stderr_excerpt = fmt::format("case {}: output mismatch", i);
      } else if (cat != OutcomeCategory::Pass) {
        o.stderr_excerpt = excerpt(r.err, opt.excerpt_bytes);
      }
      if (cat != OutcomeCategory::Pass) {
        o.category = cat;
        break;
      }
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::HarnessError && e.kind() != ErrorKind::IoError) throw;
    o.category = OutcomeCategory::HarnessError;
    o.stderr_excerpt = e.what();
  }
  o.passed = o.category == OutcomeCategory::Pass;
  return o;
}

/// Executes one generation against its task. Failed extraction is a failing
/// outcome.
inline ExecutionOutcome execute_generation(const GenerationResult& g, const Task& task, const SandboxOptions& opt) {
  ExecutionOutcome o;
  if (!g.extracted_code) {
    o.category = OutcomeCategory::ExtractionFailed;
    o.stderr_excerpt = "no code extracted";
  } else if (task.eval.mode == EvalMode::UnitTests) {
    o = execute_unit_tests(*g.extracted_code, task.eval, opt, task.description);
  } else {
    o = execute_stdio(*g.extracted_code, task.eval, opt);
  }
  o.task_id = g.task_id;
  o.condition = g.condition;
  o.model = g.model;
  o.passed = o.category == OutcomeCategory::Pass;
  return o;
}

/// Pool execution; the result vector is aligned with `generations`.
inline std::vector<ExecutionOutcome> execute_all(const std::vector<GenerationResult>& generations,
                                                 const std::map<std::string, const Task*>& tasks,
                                                 const SandboxOptions& opt, std::size_t workers) {
  std::vector<ExecutionOutcome> out(generations.size());
  parallel_for(generations.size(), workers, [&](std::size_t i) {
    const auto& g = generations[i];
    const auto it = tasks.find(g.task_id);
    if (it == tasks.end())
      throw Error(ErrorKind::PreconditionViolation, "generation for unknown task " + g.task_id);
    out[i] = execute_generation(g, *it->second, opt);
  });
  return out;
}

}  // namespace specprobe
