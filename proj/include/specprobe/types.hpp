#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>

#include "specprobe/error.hpp"

namespace specprobe {

enum class Benchmark { HumanEval, MBPP, LiveCodeBench };

/// Label set of the classifier and the condition tag of generation runs.
/// CLEAN is a label only; it is never a mutation target.
enum class DefectType { Clean, LV, US, SF };

inline constexpr std::array<Benchmark, 3> kBenchmarks = {Benchmark::HumanEval, Benchmark::MBPP,
                                                         Benchmark::LiveCodeBench};
inline constexpr std::array<DefectType, 4> kLabels = {DefectType::Clean, DefectType::LV, DefectType::US,
                                                      DefectType::SF};
inline constexpr std::array<DefectType, 3> kMutationTargets = {DefectType::LV, DefectType::US, DefectType::SF};

inline constexpr std::size_t label_index(DefectType d) { return static_cast<std::size_t>(d); }

inline std::string_view to_string(DefectType d) {
  switch (d) {
    case DefectType::Clean: return "CLEAN";
    case DefectType::LV: return "LV";
    case DefectType::US: return "US";
    case DefectType::SF: return "SF";
  }
  return "?";
}

inline std::string_view to_string(Benchmark b) {
  switch (b) {
    case Benchmark::HumanEval: return "HumanEval";
    case Benchmark::MBPP: return "MBPP";
    case Benchmark::LiveCodeBench: return "LiveCodeBench";
  }
  return "?";
}

/// Lower-case file-name form: humaneval, mbpp, livecodebench.
inline std::string slug(Benchmark b) {
  switch (b) {
    case Benchmark::HumanEval: return "humaneval";
    case Benchmark::MBPP: return "mbpp";
    case Benchmark::LiveCodeBench: return "livecodebench";
  }
  return "?";
}

namespace detail {
inline std::string lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace detail

inline DefectType parse_defect_type(std::string_view text) {
  const auto s = detail::lowered(text);
  if (s == "clean" || s == "orig" || s == "original") return DefectType::Clean;
  if (s == "lv") return DefectType::LV;
  if (s == "us") return DefectType::US;
  if (s == "sf") return DefectType::SF;
  throw Error(ErrorKind::ConfigError, "unknown defect type '" + std::string(text) + "'");
}

inline Benchmark parse_benchmark(std::string_view text) {
  const auto s = detail::lowered(text);
  if (s == "humaneval") return Benchmark::HumanEval;
  if (s == "mbpp") return Benchmark::MBPP;
  if (s == "livecodebench" || s == "lcb") return Benchmark::LiveCodeBench;
  throw Error(ErrorKind::ConfigError, "unknown benchmark '" + std::string(text) + "'");
}

}  // namespace specprobe
