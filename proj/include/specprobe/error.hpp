#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace specprobe {

enum class ErrorKind {
  MalformedRecord,
  EmptyCorpus,
  NotApplicable,
  ProviderError,
  UnparseableReply,
  RefusedMutation,
  BudgetExhausted,
  VerdictParseError,
  PreconditionViolation,
  DuplicateTask,
  DuplicateVerdict,
  EmptyInput,
  ZeroBaseline,
  EmptyMatrix,
  ExemplarSetInvalid,
  LabelParseError,
  EndpointSchemaError,
  DanglingMutant,
  ClassTooSmall,
  InvalidSplitSpec,
  InsufficientMutants,
  MissingBaseline,
  MissingStage,
  HarnessError,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::UnparseableReply: return "UnparseableReply";
    case ErrorKind::RefusedMutation: return "RefusedMutation";
    case ErrorKind::BudgetExhausted: return "BudgetExhausted";
    case ErrorKind::VerdictParseError: return "VerdictParseError";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::DuplicateTask: return "DuplicateTask";
    case ErrorKind::DuplicateVerdict: return "DuplicateVerdict";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ZeroBaseline: return "ZeroBaseline";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::ExemplarSetInvalid: return "ExemplarSetInvalid";
    case ErrorKind::LabelParseError: return "LabelParseError";
    case ErrorKind::EndpointSchemaError: return "EndpointSchemaError";
    case ErrorKind::DanglingMutant: return "DanglingMutant";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::InvalidSplitSpec: return "InvalidSplitSpec";
    case ErrorKind::InsufficientMutants: return "InsufficientMutants";
    case ErrorKind::MissingBaseline: return "MissingBaseline";
    case ErrorKind::MissingStage: return "MissingStage";
    case ErrorKind::HarnessError: return "HarnessError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Domain error raised by every specprobe module.
///
/// `kind()` identifies the failure class; `detail()` carries structured
/// context (line numbers, offending ids, achieved rates) that the CLI echoes
/// as machine-readable JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  nlohmann::json to_json() const {
    return {{"error", std::string(to_string(kind_))}, {"message", what()}, {"detail", detail_}};
  }

 private:
  ErrorKind kind_;
  nlohmann::json detail_;
};

}  // namespace specprobe
