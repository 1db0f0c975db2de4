#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tafc {

enum class ErrorCode {
  InvalidArgument,
  // schema_model
  MissingName,
  MalformedParameters,
  UnsupportedKind,
  // complexity / augment
  UnknownParameter,
  UnknownTarget,
  // filter
  MalformedReasoningTuple,
  UnknownFunction,
  // gateway
  UpstreamUnreachable,
  UpstreamTimeout,
  BudgetExhausted,
  // trace_store
  StorageFull,
  IOFailure,
  // tuning
  EmptyText,
  ZeroVector,
  ProviderFailure,
  SchemaMismatch,
  EmptyTaskSet,
  EmptyCandidate,
  // harness
  ScenarioInvalid,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tafc
