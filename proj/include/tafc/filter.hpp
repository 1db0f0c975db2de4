#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tafc/augment.hpp"
#include "tafc/json.hpp"

namespace tafc {

enum class FilterMode { Strict, Lenient };

std::string_view to_string(FilterMode mode);
FilterMode filter_mode_from_string(std::string_view text);

/// Reasoning extracted from one tool call. An empty string means the model
/// emitted the field but left it blank; a missing entry means no field.
struct ReasoningTrace {
  std::optional<std::string> function_level;
  std::map<std::string, std::string> per_parameter;

  bool empty() const { return !function_level && per_parameter.empty(); }
  /// Function-level text followed by "path: text" lines.
  std::string flatten() const;
  Json to_json() const;
  static ReasoningTrace from_json(const Json& j);

  friend bool operator==(const ReasoningTrace&, const ReasoningTrace&) = default;
};

struct FilteredCall {
  std::string function_name;
  Json clean_args = Json::object();
  ReasoningTrace trace;
  std::vector<std::string> strictness_warnings;

  Json to_json() const;
};

/// Strips the function-level reasoning field and unwraps every manifest path
/// present in `raw_args`, depth first. Fields outside the manifest pass through
/// untouched. In strict mode a wrapped position without a "value" throws
/// Error(MalformedReasoningTuple); lenient mode records a warning and keeps the
/// raw node as the value.
FilteredCall filter_arguments(const AugmentedTool& tool, const Json& raw_args, FilterMode mode);

/// Looks the tool up first; throws Error(UnknownFunction) when absent.
FilteredCall filter_call(const ToolRegistry& registry, std::string_view function_name,
                         const Json& raw_args, FilterMode mode);

/// Inverse of filtering: wraps clean arguments with the given reasoning, think
/// fields first.
Json encode_arguments(const AugmentedTool& tool, const Json& clean_args, const ReasoningTrace& trace);

}  // namespace tafc
