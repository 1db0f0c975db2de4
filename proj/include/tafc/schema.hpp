#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tafc/json.hpp"

namespace tafc {

enum class Kind { String, Number, Integer, Boolean, Enum, Array, Object, Union };

std::string_view to_string(Kind kind);

/// How a union node was written: oneOf / anyOf branch lists, or a
/// `"type": [...]` array of primitive kinds.
enum class UnionForm { OneOf, AnyOf, TypeArray };

/// Validation keywords that count towards constraint strictness. Numeric
/// bounds keep the JSON number exactly as written so serialization is lossless.
struct ConstraintSet {
  std::optional<std::string> pattern;
  std::optional<Json> minimum;
  std::optional<Json> maximum;
  std::optional<std::uint64_t> min_length;
  std::optional<std::uint64_t> max_length;
  std::optional<std::uint64_t> min_items;
  std::optional<std::uint64_t> max_items;
  std::optional<std::string> format;
  std::optional<Json> multiple_of;
  std::optional<bool> unique_items;

  /// Number of keywords present on the node.
  int count() const;

  /// JSON keyword names of the present keywords, in a fixed order.
  std::vector<std::string> keywords() const;
};

struct Property;

struct ParameterNode {
  Kind kind = Kind::String;
  std::optional<std::string> description;
  /// The raw "type" value, re-emitted verbatim.
  std::optional<Json> type_keyword;
  std::vector<Json> enum_values;
  std::vector<Property> properties;
  /// The source spelled out "properties" (possibly empty).
  bool declares_properties = false;
  std::vector<std::string> required;
  /// Array element schema; empty when the array declares no "items".
  std::vector<ParameterNode> items;
  std::vector<ParameterNode> branches;
  UnionForm union_form = UnionForm::OneOf;
  ConstraintSet constraints;
  /// Keywords outside the supported subset, kept for round-tripping.
  Json extras = Json::object();

  /// Leaf depth is 1; containers add one level over their deepest child.
  int depth() const;

  const ParameterNode* find(std::string_view name) const;
  ParameterNode* find(std::string_view name);
  bool is_required(std::string_view name) const;
  const ParameterNode* item() const { return items.empty() ? nullptr : &items.front(); }
};

struct Property {
  std::string name;
  ParameterNode node;
};

/// Whether the tool arrived as {"type":"function","function":{...}} or as the
/// bare function object.
enum class ToolEnvelope { Wrapped, Bare };

struct ToolSchema {
  std::string name;
  std::optional<std::string> description;
  /// Always Kind::Object. Its properties are the tool's parameters.
  ParameterNode parameters;
  bool has_parameters = true;
  ToolEnvelope envelope = ToolEnvelope::Wrapped;
  Json function_extras = Json::object();
  Json envelope_extras = Json::object();

  const std::vector<Property>& properties() const { return parameters.properties; }
  const std::vector<std::string>& required() const { return parameters.required; }
  const ParameterNode* find(std::string_view param) const { return parameters.find(param); }
};

/// Parses one element of a chat-completions "tools" array (either envelope).
/// Throws Error with MissingName, MalformedParameters or UnsupportedKind.
ToolSchema parse_tool_schema(const Json& raw);

/// Accepts a tools array, a single tool, or an object with a "tools" array.
std::vector<ToolSchema> parse_tools(const Json& raw);

ParameterNode parse_parameter_node(const Json& raw, const std::string& path = "");

Json serialize_parameter_node(const ParameterNode& node);

Json serialize_tool_schema(const ToolSchema& tool);

struct Violation {
  std::string path;
  std::string message;
};

struct ValidationVerdict {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  explicit operator bool() const { return ok(); }
  std::string summary() const;
};

/// Accepts iff every required parameter is present and every present value
/// matches its node's kind and constraints. Keys the schema does not declare
/// are ignored. Never throws on malformed input; it reports it instead.
ValidationVerdict validate_arguments(const ToolSchema& schema, const Json& args);

ValidationVerdict validate_value(const ParameterNode& node, const Json& value,
                                 const std::string& path);

std::string join_path(std::string_view parent, std::string_view child);

}  // namespace tafc
