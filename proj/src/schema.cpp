#include "tafc/schema.hpp"

#include <algorithm>
#include <set>

#include "tafc/error.hpp"

namespace tafc {
namespace {

const std::set<std::string, std::less<>> kStructuralKeys = {
    "type", "description", "enum", "properties", "required", "items", "oneOf", "anyOf",
    "pattern", "minimum", "maximum", "minLength", "maxLength", "minItems", "maxItems",
    "format", "multipleOf", "uniqueItems"};

std::optional<Kind> kind_from_type_name(std::string_view name) {
  if (name == "string") return Kind::String;
  if (name == "number") return Kind::Number;
  if (name == "integer") return Kind::Integer;
  if (name == "boolean") return Kind::Boolean;
  if (name == "array") return Kind::Array;
  if (name == "object") return Kind::Object;
  return std::nullopt;
}

std::string where(const std::string& path) {
  return path.empty() ? std::string("parameters") : path;
}

std::uint64_t read_count(const Json& raw, const char* key, const std::string& path) {
  const Json& v = raw.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw Error(ErrorCode::MalformedParameters,
              where(path) + ": " + key + " must be a non-negative integer");
}

Json read_number(const Json& raw, const char* key, const std::string& path) {
  const Json& v = raw.at(key);
  if (!v.is_number()) {
    throw Error(ErrorCode::MalformedParameters, where(path) + ": " + key + " must be a number");
  }
  return v;
}

std::string read_string(const Json& raw, const char* key, const std::string& path) {
  const Json& v = raw.at(key);
  if (!v.is_string()) {
    throw Error(ErrorCode::MalformedParameters, where(path) + ": " + key + " must be a string");
  }
  return v.get<std::string>();
}

ConstraintSet parse_constraints(const Json& raw, const std::string& path) {
  ConstraintSet c;
  if (raw.contains("pattern")) c.pattern = read_string(raw, "pattern", path);
  if (raw.contains("minimum")) c.minimum = read_number(raw, "minimum", path);
  if (raw.contains("maximum")) c.maximum = read_number(raw, "maximum", path);
  if (raw.contains("minLength")) c.min_length = read_count(raw, "minLength", path);
  if (raw.contains("maxLength")) c.max_length = read_count(raw, "maxLength", path);
  if (raw.contains("minItems")) c.min_items = read_count(raw, "minItems", path);
  if (raw.contains("maxItems")) c.max_items = read_count(raw, "maxItems", path);
  if (raw.contains("format")) c.format = read_string(raw, "format", path);
  if (raw.contains("multipleOf")) {
    c.multiple_of = read_number(raw, "multipleOf", path);
    if (c.multiple_of->get<double>() <= 0.0) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": multipleOf must be positive");
    }
  }
  if (raw.contains("uniqueItems")) {
    if (!raw["uniqueItems"].is_boolean()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": uniqueItems must be a boolean");
    }
    c.unique_items = raw["uniqueItems"].get<bool>();
  }
  return c;
}

void parse_object_body(const Json& raw, ParameterNode& node, const std::string& path) {
  if (raw.contains("properties")) {
    const Json& props = raw["properties"];
    if (!props.is_object()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": properties must be an object");
    }
    node.declares_properties = true;
    for (const auto& [name, child] : props.items()) {
      node.properties.push_back(Property{name, parse_parameter_node(child, join_path(path, name))});
    }
  }
  if (raw.contains("required")) {
    const Json& req = raw["required"];
    if (!req.is_array()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": required must be an array");
    }
    for (const auto& r : req) {
      if (!r.is_string()) {
        throw Error(ErrorCode::MalformedParameters, where(path) + ": required entries must be strings");
      }
      auto name = r.get<std::string>();
      if (node.find(name) == nullptr) {
        throw Error(ErrorCode::MalformedParameters,
                    where(path) + ": required names unknown parameter '" + name + "'");
      }
      if (!node.is_required(name)) node.required.push_back(std::move(name));
    }
  }
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::String: return "string";
    case Kind::Number: return "number";
    case Kind::Integer: return "integer";
    case Kind::Boolean: return "boolean";
    case Kind::Enum: return "enum";
    case Kind::Array: return "array";
    case Kind::Object: return "object";
    case Kind::Union: return "union";
  }
  return "unknown";
}

int ConstraintSet::count() const { return static_cast<int>(keywords().size()); }

std::vector<std::string> ConstraintSet::keywords() const {
  std::vector<std::string> out;
  if (pattern) out.emplace_back("pattern");
  if (minimum) out.emplace_back("minimum");
  if (maximum) out.emplace_back("maximum");
  if (min_length) out.emplace_back("minLength");
  if (max_length) out.emplace_back("maxLength");
  if (min_items) out.emplace_back("minItems");
  if (max_items) out.emplace_back("maxItems");
  if (format) out.emplace_back("format");
  if (multiple_of) out.emplace_back("multipleOf");
  if (unique_items) out.emplace_back("uniqueItems");
  return out;
}

int ParameterNode::depth() const {
  int deepest = 0;
  for (const auto& p : properties) deepest = std::max(deepest, p.node.depth());
  for (const auto& i : items) deepest = std::max(deepest, i.depth());
  for (const auto& b : branches) deepest = std::max(deepest, b.depth());
  return 1 + deepest;
}

const ParameterNode* ParameterNode::find(std::string_view name) const {
  for (const auto& p : properties) {
    if (p.name == name) return &p.node;
  }
  return nullptr;
}

ParameterNode* ParameterNode::find(std::string_view name) {
  for (auto& p : properties) {
    if (p.name == name) return &p.node;
  }
  return nullptr;
}

bool ParameterNode::is_required(std::string_view name) const {
  return std::find(required.begin(), required.end(), name) != required.end();
}

std::string join_path(std::string_view parent, std::string_view child) {
  if (parent.empty()) return std::string(child);
  std::string out(parent);
  out += '.';
  out += child;
  return out;
}

ParameterNode parse_parameter_node(const Json& raw, const std::string& path) {
  if (!raw.is_object()) {
    throw Error(ErrorCode::MalformedParameters, where(path) + ": schema must be an object");
  }
  if (raw.contains("allOf")) {
    throw Error(ErrorCode::UnsupportedKind, where(path) + ": allOf is not supported");
  }
  if (raw.contains("$ref")) {
    throw Error(ErrorCode::UnsupportedKind, where(path) + ": $ref is not supported");
  }

  ParameterNode node;
  if (raw.contains("description")) node.description = read_string(raw, "description", path);
  if (raw.contains("type")) node.type_keyword = raw["type"];
  node.constraints = parse_constraints(raw, path);

  const bool has_one_of = raw.contains("oneOf");
  const bool has_any_of = raw.contains("anyOf");

  if (raw.contains("enum")) {
    const Json& values = raw["enum"];
    if (!values.is_array() || values.empty()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": enum must be a non-empty array");
    }
    node.kind = Kind::Enum;
    node.enum_values.assign(values.begin(), values.end());
  } else if (has_one_of || has_any_of) {
    if (has_one_of && has_any_of) {
      throw Error(ErrorCode::UnsupportedKind, where(path) + ": both oneOf and anyOf present");
    }
    const Json& list = has_one_of ? raw["oneOf"] : raw["anyOf"];
    if (!list.is_array() || list.empty()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": union needs a non-empty branch list");
    }
    node.kind = Kind::Union;
    node.union_form = has_one_of ? UnionForm::OneOf : UnionForm::AnyOf;
    for (std::size_t i = 0; i < list.size(); ++i) {
      node.branches.push_back(parse_parameter_node(list[i], path + "|" + std::to_string(i)));
    }
  } else if (node.type_keyword && node.type_keyword->is_array()) {
    const Json& types = *node.type_keyword;
    if (types.empty()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": empty type array");
    }
    node.kind = Kind::Union;
    node.union_form = UnionForm::TypeArray;
    for (const auto& t : types) {
      auto k = t.is_string() ? kind_from_type_name(t.get<std::string>()) : std::nullopt;
      if (!k) {
        throw Error(ErrorCode::UnsupportedKind, where(path) + ": unsupported type " + t.dump());
      }
      ParameterNode branch;
      branch.kind = *k;
      branch.type_keyword = t;
      node.branches.push_back(std::move(branch));
    }
  } else if (node.type_keyword) {
    if (!node.type_keyword->is_string()) {
      throw Error(ErrorCode::MalformedParameters, where(path) + ": type must be a string or array");
    }
    auto k = kind_from_type_name(node.type_keyword->get<std::string>());
    if (!k) {
      throw Error(ErrorCode::UnsupportedKind,
                  where(path) + ": unsupported type '" + node.type_keyword->get<std::string>() + "'");
    }
    node.kind = *k;
  } else if (raw.contains("properties")) {
    node.kind = Kind::Object;
  } else if (raw.contains("items")) {
    node.kind = Kind::Array;
  } else {
    throw Error(ErrorCode::UnsupportedKind, where(path) + ": missing type");
  }

  if (node.kind == Kind::Object) {
    parse_object_body(raw, node, path);
  } else if (node.kind == Kind::Array && raw.contains("items")) {
    node.items.push_back(parse_parameter_node(raw["items"], path + "[]"));
  }

  for (const auto& [key, value] : raw.items()) {
    if (kStructuralKeys.count(key) != 0) {
      // Keywords that are structural only for other kinds stay opaque here.
      const bool object_only = key == "properties" || key == "required";
      const bool array_only = key == "items";
      const bool consumed_elsewhere = (object_only && node.kind != Kind::Object) ||
                                      (array_only && node.kind != Kind::Array) ||
                                      ((key == "oneOf" || key == "anyOf") && node.kind != Kind::Union);
      if (!consumed_elsewhere) continue;
    }
    node.extras[key] = value;
  }
  return node;
}

Json serialize_parameter_node(const ParameterNode& node) {
  Json out = Json::object();
  if (node.type_keyword) out["type"] = *node.type_keyword;
  if (node.description) out["description"] = *node.description;
  if (node.kind == Kind::Enum) {
    out["enum"] = Json::array();
    for (const auto& v : node.enum_values) out["enum"].push_back(v);
  }
  if (node.kind == Kind::Object) {
    Json props = Json::object();
    for (const auto& p : node.properties) props[p.name] = serialize_parameter_node(p.node);
    if (!node.properties.empty() || node.declares_properties) out["properties"] = std::move(props);
    if (!node.required.empty()) out["required"] = node.required;
  }
  if (node.kind == Kind::Array && !node.items.empty()) {
    out["items"] = serialize_parameter_node(node.items.front());
  }
  if (node.kind == Kind::Union && node.union_form != UnionForm::TypeArray) {
    Json list = Json::array();
    for (const auto& b : node.branches) list.push_back(serialize_parameter_node(b));
    out[node.union_form == UnionForm::OneOf ? "oneOf" : "anyOf"] = std::move(list);
  }
  const ConstraintSet& c = node.constraints;
  if (c.pattern) out["pattern"] = *c.pattern;
  if (c.minimum) out["minimum"] = *c.minimum;
  if (c.maximum) out["maximum"] = *c.maximum;
  if (c.min_length) out["minLength"] = *c.min_length;
  if (c.max_length) out["maxLength"] = *c.max_length;
  if (c.min_items) out["minItems"] = *c.min_items;
  if (c.max_items) out["maxItems"] = *c.max_items;
  if (c.format) out["format"] = *c.format;
  if (c.multiple_of) out["multipleOf"] = *c.multiple_of;
  if (c.unique_items) out["uniqueItems"] = *c.unique_items;
  for (const auto& [key, value] : node.extras.items()) out[key] = value;
  return out;
}

ToolSchema parse_tool_schema(const Json& raw) {
  if (!raw.is_object()) {
    throw Error(ErrorCode::MalformedParameters, "tool definition must be a JSON object");
  }
  ToolSchema tool;
  const Json* fn = &raw;
  if (raw.contains("function")) {
    if (!raw["function"].is_object()) {
      throw Error(ErrorCode::MalformedParameters, "\"function\" must be an object");
    }
    tool.envelope = ToolEnvelope::Wrapped;
    fn = &raw["function"];
    for (const auto& [key, value] : raw.items()) {
      if (key != "type" && key != "function") tool.envelope_extras[key] = value;
    }
  } else {
    tool.envelope = ToolEnvelope::Bare;
  }

  if (!fn->contains("name") || !(*fn)["name"].is_string() || (*fn)["name"].get<std::string>().empty()) {
    throw Error(ErrorCode::MissingName, "tool definition has no function name");
  }
  tool.name = (*fn)["name"].get<std::string>();
  if (fn->contains("description")) {
    if (!(*fn)["description"].is_string()) {
      throw Error(ErrorCode::MalformedParameters, tool.name + ": description must be a string");
    }
    tool.description = (*fn)["description"].get<std::string>();
  }

  tool.parameters.kind = Kind::Object;
  tool.has_parameters = fn->contains("parameters");
  if (tool.has_parameters) {
    const Json& params = (*fn)["parameters"];
    if (!params.is_object()) {
      throw Error(ErrorCode::MalformedParameters, tool.name + ": parameters must be an object schema");
    }
    if (params.contains("type") && params["type"] != "object") {
      throw Error(ErrorCode::MalformedParameters, tool.name + ": parameters must have type object");
    }
    if (params.empty()) {
      tool.parameters.type_keyword.reset();
    } else {
      Json body = params;
      const bool typed = body.contains("type");
      if (!typed) body["type"] = "object";
      tool.parameters = parse_parameter_node(body, "");
      if (!typed) tool.parameters.type_keyword.reset();
    }
  }

  for (const auto& [key, value] : fn->items()) {
    if (key != "name" && key != "description" && key != "parameters") tool.function_extras[key] = value;
  }
  return tool;
}

std::vector<ToolSchema> parse_tools(const Json& raw) {
  const Json* list = &raw;
  if (raw.is_object() && raw.contains("tools")) list = &raw["tools"];
  std::vector<ToolSchema> out;
  if (list->is_array()) {
    for (const auto& t : *list) out.push_back(parse_tool_schema(t));
  } else {
    out.push_back(parse_tool_schema(*list));
  }
  std::set<std::string> seen;
  for (const auto& t : out) {
    if (!seen.insert(t.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate tool name '" + t.name + "'");
    }
  }
  return out;
}

Json serialize_tool_schema(const ToolSchema& tool) {
  Json fn = Json::object();
  fn["name"] = tool.name;
  if (tool.description) fn["description"] = *tool.description;
  if (tool.has_parameters) {
    const ParameterNode& p = tool.parameters;
    const bool bare_empty = !p.type_keyword && p.properties.empty() && !p.declares_properties &&
                            p.required.empty() &&
                            p.extras.empty() && p.constraints.count() == 0 && !p.description;
    fn["parameters"] = bare_empty ? Json::object() : serialize_parameter_node(p);
  }
  for (const auto& [key, value] : tool.function_extras.items()) fn[key] = value;
  if (tool.envelope == ToolEnvelope::Bare) return fn;

  Json out = Json::object();
  out["type"] = "function";
  out["function"] = std::move(fn);
  for (const auto& [key, value] : tool.envelope_extras.items()) out[key] = value;
  return out;
}

std::string ValidationVerdict::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += (v.path.empty() ? std::string("<root>") : v.path) + ": " + v.message;
  }
  return out;
}

}  // namespace tafc
