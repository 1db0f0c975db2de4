#include "tafc/augment.hpp"

#include <algorithm>
#include <set>

#include "tafc/error.hpp"

namespace tafc {
namespace {

struct Plan {
  std::vector<std::string> paths;
  std::vector<std::string> warnings;
};

void plan_level(const ParameterNode& object, const std::string& prefix, int level, int max_depth,
                const ComplexityWeights& weights, Plan& plan) {
  for (const auto& prop : object.properties) {
    const std::string path = join_path(prefix, prop.name);
    if (prop.name.find('.') != std::string::npos) {
      plan.warnings.push_back("parameter '" + path + "' contains '.', not eligible for wrapping");
      continue;
    }
    if (score_property(object, prop.name, weights, prefix).psi > weights.tau()) {
      plan.paths.push_back(path);
    }
    if (prop.node.kind == Kind::Object && level < max_depth) {
      plan_level(prop.node, path, level + 1, max_depth, weights, plan);
    }
  }
}

std::string pick_field_name(const std::string& wanted, const std::set<std::string>& taken) {
  if (taken.count(wanted) == 0) return wanted;
  std::string name(kFallbackThinkField);
  for (int n = 2; taken.count(name) != 0; ++n) name = std::string(kFallbackThinkField) + "_" + std::to_string(n);
  return name;
}

ParameterNode string_node(std::string description) {
  ParameterNode n;
  n.kind = Kind::String;
  n.type_keyword = "string";
  n.description = std::move(description);
  return n;
}

struct Wrapper {
  const ToolSchema& tool;
  const std::set<std::string>& paths;
  const std::string& field;

  void wrap_object(ParameterNode& object, const std::string& prefix) const {
    for (auto& prop : object.properties) {
      const std::string path = join_path(prefix, prop.name);
      if (prop.node.kind == Kind::Object) wrap_object(prop.node, path);
      if (paths.count(path) == 0) continue;

      ParameterNode wrapper;
      wrapper.kind = Kind::Object;
      wrapper.type_keyword = "object";
      wrapper.description = prop.node.description;
      wrapper.declares_properties = true;
      wrapper.properties.push_back(Property{field, string_node(default_think_description(tool, path))});
      wrapper.properties.push_back(Property{std::string(kValueField), std::move(prop.node)});
      wrapper.required = {field, std::string(kValueField)};
      prop.node = std::move(wrapper);
    }
  }
};

void unwrap_object(ParameterNode& object, const std::string& prefix,
                   const std::set<std::string>& paths) {
  for (auto& prop : object.properties) {
    const std::string path = join_path(prefix, prop.name);
    if (paths.count(path) != 0) {
      ParameterNode* value = prop.node.find(kValueField);
      if (value == nullptr) {
        throw Error(ErrorCode::UnknownTarget, "wrapper at '" + path + "' has no value field");
      }
      ParameterNode inner = std::move(*value);
      prop.node = std::move(inner);
    }
    if (prop.node.kind == Kind::Object) unwrap_object(prop.node, path, paths);
  }
}

const ParameterNode* resolve(const ToolSchema& schema, std::string_view path) {
  const ParameterNode* node = &schema.parameters;
  for (const auto& segment : split_path(path)) {
    if (node->kind != Kind::Object) return nullptr;
    node = node->find(segment);
    if (node == nullptr) return nullptr;
  }
  return node;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ", ";
    out += words[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::size_t end = dot == std::string_view::npos ? path.size() : dot;
    out.emplace_back(path.substr(start, end - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

Json AugmentationManifest::to_json() const {
  Json j = Json::object();
  j["function_level"] = function_level;
  j["function_field"] = function_field;
  j["wrapper_field"] = wrapper_field;
  j["added_object_type"] = added_object_type;
  j["parameter_paths"] = parameter_paths;
  return j;
}

AugmentationManifest AugmentationManifest::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "manifest must be an object");
  AugmentationManifest m;
  try {
    m.function_level = j.value("function_level", false);
    m.function_field = j.value("function_field", std::string(kDefaultThinkField));
    m.wrapper_field = j.value("wrapper_field", std::string(kDefaultThinkField));
    m.added_object_type = j.value("added_object_type", false);
    if (j.contains("parameter_paths")) {
      m.parameter_paths = j["parameter_paths"].get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed manifest: ") + e.what());
  }
  std::set<std::string> unique(m.parameter_paths.begin(), m.parameter_paths.end());
  if (unique.size() != m.parameter_paths.size()) {
    throw Error(ErrorCode::InvalidArgument, "manifest lists a parameter path twice");
  }
  return m;
}

std::vector<std::string> plan_wrapped_paths(const ToolSchema& schema,
                                            const ComplexityWeights& weights, int max_depth) {
  Plan plan;
  if (max_depth >= 1) plan_level(schema.parameters, "", 1, max_depth, weights, plan);
  return plan.paths;
}

std::optional<AugmentationManifest> read_marker(const ToolSchema& schema) {
  auto it = schema.parameters.extras.find(kMarkerKey);
  if (it == schema.parameters.extras.end()) return std::nullopt;
  return AugmentationManifest::from_json(*it);
}

AugmentedTool apply_augmentation(const ToolSchema& origin, const std::vector<std::string>& paths,
                                 const ThinkDescriptor& think, bool function_level) {
  AugmentedTool out;
  out.origin = origin;
  out.schema = origin;

  std::set<std::string> path_set;
  for (const auto& p : paths) {
    if (resolve(origin, p) == nullptr || p.empty()) {
      throw Error(ErrorCode::UnknownTarget, "cannot wrap unknown parameter path '" + p + "'");
    }
    if (!path_set.insert(p).second) {
      throw Error(ErrorCode::InvalidArgument, "parameter path '" + p + "' listed twice");
    }
  }

  AugmentationManifest& m = out.manifest;
  m.function_level = function_level;
  const std::string wanted = think.field_name.empty() ? std::string(kDefaultThinkField) : think.field_name;

  std::set<std::string> top_level;
  for (const auto& prop : origin.properties()) top_level.insert(prop.name);
  m.function_field = pick_field_name(wanted, top_level);
  if (function_level && m.function_field != wanted) {
    out.warnings.push_back("NameCollision: '" + origin.name + "' already defines '" + wanted +
                           "', reasoning field renamed to '" + m.function_field + "'");
  }
  m.wrapper_field = pick_field_name(wanted, {std::string(kValueField)});
  if (!path_set.empty() && m.wrapper_field != wanted) {
    out.warnings.push_back("NameCollision: wrapper reasoning field renamed to '" + m.wrapper_field + "'");
  }

  // Parents first, then document order within a level.
  m.parameter_paths = paths;
  std::stable_sort(m.parameter_paths.begin(), m.parameter_paths.end(),
                   [](const std::string& a, const std::string& b) {
                     return std::count(a.begin(), a.end(), '.') < std::count(b.begin(), b.end(), '.');
                   });

  ParameterNode& root = out.schema.parameters;
  Wrapper{origin, path_set, m.wrapper_field}.wrap_object(root, "");

  if (function_level) {
    std::string text = think.description_text.empty() ? default_think_description(origin)
                                                       : think.description_text;
    root.properties.insert(root.properties.begin(), Property{m.function_field, string_node(std::move(text))});
  }
  if (!root.type_keyword) {
    root.type_keyword = "object";
    m.added_object_type = true;
  }
  out.schema.has_parameters = true;
  root.extras[std::string(kMarkerKey)] = m.to_json();
  return out;
}

AugmentedTool augment_tool(const ToolSchema& schema, const AugmentOptions& options) {
  if (auto existing = read_marker(schema)) {
    AugmentedTool out;
    out.schema = schema;
    out.manifest = *existing;
    out.origin = strip_augmentation(schema, *existing);
    return out;
  }
  Plan plan;
  if (options.max_depth >= 1) {
    plan_level(schema.parameters, "", 1, options.max_depth, options.weights, plan);
  }
  AugmentedTool out = apply_augmentation(schema, plan.paths, options.think, options.function_level);
  out.warnings.insert(out.warnings.begin(), plan.warnings.begin(), plan.warnings.end());
  return out;
}

AugmentedTool augment_tool(const ToolSchema& schema, const ComplexityWeights& weights,
                           const ThinkDescriptor& think) {
  AugmentOptions options;
  options.weights = weights;
  options.think = think;
  return augment_tool(schema, options);
}

ToolSchema strip_augmentation(const ToolSchema& augmented, const AugmentationManifest& manifest) {
  ToolSchema out = augmented;
  ParameterNode& root = out.parameters;
  if (manifest.function_level) {
    auto it = std::find_if(root.properties.begin(), root.properties.end(),
                           [&](const Property& p) { return p.name == manifest.function_field; });
    if (it != root.properties.end()) root.properties.erase(it);
  }
  const std::set<std::string> paths(manifest.parameter_paths.begin(), manifest.parameter_paths.end());
  unwrap_object(root, "", paths);
  root.extras.erase(std::string(kMarkerKey));
  if (manifest.added_object_type) root.type_keyword.reset();
  return out;
}

Json without_marker(const Json& serialized_tool) {
  Json out = serialized_tool;
  Json* fn = out.contains("function") ? &out["function"] : &out;
  if (fn->contains("parameters") && (*fn)["parameters"].is_object()) {
    (*fn)["parameters"].erase(std::string(kMarkerKey));
  }
  return out;
}

std::string default_think_description(const ToolSchema& schema, std::string_view target) {
  if (target.empty()) {
    std::string text = "Reasoning for calling " + schema.name +
                       ". Fill this field first: restate what the request needs, then justify the "
                       "tool selection and parameter choices you are about to make";
    std::vector<std::string> names;
    for (const auto& p : schema.properties()) names.push_back(p.name);
    if (!names.empty()) text += " (" + join_words(names) + ")";
    return text + ".";
  }
  const ParameterNode* node = resolve(schema, target);
  if (node == nullptr) {
    throw Error(ErrorCode::UnknownTarget, schema.name + " has no parameter '" + std::string(target) + "'");
  }
  const auto keywords = node->constraints.keywords();
  std::string text = "Before giving the value of " + std::string(target) + " in " + schema.name +
                     ", explain why this specific value fits the request";
  if (keywords.empty()) {
    text += ", how it meets the expected type";
  } else {
    text += ", how it satisfies the constraints (" + join_words(keywords) + ")";
  }
  return text + ", and how it depends on the other arguments.";
}

void ToolRegistry::add(AugmentedTool tool) {
  const std::string name = tool.name();
  if (tools_.count(name) != 0) {
    throw Error(ErrorCode::InvalidArgument, "tool '" + name + "' registered twice");
  }
  tools_.emplace(name, std::move(tool));
}

const AugmentedTool* ToolRegistry::find(std::string_view name) const {
  auto it = tools_.find(name);
  return it == tools_.end() ? nullptr : &it->second;
}

const AugmentedTool& ToolRegistry::at(std::string_view name) const {
  const AugmentedTool* tool = find(name);
  if (tool == nullptr) {
    throw Error(ErrorCode::UnknownFunction, "no augmented tool named '" + std::string(name) + "'");
  }
  return *tool;
}

}  // namespace tafc
