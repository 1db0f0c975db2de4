#include "tafc/filter.hpp"

#include <set>

#include "tafc/error.hpp"

namespace tafc {
namespace {

class Unwrapper {
 public:
  Unwrapper(const AugmentationManifest& manifest, FilterMode mode, FilteredCall& out)
      : manifest_(manifest), mode_(mode), out_(out),
        paths_(manifest.parameter_paths.begin(), manifest.parameter_paths.end()) {}

  void unwrap_object(Json& object, const std::string& prefix) {
    for (auto& [key, value] : object.items()) {
      const std::string path = join_path(prefix, key);
      if (paths_.count(path) != 0) unwrap_tuple(value, path);
      if (value.is_object() && has_descendants(path)) unwrap_object(value, path);
    }
  }

  std::optional<std::string> reasoning_text(const Json& value, const std::string& where) {
    if (value.is_string()) return value.get<std::string>();
    malformed(where + ": reasoning field is not a string");
    return value.dump();
  }

 private:
  void unwrap_tuple(Json& node, const std::string& path) {
    if (!node.is_object() || !node.contains(kValueField)) {
      malformed("parameter '" + path + "' is not a {" + manifest_.wrapper_field + ", value} tuple");
      out_.trace.per_parameter[path] = "";
      return;
    }
    for (const auto& [k, _] : node.items()) {
      if (k != manifest_.wrapper_field && k != kValueField) {
        out_.strictness_warnings.push_back("parameter '" + path + "' tuple has extra field '" + k + "'");
      }
    }
    auto think = node.find(manifest_.wrapper_field);
    if (think != node.end()) {
      if (auto text = reasoning_text(*think, path)) out_.trace.per_parameter[path] = *text;
    }
    Json value = std::move(node[std::string(kValueField)]);
    node = std::move(value);
  }

  bool has_descendants(const std::string& path) const {
    const std::string prefix = path + ".";
    auto it = paths_.lower_bound(prefix);
    return it != paths_.end() && it->compare(0, prefix.size(), prefix) == 0;
  }

  void malformed(const std::string& message) {
    if (mode_ == FilterMode::Strict) throw Error(ErrorCode::MalformedReasoningTuple, message);
    out_.strictness_warnings.push_back(message);
  }

  const AugmentationManifest& manifest_;
  FilterMode mode_;
  FilteredCall& out_;
  std::set<std::string> paths_;
};

class Wrapper {
 public:
  Wrapper(const AugmentationManifest& manifest, const ReasoningTrace& trace)
      : manifest_(manifest), trace_(trace),
        paths_(manifest.parameter_paths.begin(), manifest.parameter_paths.end()) {}

  void wrap_object(Json& object, const std::string& prefix) const {
    for (auto& [key, value] : object.items()) {
      const std::string path = join_path(prefix, key);
      if (value.is_object()) wrap_object(value, path);
      if (paths_.count(path) == 0) continue;
      Json tuple = Json::object();
      auto it = trace_.per_parameter.find(path);
      if (it != trace_.per_parameter.end()) tuple[manifest_.wrapper_field] = it->second;
      tuple[std::string(kValueField)] = std::move(value);
      value = std::move(tuple);
    }
  }

 private:
  const AugmentationManifest& manifest_;
  const ReasoningTrace& trace_;
  std::set<std::string> paths_;
};

}  // namespace

std::string_view to_string(FilterMode mode) {
  return mode == FilterMode::Strict ? "strict" : "lenient";
}

FilterMode filter_mode_from_string(std::string_view text) {
  if (text == "strict") return FilterMode::Strict;
  if (text == "lenient") return FilterMode::Lenient;
  throw Error(ErrorCode::InvalidArgument, "mode must be strict or lenient, got '" + std::string(text) + "'");
}

std::string ReasoningTrace::flatten() const {
  std::string out;
  if (function_level) out = *function_level;
  for (const auto& [path, text] : per_parameter) {
    if (!out.empty()) out += '\n';
    out += path + ": " + text;
  }
  return out;
}

Json ReasoningTrace::to_json() const {
  Json j = Json::object();
  j["function_level"] = function_level ? Json(*function_level) : Json(nullptr);
  j["per_parameter"] = Json::object();
  for (const auto& [path, text] : per_parameter) j["per_parameter"][path] = text;
  return j;
}

ReasoningTrace ReasoningTrace::from_json(const Json& j) {
  ReasoningTrace t;
  if (!j.is_object()) return t;
  if (j.contains("function_level") && j["function_level"].is_string()) {
    t.function_level = j["function_level"].get<std::string>();
  }
  if (j.contains("per_parameter") && j["per_parameter"].is_object()) {
    for (const auto& [path, text] : j["per_parameter"].items()) {
      if (text.is_string()) t.per_parameter[path] = text.get<std::string>();
    }
  }
  return t;
}

Json FilteredCall::to_json() const {
  Json j = Json::object();
  j["function_name"] = function_name;
  j["clean_args"] = clean_args;
  j["trace"] = trace.to_json();
  j["strictness_warnings"] = strictness_warnings;
  return j;
}

FilteredCall filter_arguments(const AugmentedTool& tool, const Json& raw_args, FilterMode mode) {
  if (!raw_args.is_object()) {
    throw Error(ErrorCode::InvalidArgument, tool.name() + ": arguments must be a JSON object");
  }
  FilteredCall out;
  out.function_name = tool.name();
  out.clean_args = raw_args;
  const AugmentationManifest& m = tool.manifest;
  Unwrapper unwrapper(m, mode, out);

  if (m.function_level) {
    auto it = out.clean_args.find(m.function_field);
    if (it != out.clean_args.end()) {
      out.trace.function_level = unwrapper.reasoning_text(*it, m.function_field);
      out.clean_args.erase(it);
    }
  }
  unwrapper.unwrap_object(out.clean_args, "");
  return out;
}

FilteredCall filter_call(const ToolRegistry& registry, std::string_view function_name,
                         const Json& raw_args, FilterMode mode) {
  return filter_arguments(registry.at(function_name), raw_args, mode);
}

Json encode_arguments(const AugmentedTool& tool, const Json& clean_args, const ReasoningTrace& trace) {
  if (!clean_args.is_object()) {
    throw Error(ErrorCode::InvalidArgument, tool.name() + ": arguments must be a JSON object");
  }
  Json body = clean_args;
  Wrapper(tool.manifest, trace).wrap_object(body, "");
  if (!tool.manifest.function_level || !trace.function_level) return body;

  Json out = Json::object();
  out[tool.manifest.function_field] = *trace.function_level;
  for (auto& [key, value] : body.items()) out[key] = std::move(value);
  return out;
}

}  // namespace tafc
