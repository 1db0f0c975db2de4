#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tafc/complexity.hpp"
#include "tafc/schema.hpp"

namespace tafc {

inline constexpr std::string_view kDefaultThinkField = "think";
inline constexpr std::string_view kFallbackThinkField = "__tafc_think";
inline constexpr std::string_view kValueField = "value";
/// Vendor-extension key placed on the augmented parameters object.
inline constexpr std::string_view kMarkerKey = "x-tafc";

struct ThinkDescriptor {
  std::string field_name = std::string(kDefaultThinkField);
  /// Function-level reasoning instruction. Empty selects the built-in template.
  std::string description_text;
};

/// Exactly which positions of the original schema were changed.
struct AugmentationManifest {
  bool function_level = false;
  std::string function_field = std::string(kDefaultThinkField);
  std::string wrapper_field = std::string(kDefaultThinkField);
  /// The original parameters object had no "type" and one was added.
  bool added_object_type = false;
  /// Dotted property paths wrapped as {think, value}, parents before children.
  std::vector<std::string> parameter_paths;

  Json to_json() const;
  static AugmentationManifest from_json(const Json& j);
};

struct AugmentedTool {
  ToolSchema schema;
  AugmentationManifest manifest;
  ToolSchema origin;
  std::vector<std::string> warnings;

  const std::string& name() const { return origin.name; }
};

struct AugmentOptions {
  ComplexityWeights weights;
  ThinkDescriptor think;
  /// Property levels considered for parameter-level wrapping.
  int max_depth = 4;
  bool function_level = true;
};

/// Paths whose psi exceeds tau, scoring nested object properties against
/// their own siblings, up to `max_depth` levels.
std::vector<std::string> plan_wrapped_paths(const ToolSchema& schema,
                                            const ComplexityWeights& weights, int max_depth = 4);

/// Adds the optional function-level reasoning field (serialized first) and wraps
/// every selected parameter as {think, value}. A schema that already carries the
/// marker is returned as is.
AugmentedTool augment_tool(const ToolSchema& schema, const AugmentOptions& options);

AugmentedTool augment_tool(const ToolSchema& schema, const ComplexityWeights& weights,
                           const ThinkDescriptor& think);

/// Applies an explicit wrap plan instead of the complexity selection. Throws
/// Error(UnknownTarget) if a path does not name an object property chain.
AugmentedTool apply_augmentation(const ToolSchema& origin, const std::vector<std::string>& paths,
                                 const ThinkDescriptor& think, bool function_level = true);

/// Inverse of augmentation: drops the reasoning field, unwraps manifest paths
/// and removes the marker.
ToolSchema strip_augmentation(const ToolSchema& augmented, const AugmentationManifest& manifest);

std::optional<AugmentationManifest> read_marker(const ToolSchema& schema);

/// Serialized tool without the marker extension, for upstreams that reject
/// unknown keywords.
Json without_marker(const Json& serialized_tool);

/// Built-in reasoning instruction. An empty target means the function-level
/// field; otherwise a dotted parameter path. Throws Error(UnknownTarget).
std::string default_think_description(const ToolSchema& schema, std::string_view target = "");

/// Augmented tools keyed by function name.
class ToolRegistry {
 public:
  /// Throws Error(InvalidArgument) on a duplicate name.
  void add(AugmentedTool tool);
  const AugmentedTool* find(std::string_view name) const;
  /// Throws Error(UnknownFunction).
  const AugmentedTool& at(std::string_view name) const;
  std::size_t size() const { return tools_.size(); }
  bool empty() const { return tools_.empty(); }
  auto begin() const { return tools_.begin(); }
  auto end() const { return tools_.end(); }

 private:
  std::map<std::string, AugmentedTool, std::less<>> tools_;
};

std::vector<std::string> split_path(std::string_view path);

}  // namespace tafc
