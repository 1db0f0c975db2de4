#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tafc/augment.hpp"
#include "tafc/filter.hpp"
#include "tafc/json.hpp"

namespace tafc::testing {

/// Random tool schemas (nesting depth <= 4, <= 8 properties per level) with
/// only satisfiable constraints, and arguments that validate against them.
class CaseGenerator {
 public:
  explicit CaseGenerator(std::uint64_t seed) : rng_(seed) {}

  /// A serialized tool in the OpenAI envelope.
  Json tool(const std::string& name = "fn");
  /// Valid arguments for a serialized tool's parameters object.
  Json arguments(const Json& parameters);
  Json value_for(const Json& node);

  /// Every property path reachable through object properties, parents first.
  static std::vector<std::string> object_paths(const Json& parameters, int max_depth = 4);

  /// A random subset of `paths`, kept in parents-first order.
  std::vector<std::string> subset(const std::vector<std::string>& paths, double keep);
  /// Reasoning for the given manifest: function-level text (sometimes absent or
  /// empty) and entries for a random subset of paths.
  ReasoningTrace reasoning(const AugmentationManifest& manifest);
  std::string text(std::size_t max_words = 8);

  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  Json object_node(int depth);
  Json node(int depth);
  std::string property_name(const std::vector<std::string>& taken);
  std::string lower_word();

  std::mt19937_64 rng_;
};

/// What unwrapping should produce, computed path by path from the manifest.
struct OracleUnwrap {
  Json clean = Json::object();
  std::optional<std::string> function_level;
  std::map<std::string, std::string> per_parameter;
  /// A wrapped position lacked "value" or a reasoning field was not a string.
  bool malformed = false;
};

OracleUnwrap oracle_unwrap(const Json& raw_args, const AugmentationManifest& manifest);

/// Removes reasoning fields, wrappers and the marker from a serialized
/// augmented tool, navigating by manifest paths.
Json oracle_strip_schema(const Json& serialized_augmented, const AugmentationManifest& manifest);

}  // namespace tafc::testing
