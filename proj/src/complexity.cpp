#include "tafc/complexity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tafc/error.hpp"

namespace tafc {
namespace {

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::set<std::string, std::less<>> tokenize(std::string_view text) {
  std::set<std::string, std::less<>> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_char(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_token_char(text[i])) ++i;
    if (i > start) tokens.emplace(text.substr(start, i - start));
  }
  return tokens;
}

double kind_base(Kind kind) {
  switch (kind) {
    case Kind::String:
    case Kind::Number:
    case Kind::Integer:
    case Kind::Boolean:
      return 0.0;
    case Kind::Enum: return 0.25;
    case Kind::Array: return 0.5;
    case Kind::Object: return 0.75;
    case Kind::Union: return 1.0;
  }
  return 0.0;
}

void score_level(const ParameterNode& object, const std::string& prefix, int level, int max_depth,
                 const ComplexityWeights& weights, ComplexityReport& out) {
  for (const auto& prop : object.properties) {
    out.push_back(score_property(object, prop.name, weights, prefix));
    if (prop.node.kind == Kind::Object && level < max_depth) {
      score_level(prop.node, join_path(prefix, prop.name), level + 1, max_depth, weights, out);
    }
  }
}

}  // namespace

ComplexityWeights::ComplexityWeights(double alpha1, double alpha2, double alpha3, double tau)
    : alpha1_(alpha1), alpha2_(alpha2), alpha3_(alpha3), tau_(tau) {
  for (double a : {alpha1, alpha2, alpha3}) {
    if (!std::isfinite(a) || a < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "complexity weights must be finite and non-negative");
    }
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "tau must lie in [0, 1]");
  }
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double combine_subscores(double dep, double type_score, double constraint_score,
                         const ComplexityWeights& w) {
  return logistic(w.alpha1() * dep + w.alpha2() * type_score + w.alpha3() * constraint_score);
}

double dependency_score(const ParameterNode& parent, std::string_view name) {
  const ParameterNode* node = parent.find(name);
  if (node == nullptr || !node->description) return 0.0;
  const auto tokens = tokenize(*node->description);
  int mentioned = 0;
  for (const auto& sibling : parent.properties) {
    if (sibling.name != name && tokens.count(sibling.name) != 0) ++mentioned;
  }
  return std::min(1.0, mentioned / 3.0);
}

double type_complexity_score(const ParameterNode& node) {
  return std::min(1.0, kind_base(node.kind) + 0.15 * (node.depth() - 1));
}

double constraint_strictness_score(const ParameterNode& node, bool required) {
  const int c = node.constraints.count() + (required ? 1 : 0);
  return std::min(1.0, c / 4.0);
}

ComplexityEntry score_property(const ParameterNode& parent, std::string_view name,
                               const ComplexityWeights& weights, std::string_view parent_path) {
  const ParameterNode* node = parent.find(name);
  if (node == nullptr) {
    throw Error(ErrorCode::UnknownParameter, "no parameter named '" + std::string(name) + "'");
  }
  ComplexityEntry e;
  e.path = join_path(parent_path, name);
  e.dep = dependency_score(parent, name);
  e.type_score = type_complexity_score(*node);
  e.constraint_score = constraint_strictness_score(*node, parent.is_required(name));
  e.psi = combine_subscores(e.dep, e.type_score, e.constraint_score, weights);
  return e;
}

ComplexityEntry score_parameter(const ToolSchema& schema, std::string_view param,
                                const ComplexityWeights& weights) {
  return score_property(schema.parameters, param, weights);
}

std::set<std::string> select_reasoning_parameters(const ToolSchema& schema,
                                                  const ComplexityWeights& weights) {
  std::set<std::string> selected;
  for (const auto& prop : schema.properties()) {
    if (score_parameter(schema, prop.name, weights).psi > weights.tau()) selected.insert(prop.name);
  }
  return selected;
}

ComplexityReport score_tool(const ToolSchema& schema, const ComplexityWeights& weights,
                            int max_depth) {
  ComplexityReport out;
  if (max_depth >= 1) score_level(schema.parameters, "", 1, max_depth, weights, out);
  return out;
}

}  // namespace tafc
