#include "tafc/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tafc/error.hpp"

namespace tafc {
namespace {

double bce_target(double p_target) { return -std::log(std::max(p_target, kProbabilityFloor)); }

double probability_of(const Json& hat, const Json& star) {
  if (hat.is_object()) {
    const std::string key = star.is_string() ? star.get<std::string>() : star.dump();
    auto it = hat.find(key);
    if (it == hat.end() || !it->is_number()) return 0.0;
    return std::clamp(it->get<double>(), 0.0, 1.0);
  }
  return hat == star ? 1.0 : 0.0;
}

double node_loss(const ParameterNode& node, const Json& hat, const Json& star, const std::string& path);

double object_loss(const ParameterNode& node, const Json& hat, const Json& star, const std::string& path) {
  for (const Json* side : {&hat, &star}) {
    for (const auto& [key, _] : side->items()) {
      if (node.find(key) == nullptr) {
        throw Error(ErrorCode::SchemaMismatch, "'" + join_path(path, key) + "' is not a declared parameter");
      }
    }
  }
  double total = 0.0;
  for (const auto& prop : node.properties) {
    auto h = hat.find(prop.name);
    auto s = star.find(prop.name);
    const bool has_h = h != hat.end();
    const bool has_s = s != star.end();
    if (!has_h && !has_s) continue;
    if (has_h != has_s) {
      // Missing or unexpected parameter.
      total += 1.0;
      continue;
    }
    total += node_loss(prop.node, *h, *s, join_path(path, prop.name));
  }
  return total;
}

double node_loss(const ParameterNode& node, const Json& hat, const Json& star, const std::string& path) {
  switch (node.kind) {
    case Kind::Boolean: {
      if (!star.is_boolean()) throw Error(ErrorCode::SchemaMismatch, path + ": target is not a boolean");
      double p = 0.0;
      if (hat.is_boolean()) {
        p = hat.get<bool>() ? 1.0 : 0.0;
      } else if (hat.is_number()) {
        p = std::clamp(hat.get<double>(), 0.0, 1.0);
      } else {
        return bce_target(0.0);
      }
      return star.get<bool>() ? bce_target(p) : bce_target(1.0 - p);
    }
    case Kind::Enum:
      return bce_target(probability_of(hat, star));
    case Kind::Number:
    case Kind::Integer:
      if (!star.is_number()) throw Error(ErrorCode::SchemaMismatch, path + ": target is not a number");
      if (!hat.is_number()) return 1.0;
      {
        const double d = hat.get<double>() - star.get<double>();
        return d * d;
      }
    case Kind::Object:
      // Free-form objects (no declared properties) compare as a whole.
      if (hat.is_object() && star.is_object() && !node.properties.empty()) {
        return object_loss(node, hat, star, path);
      }
      return canonically_equal(hat, star) ? 0.0 : 1.0;
    case Kind::String:
    case Kind::Array:
    case Kind::Union:
      return canonically_equal(hat, star) ? 0.0 : 1.0;
  }
  return 0.0;
}

std::vector<double> embed_or_zero(std::string_view text, EmbeddingProvider& embed, std::size_t dim_hint) {
  if (text.empty()) return std::vector<double>(dim_hint, 0.0);
  return embed.embed(text);
}

}  // namespace

AlignmentWeights::AlignmentWeights(double lambda1, double lambda2, double lambda3, double beta,
                                   double epsilon, int max_iterations, std::size_t batch_size)
    : lambda1_(lambda1), lambda2_(lambda2), lambda3_(lambda3), beta_(beta), epsilon_(epsilon),
      max_iterations_(max_iterations), batch_size_(batch_size) {
  for (double v : {lambda1, lambda2, lambda3, beta}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::InvalidArgument, "lambdas and beta must be finite and non-negative");
    }
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (max_iterations <= 0) throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
}

Json AlignmentWeights::to_json() const {
  return Json{{"lambda", {lambda1_, lambda2_, lambda3_}},
              {"beta", beta_},
              {"epsilon", epsilon_},
              {"max_iterations", max_iterations_},
              {"batch_size", batch_size_}};
}

AlignmentWeights AlignmentWeights::from_json(const Json& j) {
  AlignmentWeights d;
  try {
    std::vector<double> lambda = {d.lambda1_, d.lambda2_, d.lambda3_};
    if (j.contains("lambda")) lambda = j["lambda"].get<std::vector<double>>();
    if (lambda.size() != 3) throw Error(ErrorCode::ConfigError, "lambda needs three weights");
    return AlignmentWeights(lambda[0], lambda[1], lambda[2], j.value("beta", d.beta_), j.value("epsilon", d.epsilon_),
                            j.value("max_iterations", d.max_iterations_), j.value("batch_size", d.batch_size_));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("alignment weights: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

Json LossBreakdown::to_json() const {
  return Json{{"l_sem", l_sem}, {"l_logic", l_logic}, {"l_action", l_action}, {"l_align", l_align}};
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::InvalidArgument, "embedding dimensions differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact 1 for identical inputs
  // and symmetric in its arguments.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::InvalidArgument, "embedding dimensions differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double semantic_loss(std::string_view r, std::string_view r_star, EmbeddingProvider& embed) {
  if (r.empty() || r_star.empty()) throw Error(ErrorCode::EmptyText, "semantic loss needs two non-empty texts");
  const auto a = embed.embed(r);
  const auto b = embed.embed(r_star);
  return 1.0 - cosine_similarity(a, b);
}

std::string logic_context(std::string_view x, std::string_view tool_description) {
  std::string ctx = "Tool description: ";
  ctx += tool_description;
  ctx += "\nUser request: ";
  ctx += x;
  return ctx;
}

double logic_loss(std::string_view r_star, std::string_view x, std::string_view tool_description,
                  LogProbProvider& logprob) {
  const auto lp = logprob.logprob(r_star, logic_context(x, tool_description));
  if (!lp) throw Error(ErrorCode::ProviderFailure, "log-probability provider cannot score the reference reasoning");
  if (std::isnan(*lp)) throw Error(ErrorCode::ProviderFailure, "log-probability provider returned NaN");
  return std::clamp(-*lp, 0.0, kLogicLossCap);
}

double parameter_loss(const ToolSchema& schema, const Json& theta_hat, const Json& theta_star) {
  if (!theta_hat.is_object() || !theta_star.is_object()) {
    throw Error(ErrorCode::SchemaMismatch, "parameters must be JSON objects");
  }
  return object_loss(schema.parameters, theta_hat, theta_star, "");
}

double action_loss(const ToolSchema& schema, const Json& theta_hat, const Json& theta_star,
                   std::string_view r, std::string_view r_star, double beta, EmbeddingProvider& embed) {
  const double params = parameter_loss(schema, theta_hat, theta_star);
  if (beta == 0.0 || r == r_star) return params;
  std::vector<double> a;
  std::vector<double> b;
  if (!r.empty()) a = embed.embed(r);
  if (!r_star.empty()) b = embed.embed(r_star);
  if (a.empty()) a = embed_or_zero(r, embed, b.size());
  if (b.empty()) b = embed_or_zero(r_star, embed, a.size());
  return params + beta * euclidean_distance(a, b);
}

LossBreakdown alignment_loss(double l_sem, double l_logic, double l_action, const AlignmentWeights& w) {
  LossBreakdown out;
  out.l_sem = l_sem;
  out.l_logic = l_logic;
  out.l_action = l_action;
  out.l_align = w.lambda1() * l_sem + w.lambda2() * l_logic + w.lambda3() * l_action;
  return out;
}

}  // namespace tafc
