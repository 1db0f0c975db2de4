#pragma once

#include <span>
#include <string_view>

#include "tafc/json.hpp"
#include "tafc/providers.hpp"
#include "tafc/schema.hpp"

namespace tafc {

inline constexpr double kLogicLossCap = 1e4;
/// Probability floor for cross-entropy terms, so a confident miss costs
/// -log(1e-12) rather than infinity.
inline constexpr double kProbabilityFloor = 1e-12;

/// Weights of the composite alignment loss and the refinement stop rule.
class AlignmentWeights {
 public:
  AlignmentWeights() = default;
  /// Throws Error(InvalidArgument) unless lambdas >= 0, beta >= 0,
  /// epsilon > 0, max_iterations > 0 and batch_size > 0.
  AlignmentWeights(double lambda1, double lambda2, double lambda3, double beta = 0.1,
                   double epsilon = 1e-3, int max_iterations = 50, std::size_t batch_size = 8);

  double lambda1() const { return lambda1_; }
  double lambda2() const { return lambda2_; }
  double lambda3() const { return lambda3_; }
  double beta() const { return beta_; }
  double epsilon() const { return epsilon_; }
  int max_iterations() const { return max_iterations_; }
  std::size_t batch_size() const { return batch_size_; }

  Json to_json() const;
  static AlignmentWeights from_json(const Json& j);

 private:
  double lambda1_ = 1.0 / 3.0;
  double lambda2_ = 1.0 / 3.0;
  double lambda3_ = 1.0 / 3.0;
  double beta_ = 0.1;
  double epsilon_ = 1e-3;
  int max_iterations_ = 50;
  std::size_t batch_size_ = 8;
};

struct LossBreakdown {
  double l_sem = 0.0;
  double l_logic = 0.0;
  double l_action = 0.0;
  double l_align = 0.0;

  Json to_json() const;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// 1 - cos(embed(r), embed(r_star)), in [0, 2]. Throws Error(EmptyText) for an
/// empty text and Error(ZeroVector) when either embedding is all zeros.
double semantic_loss(std::string_view r, std::string_view r_star, EmbeddingProvider& embed);

/// -log P(r_star | x, tool description), clamped to [0, 1e4]. Throws
/// Error(ProviderFailure) when the provider cannot score.
double logic_loss(std::string_view r_star, std::string_view x, std::string_view tool_description,
                  LogProbProvider& logprob);

/// Context string the logic loss conditions on.
std::string logic_context(std::string_view x, std::string_view tool_description);

/// Sum over parameters of BCE (enum/boolean), squared error (number/integer)
/// and 0/1 exact match (everything else). Objects recurse. Throws
/// Error(SchemaMismatch) for keys the schema does not declare.
double parameter_loss(const ToolSchema& schema, const Json& theta_hat, const Json& theta_star);

/// parameter_loss + beta * ||embed(r) - embed(r_star)||_2. An empty text embeds
/// as the zero vector.
double action_loss(const ToolSchema& schema, const Json& theta_hat, const Json& theta_star,
                   std::string_view r, std::string_view r_star, double beta, EmbeddingProvider& embed);

/// l_align = lambda1*l_sem + lambda2*l_logic + lambda3*l_action.
LossBreakdown alignment_loss(double l_sem, double l_logic, double l_action, const AlignmentWeights& weights);

}  // namespace tafc
