#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tafc/schema.hpp"

namespace tafc {

/// Weights of the complexity scorer and the selection threshold.
class ComplexityWeights {
 public:
  static constexpr double kDefaultTau = 0.6;

  ComplexityWeights() = default;
  /// Throws Error(InvalidArgument) unless all alphas are finite and >= 0 and
  /// tau lies in [0, 1].
  ComplexityWeights(double alpha1, double alpha2, double alpha3, double tau = kDefaultTau);

  double alpha1() const { return alpha1_; }
  double alpha2() const { return alpha2_; }
  double alpha3() const { return alpha3_; }
  double tau() const { return tau_; }

 private:
  double alpha1_ = 1.0;
  double alpha2_ = 1.0;
  double alpha3_ = 1.0;
  double tau_ = kDefaultTau;
};

struct ComplexityEntry {
  std::string path;
  double dep = 0.0;
  double type_score = 0.0;
  double constraint_score = 0.0;
  double psi = 0.0;
};

using ComplexityReport = std::vector<ComplexityEntry>;

/// Standard logistic 1 / (1 + e^-z), evaluated without overflow for either sign.
double logistic(double z);

/// psi = logistic(a1*dep + a2*type + a3*constraint).
double combine_subscores(double dep, double type_score, double constraint_score,
                         const ComplexityWeights& weights);

/// Sub-scores of the property `name` of an object node. Siblings and the
/// required set are taken from `parent`. Throws Error(UnknownParameter).
ComplexityEntry score_property(const ParameterNode& parent, std::string_view name,
                               const ComplexityWeights& weights, std::string_view parent_path = "");

ComplexityEntry score_parameter(const ToolSchema& schema, std::string_view param,
                                const ComplexityWeights& weights);

/// Top-level parameters with psi strictly greater than tau.
std::set<std::string> select_reasoning_parameters(const ToolSchema& schema,
                                                  const ComplexityWeights& weights);

/// Scores every parameter, descending into object properties up to
/// `max_depth` levels, in schema order.
ComplexityReport score_tool(const ToolSchema& schema, const ComplexityWeights& weights,
                            int max_depth = 4);

/// Sub-score definitions, exposed for testing.
double dependency_score(const ParameterNode& parent, std::string_view name);
double type_complexity_score(const ParameterNode& node);
double constraint_strictness_score(const ParameterNode& node, bool required);

}  // namespace tafc
