#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tafc/augment.hpp"
#include "tafc/json.hpp"
#include "tafc/losses.hpp"
#include "tafc/providers.hpp"
#include "tafc/schema.hpp"
#include "tafc/trace_store.hpp"

namespace tafc {

/// One annotated example: input, target function and parameters, and the
/// reference reasoning.
struct TuningExample {
  std::string x;
  std::string function_name;
  Json theta = Json::object();
  std::string r_star;
  std::optional<std::uint64_t> trace_id;

  Json to_json() const;
};

/// Reads a JSONL dataset of {x, function, theta, r_star}. A line carrying
/// "trace_id" takes whatever it omits from that record of `traces` (r_star
/// falls back to the recorded reasoning). Throws Error(InvalidArgument) with
/// the line number for malformed lines.
std::vector<TuningExample> load_dataset(const std::string& path, const TraceStore* traces = nullptr);
std::vector<TuningExample> parse_dataset(std::string_view jsonl, const TraceStore* traces = nullptr);

/// What the model produced for one example.
struct Prediction {
  Json args = Json::object();
  std::string reasoning;
  bool parsed = false;
};

/// Asks the chat provider to call `tool` for `x` and filters the reply.
Prediction predict_call(ChatProvider& chat, const AugmentedTool& tool, const std::string& x);

/// The JSON object inside a model reply, tolerating code fences and prose
/// around it. nullopt when there is none.
std::optional<Json> extract_json_object(std::string_view reply);

// ---- think-description tuning ----

struct ExecutionTrace {
  std::string x;
  std::string function_name;
  Json theta;
  Json theta_hat;
  std::string reasoning;
  bool correct = false;
};

/// Mean log P(theta | x, f, D) over `tasks`. Uses the logprob provider when it
/// is present and scores every task; otherwise log((correct + 1) / (n + 2))
/// from chat predictions. Throws Error(EmptyTaskSet).
double estimate_description_objective(const std::string& candidate, std::span<const TuningExample> tasks,
                                      const std::map<std::string, ToolSchema, std::less<>>& tools,
                                      const ProviderBundle& providers);

std::string think_meta_prompt(const std::string& current, std::span<const ExecutionTrace> traces);

struct RefinementResult {
  std::string text;
  /// The provider answered blank and `text` is the unchanged current description.
  bool retained = false;
  std::vector<std::string> warnings;
};

/// One meta-refinement step. Throws Error(InvalidArgument) for zero traces and
/// lets Error(ProviderFailure) through.
RefinementResult refine_descriptions(const std::string& current, std::span<const ExecutionTrace> traces,
                                     ChatProvider& chat);

struct ThinkTuningOptions {
  int epochs = 5;
  std::size_t traces_per_epoch = 16;
};

struct ThinkEpoch {
  int epoch = 0;
  std::string candidate;
  double objective = 0.0;
  std::vector<std::string> warnings;
};

struct ThinkTuningResult {
  std::string initial_description;
  double initial_objective = 0.0;
  std::string final_description;
  double final_objective = 0.0;
  /// 0 when no refined candidate beat the initial description.
  int selected_epoch = 0;
  std::vector<ThinkEpoch> epochs;
  std::vector<std::string> warnings;

  Json to_json() const;
};

/// Pluggable pieces of the think-tuning loop.
struct ThinkTuningSteps {
  std::function<double(const std::string& description)> objective;
  std::function<std::vector<ExecutionTrace>(const std::string& description, int epoch)> collect;
  std::function<RefinementResult(const std::string& description, std::span<const ExecutionTrace>)> refine;
};

/// Each epoch collects traces with the current description, adopts the refined
/// candidate and scores it. Returns the best-scoring description seen, the
/// initial one included; ties go to the earliest.
ThinkTuningResult run_think_tuning(const std::string& initial, int epochs, const ThinkTuningSteps& steps);

ThinkTuningResult tune_think_description(const std::string& initial, std::span<const TuningExample> tasks,
                                         const std::map<std::string, ToolSchema, std::less<>>& tools,
                                         const ProviderBundle& providers, const ThinkTuningOptions& options = {});

// ---- tool-description refinement ----

struct ReasoningTriple {
  std::string x;
  std::string r;
  std::string r_star;
};

struct BatchEvaluation {
  LossBreakdown loss;
  std::vector<ReasoningTriple> triples;
};

using BatchEvaluator =
    std::function<BatchEvaluation(const std::string& description, std::span<const TuningExample> batch)>;
using DescriptionRefiner = std::function<std::string(const std::string& description, double loss,
                                                     std::span<const ReasoningTriple> triples)>;

struct ToolIteration {
  int iteration = 0;
  std::string description;
  LossBreakdown loss;
};

struct ToolTuningResult {
  std::string initial_description;
  std::string final_description;
  double final_loss = 0.0;
  std::vector<ToolIteration> history;
  /// converged | unchanged | max_iterations | provider_failure
  std::string stop_reason;
  bool provider_failure = false;
  std::vector<std::string> warnings;

  std::vector<double> loss_history() const;
  Json to_json() const;
};

/// Evaluate the current description on a rotating mini-batch, then adopt the
/// refiner's candidate. Stops once |L_t - L_{t-1}| < epsilon, when the refiner
/// hands back the same text, after max_iterations, or on Error(ProviderFailure)
/// (flagged). Returns the lowest-loss description seen. Throws
/// Error(EmptyTaskSet) for an empty dataset.
ToolTuningResult optimize_tool_description(const std::string& initial, std::span<const TuningExample> dataset,
                                           const AlignmentWeights& weights, const BatchEvaluator& evaluate,
                                           const DescriptionRefiner& refine);

std::string tool_meta_prompt(const std::string& tool_name, const std::string& description, double loss,
                             std::span<const ReasoningTriple> triples);

/// Loss of one description over a batch using the chat model for predictions:
/// component-wise mean of l_sem, l_logic and l_action. A prediction without
/// reasoning costs l_sem = 1.
BatchEvaluation evaluate_alignment(const ToolSchema& tool, const std::string& description,
                                   std::span<const TuningExample> batch, const AlignmentWeights& weights,
                                   const ProviderBundle& providers);

/// Provider-backed wiring of optimize_tool_description. Requires chat, embed and
/// logprob providers (Error(ConfigError) otherwise).
ToolTuningResult tune_tool_description(const ToolSchema& tool, std::span<const TuningExample> dataset,
                                       const AlignmentWeights& weights, const ProviderBundle& providers,
                                       std::optional<std::string> initial = std::nullopt);

}  // namespace tafc
