#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tafc/budget.hpp"
#include "tafc/gateway.hpp"
#include "tafc/json.hpp"
#include "tafc/schema.hpp"

namespace tafc {

/// How the scripted model acts on one task.
struct TaskBehavior {
  /// Arguments of a correct call; null means the task's expected parameters.
  Json correct_args = nullptr;
  /// Arguments emitted when the draw fails; null means the correct arguments
  /// with their first value perturbed.
  Json wrong_args = nullptr;
  /// Tool picked by a failed draw; empty means the expected tool.
  std::string wrong_tool;
  double p_correct_with_think = 1.0;
  double p_correct_without_think = 1.0;
  std::string reasoning = "The request names every value this call needs.";
  /// Calls the model makes before giving up on the task.
  int max_attempts = 1;
  /// Simulated upstream latency per request.
  double stall_seconds = 0.0;
};

struct EvalTask {
  std::string id;
  std::string x;
  std::string expected_tool;
  Json expected_theta = Json::object();
  std::string family;
  TaskBehavior behavior;
};

struct EvalScenario {
  std::string name;
  Json raw_tools = Json::array();
  std::vector<ToolSchema> tools;
  std::vector<EvalTask> tasks;
  int runs = 3;

  /// Throws Error(ScenarioInvalid).
  static EvalScenario from_json(const Json& j);
  static EvalScenario load(const std::string& path);
  const ToolSchema* find_tool(std::string_view name) const;
};

enum class EvalMode { Standard, Tafc };
std::string_view to_string(EvalMode mode);
/// Throws Error(InvalidArgument).
EvalMode eval_mode_from_string(std::string_view text);

/// In-process model endpoint that answers chat requests from the scenario's
/// behavior table. Correct parameter filling succeeds with probability
/// p_correct_with_think when the received schema of the expected tool carries a
/// function-level reasoning field, and p_correct_without_think otherwise. Every
/// step makes exactly one draw, seeded from (seed, run, task, step).
class ScriptedModel {
 public:
  ScriptedModel(const EvalScenario& scenario, std::uint64_t seed, std::shared_ptr<ManualClock> clock);

  void set_run(int run) { run_ = run; }
  UpstreamReply respond(const std::string& body);

  /// True when `received` (a tool as sent upstream) adds a reasoning field to `origin`.
  static bool has_think_field(const Json& received, const ToolSchema& origin);
  /// Uniform draw in [0, 1) for one step.
  static double draw(std::uint64_t seed, int run, std::string_view task_id, int step);

 private:
  const EvalScenario& scenario_;
  std::uint64_t seed_;
  std::shared_ptr<ManualClock> clock_;
  int run_ = 0;
  std::map<std::string, const EvalTask*, std::less<>> by_input_;
};

struct TaskOutcome {
  std::string id;
  std::string family;
  bool passed = false;
  int tool_calls = 0;
  /// passed | wrong_call | no_call | budget_exhausted | timeout | upstream_error
  std::string status;
};

struct RunResult {
  int run = 0;
  double pass_rate = 0.0;
  std::vector<TaskOutcome> tasks;
  std::size_t tool_calls = 0;
  std::size_t calls_with_reasoning = 0;
  std::map<std::string, std::size_t> outcome_counts;
};

struct EvalReport {
  std::string scenario;
  EvalMode mode = EvalMode::Tafc;
  std::uint64_t seed = 0;
  std::vector<RunResult> runs;
  double pass_rate_mean = 0.0;
  /// Sample standard deviation over runs; 0 for a single run.
  double pass_rate_stdev = 0.0;
  /// Fraction of recorded tool calls that carried any reasoning.
  double reasoning_coverage = 0.0;

  std::vector<double> pass_rates() const;
  Json to_json() const;
};

/// Runs every task of every run through an in-process gateway in front of the
/// scripted model. Standard mode disables augmentation and nothing else.
/// `runs` overrides the scenario's run count. No network is used.
EvalReport run_eval(const EvalScenario& scenario, EvalMode mode, std::uint64_t seed,
                    std::optional<int> runs = std::nullopt);

}  // namespace tafc
