#include "tafc/tuning.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "tafc/error.hpp"
#include "tafc/filter.hpp"

namespace tafc {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

const ToolSchema& tool_for(const std::map<std::string, ToolSchema, std::less<>>& tools, const std::string& name) {
  auto it = tools.find(name);
  if (it == tools.end()) throw Error(ErrorCode::UnknownFunction, "no tool named '" + name + "'");
  return it->second;
}

AugmentedTool with_think_description(const ToolSchema& origin, const std::string& description) {
  AugmentOptions options;
  options.think.description_text = description;
  return augment_tool(origin, options);
}

std::string objective_context(const ToolSchema& tool, const std::string& description, const std::string& x) {
  return "Function: " + tool.name + "\nFunction description: " + tool.description.value_or("") +
         "\nReasoning field: " + description + "\nUser request: " + x;
}

std::string required_string(const Json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::InvalidArgument,
                "dataset line " + std::to_string(line) + ": '" + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

std::vector<TuningExample> rotating_batch(std::span<const TuningExample> data, std::size_t start,
                                          std::size_t size) {
  std::vector<TuningExample> out;
  const std::size_t n = std::min(size, data.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(data[(start + i) % data.size()]);
  return out;
}

}  // namespace

Json TuningExample::to_json() const {
  Json j = {{"x", x}, {"function", function_name}, {"theta", theta}, {"r_star", r_star}};
  if (trace_id) j["trace_id"] = *trace_id;
  return j;
}

std::vector<TuningExample> parse_dataset(std::string_view jsonl, const TraceStore* traces) {
  std::vector<TuningExample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    auto nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    const std::string line = trim(jsonl.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty()) continue;

    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(line_no) + ": expected an object");
    }

    TuningExample ex;
    if (j.contains("trace_id")) {
      if (!j["trace_id"].is_number_unsigned()) {
        throw Error(ErrorCode::InvalidArgument,
                    "dataset line " + std::to_string(line_no) + ": trace_id must be a non-negative integer");
      }
      ex.trace_id = j["trace_id"].get<std::uint64_t>();
      if (traces == nullptr) {
        throw Error(ErrorCode::InvalidArgument,
                    "dataset line " + std::to_string(line_no) + ": trace_id given but no trace store configured");
      }
      const auto record = traces->get(*ex.trace_id);
      if (!record) {
        throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(line_no) + ": no trace record " +
                                                    std::to_string(*ex.trace_id));
      }
      ex.x = record->x;
      ex.function_name = record->function_name;
      ex.theta = record->parameters;
      ex.r_star = record->trace.flatten();
    }
    if (j.contains("x") || !ex.trace_id) ex.x = required_string(j, "x", line_no);
    if (j.contains("function") || !ex.trace_id) ex.function_name = required_string(j, "function", line_no);
    if (j.contains("r_star") || !ex.trace_id) ex.r_star = required_string(j, "r_star", line_no);
    if (j.contains("theta")) {
      ex.theta = j["theta"];
    } else if (!ex.trace_id) {
      throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(line_no) + ": missing 'theta'");
    }
    if (!ex.theta.is_object()) {
      throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(line_no) + ": theta must be an object");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TuningExample> load_dataset(const std::string& path, const TraceStore* traces) {
  return parse_dataset(read_text_file(path), traces);
}

std::optional<Json> extract_json_object(std::string_view reply) {
  const auto first = reply.find('{');
  const auto last = reply.rfind('}');
  if (first == std::string_view::npos || last == std::string_view::npos || last < first) return std::nullopt;
  try {
    Json j = Json::parse(reply.substr(first, last - first + 1));
    if (j.is_object()) return j;
  } catch (const nlohmann::json::parse_error&) {
  }
  return std::nullopt;
}

Prediction predict_call(ChatProvider& chat, const AugmentedTool& tool, const std::string& x) {
  const std::string system =
      "You call functions. Reply with one JSON object holding the arguments for the function below and "
      "nothing else.\nFunction: " +
      serialize_tool_schema(tool.schema).dump();
  const std::string reply = chat.complete(system, x);
  Prediction p;
  const auto raw = extract_json_object(reply);
  if (!raw) return p;
  const FilteredCall call = filter_arguments(tool, *raw, FilterMode::Lenient);
  p.args = call.clean_args;
  p.reasoning = call.trace.function_level ? *call.trace.function_level : call.trace.flatten();
  p.parsed = true;
  return p;
}

double estimate_description_objective(const std::string& candidate, std::span<const TuningExample> tasks,
                                      const std::map<std::string, ToolSchema, std::less<>>& tools,
                                      const ProviderBundle& providers) {
  if (tasks.empty()) throw Error(ErrorCode::EmptyTaskSet, "objective needs at least one task");

  if (providers.logprob) {
    double sum = 0.0;
    bool scored = true;
    for (const auto& t : tasks) {
      const ToolSchema& tool = tool_for(tools, t.function_name);
      const auto lp = providers.logprob->logprob(canonical_dump(t.theta), objective_context(tool, candidate, t.x));
      if (!lp || std::isnan(*lp)) {
        scored = false;
        break;
      }
      sum += *lp;
    }
    if (scored) return sum / static_cast<double>(tasks.size());
  }

  if (!providers.chat) throw Error(ErrorCode::ProviderFailure, "objective needs a chat or logprob provider");
  std::size_t correct = 0;
  for (const auto& t : tasks) {
    const AugmentedTool tool = with_think_description(tool_for(tools, t.function_name), candidate);
    const Prediction p = predict_call(*providers.chat, tool, t.x);
    if (p.parsed && canonically_equal(p.args, t.theta)) ++correct;
  }
  return std::log((static_cast<double>(correct) + 1.0) / (static_cast<double>(tasks.size()) + 2.0));
}

std::string think_meta_prompt(const std::string& current, std::span<const ExecutionTrace> traces) {
  std::ostringstream out;
  out << "Current description of the reasoning field:\n" << current << "\n\nExecution traces:\n";
  int i = 0;
  for (const auto& t : traces) {
    out << "[" << ++i << "] input: " << t.x << "\n"
        << "    function: " << t.function_name << "\n"
        << "    expected arguments: " << canonical_dump(t.theta) << "\n"
        << "    produced arguments: " << canonical_dump(t.theta_hat) << "\n"
        << "    reasoning: " << t.reasoning << "\n"
        << "    correct: " << (t.correct ? "yes" : "no") << "\n";
  }
  out << "\nWrite an improved description that leads to correct arguments.";
  return out.str();
}

RefinementResult refine_descriptions(const std::string& current, std::span<const ExecutionTrace> traces,
                                     ChatProvider& chat) {
  if (traces.empty()) throw Error(ErrorCode::InvalidArgument, "refinement needs at least one trace");
  static const std::string system =
      "You revise the description of a reasoning field attached to function-calling tools. "
      "Reply with the new description text only.";
  RefinementResult r;
  r.text = trim(chat.complete(system, think_meta_prompt(current, traces)));
  if (r.text.empty()) {
    r.text = current;
    r.retained = true;
    r.warnings.push_back(std::string(to_string(ErrorCode::EmptyCandidate)) +
                         ": refiner returned a blank candidate; current description kept");
  }
  return r;
}

Json ThinkTuningResult::to_json() const {
  Json j = Json::object();
  j["initial_description"] = initial_description;
  j["initial_objective"] = initial_objective;
  Json list = Json::array();
  for (const auto& e : epochs) {
    Json item = {{"epoch", e.epoch}, {"candidate", e.candidate}, {"objective", e.objective}};
    if (!e.warnings.empty()) item["warnings"] = e.warnings;
    list.push_back(std::move(item));
  }
  j["epochs"] = std::move(list);
  j["selected_epoch"] = selected_epoch;
  j["final_description"] = final_description;
  j["final_objective"] = final_objective;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

ThinkTuningResult run_think_tuning(const std::string& initial, int epochs, const ThinkTuningSteps& steps) {
  if (epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0");
  ThinkTuningResult result;
  result.initial_description = initial;
  result.initial_objective = steps.objective(initial);
  result.final_description = initial;
  result.final_objective = result.initial_objective;

  std::string current = initial;
  for (int e = 1; e <= epochs; ++e) {
    const auto traces = steps.collect(current, e);
    RefinementResult refined = steps.refine(current, traces);
    ThinkEpoch epoch;
    epoch.epoch = e;
    epoch.candidate = refined.text;
    epoch.warnings = refined.warnings;
    epoch.objective = steps.objective(refined.text);
    for (const auto& w : refined.warnings) result.warnings.push_back("epoch " + std::to_string(e) + ": " + w);
    if (epoch.objective > result.final_objective) {
      result.final_objective = epoch.objective;
      result.final_description = refined.text;
      result.selected_epoch = e;
    }
    current = refined.text;
    result.epochs.push_back(std::move(epoch));
  }
  return result;
}

ThinkTuningResult tune_think_description(const std::string& initial, std::span<const TuningExample> tasks,
                                         const std::map<std::string, ToolSchema, std::less<>>& tools,
                                         const ProviderBundle& providers, const ThinkTuningOptions& options) {
  if (tasks.empty()) throw Error(ErrorCode::EmptyTaskSet, "think tuning needs at least one task");
  if (!providers.chat) throw Error(ErrorCode::ConfigError, "think tuning needs a chat provider");
  if (options.traces_per_epoch == 0) throw Error(ErrorCode::InvalidArgument, "traces_per_epoch must be positive");

  ThinkTuningSteps steps;
  steps.objective = [&](const std::string& d) { return estimate_description_objective(d, tasks, tools, providers); };
  steps.collect = [&](const std::string& d, int epoch) {
    const auto batch = rotating_batch(tasks, static_cast<std::size_t>(epoch - 1) * options.traces_per_epoch,
                                      options.traces_per_epoch);
    std::vector<ExecutionTrace> traces;
    for (const auto& t : batch) {
      const AugmentedTool tool = with_think_description(tool_for(tools, t.function_name), d);
      const Prediction p = predict_call(*providers.chat, tool, t.x);
      traces.push_back(ExecutionTrace{t.x, t.function_name, t.theta, p.args, p.reasoning,
                                      p.parsed && canonically_equal(p.args, t.theta)});
    }
    return traces;
  };
  steps.refine = [&](const std::string& d, std::span<const ExecutionTrace> traces) {
    return refine_descriptions(d, traces, *providers.chat);
  };
  return run_think_tuning(initial, options.epochs, steps);
}

std::vector<double> ToolTuningResult::loss_history() const {
  std::vector<double> out;
  out.reserve(history.size());
  for (const auto& h : history) out.push_back(h.loss.l_align);
  return out;
}

Json ToolTuningResult::to_json() const {
  Json j = Json::object();
  j["initial_description"] = initial_description;
  Json list = Json::array();
  for (const auto& h : history) {
    list.push_back({{"iteration", h.iteration}, {"description", h.description}, {"loss", h.loss.to_json()}});
  }
  j["history"] = std::move(list);
  j["loss_history"] = loss_history();
  j["final_description"] = final_description;
  j["final_loss"] = final_loss;
  j["stop_reason"] = stop_reason;
  j["provider_failure"] = provider_failure;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

ToolTuningResult optimize_tool_description(const std::string& initial, std::span<const TuningExample> dataset,
                                           const AlignmentWeights& weights, const BatchEvaluator& evaluate,
                                           const DescriptionRefiner& refine) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyTaskSet, "tool-description tuning needs a non-empty dataset");
  ToolTuningResult result;
  result.initial_description = initial;
  result.final_description = initial;
  result.final_loss = std::numeric_limits<double>::infinity();
  result.stop_reason = "max_iterations";

  std::string current = initial;
  const std::size_t b = weights.batch_size();
  for (int t = 1; t <= weights.max_iterations(); ++t) {
    const auto batch = rotating_batch(dataset, static_cast<std::size_t>(t - 1) * b, b);
    BatchEvaluation eval;
    try {
      eval = evaluate(current, batch);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderFailure) throw;
      result.provider_failure = true;
      result.stop_reason = "provider_failure";
      result.warnings.push_back(e.what());
      break;
    }
    const double loss = eval.loss.l_align;
    result.history.push_back(ToolIteration{t, current, eval.loss});
    if (loss < result.final_loss) {
      result.final_loss = loss;
      result.final_description = current;
    }
    if (t >= 2 && std::abs(loss - result.history[result.history.size() - 2].loss.l_align) < weights.epsilon()) {
      result.stop_reason = "converged";
      break;
    }
    if (t == weights.max_iterations()) break;

    std::string candidate;
    try {
      candidate = trim(refine(current, loss, eval.triples));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ProviderFailure) throw;
      result.provider_failure = true;
      result.stop_reason = "provider_failure";
      result.warnings.push_back(e.what());
      break;
    }
    if (candidate.empty()) {
      result.warnings.push_back("iteration " + std::to_string(t) + ": " +
                                std::string(to_string(ErrorCode::EmptyCandidate)) +
                                ": refiner returned a blank candidate; current description kept");
      continue;
    }
    if (candidate == current) {
      // Same description, same loss: the next difference would be zero.
      result.stop_reason = "unchanged";
      break;
    }
    current = std::move(candidate);
  }
  if (result.history.empty()) result.final_loss = 0.0;
  return result;
}

std::string tool_meta_prompt(const std::string& tool_name, const std::string& description, double loss,
                             std::span<const ReasoningTriple> triples) {
  std::ostringstream out;
  out << "Tool: " << tool_name << "\nCurrent description:\n" << description << "\n\nAlignment loss: " << loss
      << "\n\nExamples:\n";
  int i = 0;
  for (const auto& t : triples) {
    out << "[" << ++i << "] input: " << t.x << "\n"
        << "    model reasoning: " << (t.r.empty() ? "(none)" : t.r) << "\n"
        << "    reference reasoning: " << t.r_star << "\n";
  }
  out << "\nRewrite the tool description so the model's reasoning matches the reference reasoning.";
  return out.str();
}

BatchEvaluation evaluate_alignment(const ToolSchema& tool, const std::string& description,
                                   std::span<const TuningExample> batch, const AlignmentWeights& weights,
                                   const ProviderBundle& providers) {
  if (!providers.chat || !providers.embed || !providers.logprob) {
    throw Error(ErrorCode::ConfigError, "alignment evaluation needs chat, embed and logprob providers");
  }
  if (batch.empty()) throw Error(ErrorCode::EmptyTaskSet, "empty batch");
  ToolSchema described = tool;
  described.description = description;
  AugmentOptions options;
  const AugmentedTool augmented = augment_tool(described, options);

  BatchEvaluation out;
  double sem = 0.0, logic = 0.0, action = 0.0;
  for (const auto& ex : batch) {
    const Prediction p = predict_call(*providers.chat, augmented, ex.x);
    double s = 1.0;
    if (!p.reasoning.empty() && !ex.r_star.empty()) {
      try {
        s = semantic_loss(p.reasoning, ex.r_star, *providers.embed);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVector) throw;
      }
    }
    sem += s;
    logic += logic_loss(ex.r_star, ex.x, description, *providers.logprob);
    double a;
    try {
      a = action_loss(tool, p.args, ex.theta, p.reasoning, ex.r_star, weights.beta(), *providers.embed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SchemaMismatch) throw;
      // Undeclared keys in the prediction: score it as if nothing was predicted.
      a = action_loss(tool, Json::object(), ex.theta, p.reasoning, ex.r_star, weights.beta(), *providers.embed);
    }
    action += a;
    out.triples.push_back(ReasoningTriple{ex.x, p.reasoning, ex.r_star});
  }
  const double n = static_cast<double>(batch.size());
  out.loss = alignment_loss(sem / n, logic / n, action / n, weights);
  return out;
}

ToolTuningResult tune_tool_description(const ToolSchema& tool, std::span<const TuningExample> dataset,
                                       const AlignmentWeights& weights, const ProviderBundle& providers,
                                       std::optional<std::string> initial) {
  if (!providers.chat || !providers.embed || !providers.logprob) {
    throw Error(ErrorCode::ConfigError, "tool-description tuning needs chat, embed and logprob providers");
  }
  std::vector<TuningExample> mine;
  for (const auto& ex : dataset) {
    if (ex.function_name == tool.name) mine.push_back(ex);
  }
  const std::string start = initial.value_or(tool.description.value_or(""));
  static const std::string system =
      "You rewrite tool descriptions for function-calling models. Reply with the new description text only.";
  return optimize_tool_description(
      start, mine, weights,
      [&](const std::string& d, std::span<const TuningExample> batch) {
        return evaluate_alignment(tool, d, batch, weights, providers);
      },
      [&](const std::string& d, double loss, std::span<const ReasoningTriple> triples) {
        return providers.chat->complete(system, tool_meta_prompt(tool.name, d, loss, triples));
      });
}

}  // namespace tafc
