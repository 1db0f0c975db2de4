#include "tafc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "tafc/augment.hpp"
#include "tafc/error.hpp"
#include "tafc/filter.hpp"

namespace tafc {
namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ScenarioInvalid, what); }

std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

Json perturbed(const Json& args) {
  Json out = args;
  if (out.empty()) {
    out["__unexpected"] = true;
    return out;
  }
  auto it = out.begin();
  Json& v = it.value();
  if (v.is_string()) {
    v = v.get<std::string>() + "x";
  } else if (v.is_number_integer()) {
    v = v.get<std::int64_t>() + 1;
  } else if (v.is_number()) {
    v = v.get<double>() + 1.0;
  } else if (v.is_boolean()) {
    v = !v.get<bool>();
  } else {
    out.erase(it);
  }
  return out;
}

double probability(const Json& j, const char* key, double fallback, const std::string& where) {
  const double p = j.value(key, fallback);
  if (!(p >= 0.0 && p <= 1.0)) invalid(where + ": " + key + " must lie in [0, 1]");
  return p;
}

TaskBehavior parse_behavior(const Json& j, const std::string& where) {
  TaskBehavior b;
  if (j.is_null()) return b;
  if (!j.is_object()) invalid(where + ": behavior must be an object");
  if (j.contains("correct_args")) b.correct_args = j["correct_args"];
  if (j.contains("wrong_args")) b.wrong_args = j["wrong_args"];
  b.wrong_tool = j.value("wrong_tool", std::string());
  b.p_correct_with_think = probability(j, "p_correct_with_think", b.p_correct_with_think, where);
  b.p_correct_without_think = probability(j, "p_correct_without_think", b.p_correct_without_think, where);
  b.reasoning = j.value("reasoning", b.reasoning);
  b.max_attempts = j.value("max_attempts", b.max_attempts);
  b.stall_seconds = j.value("stall_seconds", b.stall_seconds);
  if (b.max_attempts < 1) invalid(where + ": max_attempts must be >= 1");
  if (!(b.stall_seconds >= 0.0)) invalid(where + ": stall_seconds must be >= 0");
  for (const Json* args : {&b.correct_args, &b.wrong_args}) {
    if (!args->is_null() && !args->is_object()) invalid(where + ": arguments must be objects");
  }
  return b;
}

const Json& function_body(const Json& tool) {
  if (tool.contains("function") && tool["function"].is_object()) return tool["function"];
  return tool;
}

std::string tool_name(const Json& tool) { return function_body(tool).value("name", std::string()); }

Json tool_call_response(const std::string& call_id, const std::string& name, const Json& args) {
  Json call = {{"id", call_id},
               {"type", "function"},
               {"function", {{"name", name}, {"arguments", args.dump()}}}};
  Json message = {{"role", "assistant"}, {"content", nullptr}, {"tool_calls", Json::array({call})}};
  return Json{{"id", "scripted-" + call_id},
              {"object", "chat.completion"},
              {"model", "scripted"},
              {"choices", Json::array({{{"index", 0}, {"message", message}, {"finish_reason", "tool_calls"}}})}};
}

Json text_response(const std::string& text) {
  Json message = {{"role", "assistant"}, {"content", text}};
  return Json{{"id", "scripted-text"},
              {"object", "chat.completion"},
              {"model", "scripted"},
              {"choices", Json::array({{{"index", 0}, {"message", message}, {"finish_reason", "stop"}}})}};
}

}  // namespace

std::string_view to_string(EvalMode mode) { return mode == EvalMode::Standard ? "standard" : "tafc"; }

EvalMode eval_mode_from_string(std::string_view text) {
  if (text == "standard") return EvalMode::Standard;
  if (text == "tafc") return EvalMode::Tafc;
  throw Error(ErrorCode::InvalidArgument, "mode must be 'standard' or 'tafc'");
}

EvalScenario EvalScenario::from_json(const Json& j) {
  if (!j.is_object()) invalid("scenario must be a JSON object");
  EvalScenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    s.runs = j.value("runs", 3);
    if (s.runs < 1) invalid("runs must be >= 1");
    if (!j.contains("tools") || !j["tools"].is_array() || j["tools"].empty()) invalid("scenario needs tools");
    s.raw_tools = j["tools"];
    try {
      s.tools = parse_tools(s.raw_tools);
    } catch (const Error& e) {
      invalid(std::string("tools: ") + e.what());
    }
    if (!j.contains("tasks") || !j["tasks"].is_array() || j["tasks"].empty()) invalid("scenario needs tasks");

    const Json behaviors = j.contains("script") ? j["script"].value("tasks", Json::object()) : Json::object();
    std::set<std::string> ids;
    std::set<std::string> inputs;
    for (const auto& t : j["tasks"]) {
      EvalTask task;
      task.id = t.at("id").get<std::string>();
      const std::string where = "task '" + task.id + "'";
      if (!ids.insert(task.id).second) invalid(where + ": duplicate id");
      task.x = t.at("x").get<std::string>();
      if (!inputs.insert(task.x).second) invalid(where + ": duplicate input text");
      task.expected_tool = t.at("expected_tool").get<std::string>();
      task.expected_theta = t.value("expected_theta", Json::object());
      task.family = t.value("family", std::string());
      const ToolSchema* tool = s.find_tool(task.expected_tool);
      if (tool == nullptr) invalid(where + ": expected tool '" + task.expected_tool + "' is not in the suite");
      const ValidationVerdict verdict = validate_arguments(*tool, task.expected_theta);
      if (!verdict.ok()) invalid(where + ": expected_theta does not validate: " + verdict.summary());
      task.behavior = parse_behavior(behaviors.contains(task.id) ? behaviors[task.id] : Json(nullptr), where);
      if (task.behavior.correct_args.is_null()) task.behavior.correct_args = task.expected_theta;
      if (!task.behavior.wrong_tool.empty() && s.find_tool(task.behavior.wrong_tool) == nullptr) {
        invalid(where + ": wrong_tool '" + task.behavior.wrong_tool + "' is not in the suite");
      }
      if (task.behavior.wrong_args.is_null()) {
        task.behavior.wrong_args =
            task.behavior.wrong_tool.empty() ? perturbed(task.behavior.correct_args) : Json::object();
      }
      s.tasks.push_back(std::move(task));
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed scenario: ") + e.what());
  }
  return s;
}

EvalScenario EvalScenario::load(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IOFailure) throw;
    invalid(e.what());
  }
  return from_json(j);
}

const ToolSchema* EvalScenario::find_tool(std::string_view name) const {
  for (const auto& t : tools) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

ScriptedModel::ScriptedModel(const EvalScenario& scenario, std::uint64_t seed, std::shared_ptr<ManualClock> clock)
    : scenario_(scenario), seed_(seed), clock_(std::move(clock)) {
  for (const auto& t : scenario_.tasks) by_input_.emplace(t.x, &t);
}

bool ScriptedModel::has_think_field(const Json& received, const ToolSchema& origin) {
  const Json& fn = function_body(received);
  if (!fn.contains("parameters") || !fn["parameters"].is_object()) return false;
  const Json& params = fn["parameters"];
  if (!params.contains("properties") || !params["properties"].is_object()) return false;
  for (const auto& [key, node] : params["properties"].items()) {
    if (origin.find(key) != nullptr) continue;
    const bool reasoning_name = key == kDefaultThinkField || key.rfind(kFallbackThinkField, 0) == 0;
    if (reasoning_name && node.is_object() && node.value("type", Json()) == "string") return true;
  }
  return false;
}

double ScriptedModel::draw(std::uint64_t seed, int run, std::string_view task_id, int step) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), fnv1a32(task_id), static_cast<std::uint32_t>(step)};
  std::mt19937_64 gen(seq);
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

UpstreamReply ScriptedModel::respond(const std::string& body) {
  const Json request = Json::parse(body);
  auto it = by_input_.find(last_user_text(request));
  if (it == by_input_.end()) return UpstreamReply{200, text_response("I cannot help with that.").dump()};
  const EvalTask& task = *it->second;
  const TaskBehavior& b = task.behavior;

  if (b.stall_seconds > 0.0 && clock_) clock_->advance(std::chrono::duration<double>(b.stall_seconds));

  int step = 0;
  for (const auto& m : request.value("messages", Json::array())) {
    if (m.is_object() && m.value("role", "") == "tool") ++step;
  }
  if (step >= b.max_attempts) return UpstreamReply{200, text_response("I could not complete the task.").dump()};

  std::map<std::string, const Json*> received;
  if (request.contains("tools") && request["tools"].is_array()) {
    for (const auto& t : request["tools"]) received[tool_name(t)] = &t;
  }

  const ToolSchema& expected = *scenario_.find_tool(task.expected_tool);
  const bool think = received.count(expected.name) != 0 && has_think_field(*received[expected.name], expected);
  const double p = think ? b.p_correct_with_think : b.p_correct_without_think;
  const bool correct = draw(seed_, run_, task.id, step) < p;

  const std::string name = correct || b.wrong_tool.empty() ? task.expected_tool : b.wrong_tool;
  Json args = correct ? b.correct_args : b.wrong_args;

  if (auto r = received.find(name); r != received.end()) {
    const ToolSchema sent = parse_tool_schema(*r->second);
    const ToolSchema& origin = *scenario_.find_tool(name);
    if (auto manifest = read_marker(sent)) {
      AugmentedTool tool;
      tool.schema = sent;
      tool.origin = origin;
      tool.manifest = *manifest;
      ReasoningTrace trace;
      trace.function_level = b.reasoning;
      for (const auto& path : manifest->parameter_paths) trace.per_parameter[path] = b.reasoning;
      try {
        args = encode_arguments(tool, args, trace);
      } catch (const Error&) {
        // Wrong arguments may not fit the wrap plan; send them bare.
      }
    } else if (has_think_field(*r->second, origin)) {
      Json out = Json::object();
      for (const auto& prop : sent.properties()) {
        if (origin.find(prop.name) == nullptr && prop.node.kind == Kind::String) {
          out[prop.name] = b.reasoning;
          break;
        }
      }
      for (auto& [k, v] : args.items()) out[k] = v;
      args = std::move(out);
    }
  }
  const std::string call_id = "call_" + task.id + "_" + std::to_string(step);
  return UpstreamReply{200, tool_call_response(call_id, name, args).dump()};
}

std::vector<double> EvalReport::pass_rates() const {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.pass_rate);
  return out;
}

Json EvalReport::to_json() const {
  Json j = Json::object();
  j["scenario"] = scenario;
  j["mode"] = to_string(mode);
  j["seed"] = seed;
  j["runs"] = runs.size();
  j["pass_rates"] = pass_rates();
  j["pass_rate_mean"] = pass_rate_mean;
  j["pass_rate_stdev"] = pass_rate_stdev;
  j["reasoning_coverage"] = reasoning_coverage;
  Json per_run = Json::array();
  for (const auto& r : runs) {
    Json tasks = Json::array();
    for (const auto& t : r.tasks) {
      tasks.push_back({{"id", t.id},
                       {"family", t.family},
                       {"passed", t.passed},
                       {"status", t.status},
                       {"tool_calls", t.tool_calls}});
    }
    Json counts = Json::object();
    for (const auto& [k, v] : r.outcome_counts) counts[k] = v;
    per_run.push_back({{"run", r.run},
                       {"pass_rate", r.pass_rate},
                       {"tool_calls", r.tool_calls},
                       {"calls_with_reasoning", r.calls_with_reasoning},
                       {"outcomes", counts},
                       {"tasks", tasks}});
  }
  j["per_run"] = std::move(per_run);
  return j;
}

namespace {

TaskOutcome run_task(Gateway& gateway, const EvalScenario& scenario, const EvalTask& task,
                     const std::string& session) {
  TaskOutcome out;
  out.id = task.id;
  out.family = task.family;
  out.status = "no_call";
  const ToolSchema& origin = *scenario.find_tool(task.expected_tool);

  Json messages = Json::array({{{"role", "user"}, {"content", task.x}}});
  // Bounded by max_attempts and the session budget; the cap is a backstop.
  for (int round = 0; round < 64; ++round) {
    const Json request = {{"model", "scripted"}, {"messages", messages}, {"tools", scenario.raw_tools}};
    const ProxyResponse resp = gateway.handle_chat_request(request.dump(), session);
    if (resp.status == 429) {
      out.status = "budget_exhausted";
      break;
    }
    if (resp.status == 504) {
      out.status = "timeout";
      break;
    }
    if (resp.status != 200) {
      out.status = "upstream_error";
      break;
    }
    const Json body = Json::parse(resp.body);
    const Json& message = body["choices"][0]["message"];
    if (!message.contains("tool_calls") || message["tool_calls"].empty()) break;

    messages.push_back(message);
    for (const auto& call : message["tool_calls"]) {
      ++out.tool_calls;
      const std::string name = call["function"].value("name", "");
      Json args;
      try {
        args = Json::parse(call["function"].value("arguments", "{}"));
      } catch (const nlohmann::json::parse_error&) {
        args = nullptr;
      }
      const bool ok = name == task.expected_tool && args.is_object() && validate_arguments(origin, args).ok() &&
                      canonically_equal(args, task.expected_theta);
      if (ok) out.passed = true;
      messages.push_back({{"role", "tool"},
                          {"tool_call_id", call.value("id", "")},
                          {"content", ok ? R"({"status":"ok"})" : R"({"status":"error"})"}});
    }
    if (out.passed) {
      out.status = "passed";
      break;
    }
    out.status = "wrong_call";
  }
  return out;
}

}  // namespace

EvalReport run_eval(const EvalScenario& scenario, EvalMode mode, std::uint64_t seed, std::optional<int> runs) {
  const int n_runs = runs.value_or(scenario.runs);
  if (n_runs < 1) throw Error(ErrorCode::ScenarioInvalid, "runs must be >= 1");
  if (scenario.tasks.empty()) throw Error(ErrorCode::ScenarioInvalid, "scenario has no tasks");

  EvalReport report;
  report.scenario = scenario.name;
  report.mode = mode;
  report.seed = seed;

  std::vector<const EvalTask*> ordered;
  for (const auto& t : scenario.tasks) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(), [](const EvalTask* a, const EvalTask* b) { return a->id < b->id; });

  std::size_t all_calls = 0;
  std::size_t all_with_reasoning = 0;
  for (int run = 0; run < n_runs; ++run) {
    auto clock = std::make_shared<ManualClock>();
    auto model = std::make_shared<ScriptedModel>(scenario, seed, clock);
    model->set_run(run);
    ProxyConfig config;
    config.augment = mode == EvalMode::Tafc;
    config.strip_marker_fields = false;
    config.expose_reasoning = true;
    auto upstream = std::make_shared<FunctionUpstream>(
        [model](const std::string& body, double) { return model->respond(body); });
    Gateway gateway(config, upstream, std::make_shared<TraceStore>(), clock);

    RunResult result;
    result.run = run;
    std::size_t passed = 0;
    for (const EvalTask* task : ordered) {
      TaskOutcome o = run_task(gateway, scenario, *task, "run" + std::to_string(run) + "/" + task->id);
      if (o.passed) ++passed;
      result.tasks.push_back(std::move(o));
    }
    result.pass_rate = static_cast<double>(passed) / static_cast<double>(ordered.size());
    for (const auto& rec : gateway.traces().records()) {
      ++result.outcome_counts[std::string(to_string(rec.outcome))];
      if (rec.function_name.empty() || rec.outcome == Outcome::BudgetExhausted) continue;
      ++result.tool_calls;
      if (!rec.trace.empty()) ++result.calls_with_reasoning;
    }
    all_calls += result.tool_calls;
    all_with_reasoning += result.calls_with_reasoning;
    report.runs.push_back(std::move(result));
  }

  const auto rates = report.pass_rates();
  double sum = 0.0;
  for (double r : rates) sum += r;
  report.pass_rate_mean = sum / static_cast<double>(rates.size());
  if (rates.size() > 1) {
    double ss = 0.0;
    for (double r : rates) ss += (r - report.pass_rate_mean) * (r - report.pass_rate_mean);
    report.pass_rate_stdev = std::sqrt(ss / static_cast<double>(rates.size() - 1));
  }
  report.reasoning_coverage =
      all_calls == 0 ? 0.0 : static_cast<double>(all_with_reasoning) / static_cast<double>(all_calls);
  return report;
}

}  // namespace tafc
