// tafc: reasoning-augmented function calling from the command line.
#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "tafc/augment.hpp"
#include "tafc/complexity.hpp"
#include "tafc/error.hpp"
#include "tafc/eval.hpp"
#include "tafc/filter.hpp"
#include "tafc/gateway.hpp"
#include "tafc/tuning.hpp"

namespace {

using namespace tafc;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitProvider = 3;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ProviderFailure:
    case ErrorCode::UpstreamUnreachable:
    case ErrorCode::UpstreamTimeout:
      return kExitProvider;
    case ErrorCode::IOFailure:
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    default:
      return kExitValidation;
  }
}

void emit(const Json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
  }
}

ComplexityWeights weights_from(const std::vector<double>& alpha, double tau) {
  if (alpha.empty()) return ComplexityWeights(1.0, 1.0, 1.0, tau);
  if (alpha.size() != 3) throw Error(ErrorCode::InvalidArgument, "--alpha takes three comma-separated weights");
  return ComplexityWeights(alpha[0], alpha[1], alpha[2], tau);
}

int cmd_augment(const std::string& tools_path, double tau, const std::vector<double>& alpha,
                const std::string& out_path) {
  AugmentOptions options;
  options.weights = weights_from(alpha, tau);
  Json out = Json::array();
  for (const auto& schema : parse_tools(read_json_file(tools_path))) {
    const AugmentedTool tool = augment_tool(schema, options);
    for (const auto& w : tool.warnings) std::cerr << "warning: " << tool.name() << ": " << w << "\n";
    out.push_back(serialize_tool_schema(tool.schema));
  }
  emit(out, out_path);
  return kExitOk;
}

int cmd_score(const std::string& tools_path, double tau) {
  const ComplexityWeights weights(1.0, 1.0, 1.0, tau);
  Json out = Json::array();
  for (const auto& schema : parse_tools(read_json_file(tools_path))) {
    Json entries = Json::array();
    for (const auto& e : score_tool(schema, weights)) {
      entries.push_back({{"path", e.path},
                         {"dep", e.dep},
                         {"type", e.type_score},
                         {"constraint", e.constraint_score},
                         {"psi", e.psi},
                         {"selected", e.psi > weights.tau()}});
    }
    out.push_back({{"function", schema.name}, {"tau", weights.tau()}, {"parameters", entries}});
  }
  emit(out, "");
  return kExitOk;
}

/// Manifests keyed by function name. Accepts a {name: manifest} map, a single
/// manifest carrying "function", or augmented tools whose markers hold them.
std::map<std::string, AugmentationManifest> load_manifests(const Json& j, const std::vector<ToolSchema>& tools) {
  std::map<std::string, AugmentationManifest> out;
  const bool looks_like_tools =
      j.is_array() || (j.is_object() && (j.contains("function") && j["function"].is_object())) ||
      (j.is_object() && j.contains("tools"));
  if (looks_like_tools) {
    for (const auto& t : parse_tools(j)) {
      if (auto m = read_marker(t)) out[t.name] = *m;
    }
    return out;
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "manifest file must hold a JSON object");
  if (j.contains("parameter_paths") || j.contains("function_level")) {
    std::string name = j.value("function", std::string());
    if (name.empty()) {
      if (tools.size() != 1) {
        throw Error(ErrorCode::InvalidArgument, "manifest names no function and the tools file holds several");
      }
      name = tools.front().name;
    }
    out[name] = AugmentationManifest::from_json(j);
    return out;
  }
  for (const auto& [name, m] : j.items()) out[name] = AugmentationManifest::from_json(m);
  return out;
}

int cmd_filter(const std::string& tools_path, const std::string& manifest_path, const std::string& args_path,
               bool strict) {
  std::vector<ToolSchema> tools = parse_tools(read_json_file(tools_path));
  const auto manifests = load_manifests(read_json_file(manifest_path), tools);

  const Json call = read_json_file(args_path);
  std::string name;
  Json raw;
  if (call.is_object() && call.contains("function") && call["function"].is_object()) {
    name = call["function"].value("name", std::string());
    const Json& a = call["function"].value("arguments", Json::object());
    raw = a.is_string() ? Json::parse(a.get<std::string>()) : a;
  } else if (call.is_object() && call.contains("name") && call.contains("arguments")) {
    name = call["name"].get<std::string>();
    const Json& a = call["arguments"];
    raw = a.is_string() ? Json::parse(a.get<std::string>()) : a;
  } else {
    if (tools.size() != 1) {
      throw Error(ErrorCode::InvalidArgument, "bare arguments need a tools file with exactly one tool");
    }
    name = tools.front().name;
    raw = call;
  }

  ToolRegistry registry;
  for (auto& schema : tools) {
    AugmentedTool tool;
    auto marker = read_marker(schema);
    tool.origin = marker ? strip_augmentation(schema, *marker) : schema;
    tool.schema = schema;
    if (auto m = manifests.find(schema.name); m != manifests.end()) {
      tool.manifest = m->second;
    } else if (marker) {
      tool.manifest = *marker;
    }
    registry.add(std::move(tool));
  }

  const FilteredCall filtered =
      filter_call(registry, name, raw, strict ? FilterMode::Strict : FilterMode::Lenient);
  for (const auto& w : filtered.strictness_warnings) std::cerr << "warning: " << w << "\n";
  Json out = filtered.to_json();
  const ValidationVerdict verdict = validate_arguments(registry.at(name).origin, filtered.clean_args);
  out["valid"] = verdict.ok();
  if (!verdict.ok()) out["violations"] = verdict.summary();
  emit(out, "");
  return verdict.ok() ? kExitOk : kExitValidation;
}

int cmd_serve(std::string config_path) {
  if (config_path.empty()) {
    if (const char* env = std::getenv("TAFC_CONFIG"); env != nullptr) config_path = env;
  }
  const ProxyConfig config = load_proxy_config(config_path);

  // Handle SIGINT/SIGTERM on a dedicated thread so the server can stop cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  TraceStoreOptions store_options;
  store_options.fsync = config.trace_fsync;
  auto traces = config.trace_path.empty() ? std::make_shared<TraceStore>()
                                          : std::make_shared<TraceStore>(config.trace_path, store_options);
  auto upstream = std::make_shared<HttpUpstream>(config.upstream_url, config.api_key);
  Gateway gateway(config, upstream, traces);
  GatewayServer server(gateway);
  const int port = server.bind(config.host, config.port);
  if (port < 0) {
    std::cerr << "error: cannot bind " << config.host << ":" << config.port << "\n";
    return kExitUsage;
  }
  std::cerr << "tafc gateway on http://" << config.host << ":" << port << " -> " << config.upstream_url << "\n";

  std::thread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // listen() may also end without a signal; wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kExitOk;
}

struct TuneConfig {
  std::map<std::string, ToolSchema, std::less<>> tools;
  ProviderBundle providers;
  std::shared_ptr<TraceStore> traces;
  Json think = Json::object();
  Json tool = Json::object();
  AlignmentWeights alignment;
};

TuneConfig load_tune_config(const std::string& path) {
  const Json j = read_json_file(path);
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "tuning config must be a JSON object");
  TuneConfig c;
  Json tools = j.contains("tools") ? j["tools"] : Json();
  if (tools.is_null() && j.contains("tools_file")) {
    // Relative paths are taken from the config file's directory.
    std::filesystem::path file = j["tools_file"].get<std::string>();
    if (file.is_relative()) file = std::filesystem::path(path).parent_path() / file;
    tools = read_json_file(file.string());
  }
  if (tools.is_null()) throw Error(ErrorCode::ConfigError, "tuning config needs 'tools' or 'tools_file'");
  for (auto& t : parse_tools(tools)) c.tools.emplace(t.name, std::move(t));
  c.providers = providers_from_json(j.value("providers", Json::object()));
  if (j.contains("trace_path")) {
    TraceStoreOptions o;
    o.fsync = false;
    c.traces = std::make_shared<TraceStore>(j["trace_path"].get<std::string>(), o);
  }
  c.think = j.value("think", Json::object());
  c.tool = j.value("tool", Json::object());
  if (j.contains("alignment")) c.alignment = AlignmentWeights::from_json(j["alignment"]);
  return c;
}

int cmd_tune(const std::string& target, const std::string& dataset_path, const std::string& config_path,
             const std::string& report_path) {
  const TuneConfig c = load_tune_config(config_path);
  const auto dataset = load_dataset(dataset_path, c.traces.get());

  if (target == "think") {
    ThinkTuningOptions options;
    options.epochs = c.think.value("epochs", options.epochs);
    options.traces_per_epoch = c.think.value("traces_per_epoch", options.traces_per_epoch);
    const std::string initial = c.think.value("initial", std::string(
        "Before filling the arguments, explain step by step which values the request supplies, "
        "how they map onto the parameters, and why this function fits."));
    const ThinkTuningResult result = tune_think_description(initial, dataset, c.tools, c.providers, options);
    Json report = result.to_json();
    report["kind"] = "think";
    emit(report, report_path);
    return kExitOk;
  }

  std::string function = c.tool.value("function", std::string());
  if (function.empty()) {
    if (c.tools.size() != 1) throw Error(ErrorCode::ConfigError, "tool.function must name the tool to tune");
    function = c.tools.begin()->first;
  }
  auto it = c.tools.find(function);
  if (it == c.tools.end()) throw Error(ErrorCode::UnknownFunction, "no tool named '" + function + "'");
  std::optional<std::string> initial;
  if (c.tool.contains("initial")) initial = c.tool["initial"].get<std::string>();
  const ToolTuningResult result = tune_tool_description(it->second, dataset, c.alignment, c.providers, initial);
  Json report = result.to_json();
  report["kind"] = "tool";
  report["function"] = function;
  report["alignment"] = c.alignment.to_json();
  emit(report, report_path);
  return result.provider_failure ? kExitProvider : kExitOk;
}

int cmd_eval(const std::string& scenario_path, const std::string& mode, std::uint64_t seed, int runs) {
  const EvalScenario scenario = EvalScenario::load(scenario_path);
  const EvalReport report = run_eval(scenario, eval_mode_from_string(mode), seed,
                                     runs > 0 ? std::optional<int>(runs) : std::nullopt);
  emit(report.to_json(), "");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reasoning-augmented function calling: schema augmentation, filtering, gateway, tuning"};
  app.require_subcommand(1);

  std::string tools_path, out_path, manifest_path, args_path, config_path, dataset_path, report_path,
      scenario_path, mode = "tafc";
  double tau = ComplexityWeights::kDefaultTau;
  std::vector<double> alpha;
  bool strict = false;
  std::uint64_t seed = 0;
  int runs = 0;

  auto* augment = app.add_subcommand("augment", "Add reasoning fields to tool schemas");
  augment->add_option("--tools", tools_path, "Tool schemas (JSON)")->required();
  augment->add_option("--tau", tau, "Complexity threshold");
  augment->add_option("--alpha", alpha, "Sub-score weights A1,A2,A3")->delimiter(',')->expected(3);
  augment->add_option("--out", out_path, "Write augmented tools here instead of stdout");

  auto* score = app.add_subcommand("score", "Per-parameter complexity scores");
  score->add_option("--tools", tools_path, "Tool schemas (JSON)")->required();
  score->add_option("--tau", tau, "Complexity threshold");

  auto* filter = app.add_subcommand("filter", "Strip reasoning from a tool call");
  filter->add_option("--tools", tools_path, "Tool schemas (JSON)")->required();
  filter->add_option("--manifest", manifest_path, "Augmentation manifest(s) or augmented tools")->required();
  filter->add_option("--args", args_path, "Tool call or raw arguments (JSON)")->required();
  filter->add_flag("--strict", strict, "Reject malformed reasoning tuples");

  auto* serve = app.add_subcommand("serve", "Run the chat-completions gateway");
  serve->add_option("--config", config_path, "Gateway config (JSON); defaults to $TAFC_CONFIG");

  auto* tune = app.add_subcommand("tune", "Optimize the think or tool description");
  std::string tune_target;
  tune->add_option("target", tune_target, "think | tool")->required()->check(CLI::IsMember({"think", "tool"}));
  tune->add_option("--dataset", dataset_path, "Annotated examples (JSONL)")->required();
  tune->add_option("--config", config_path, "Tuning config (JSON)")->required();
  tune->add_option("--report", report_path, "Report output (JSON)")->required();

  auto* eval = app.add_subcommand("eval", "Pass-rate evaluation against a scripted model");
  eval->add_option("--scenario", scenario_path, "Scenario (JSON)")->required();
  eval->add_option("--mode", mode, "standard | tafc")->check(CLI::IsMember({"standard", "tafc"}));
  eval->add_option("--seed", seed, "RNG seed");
  eval->add_option("--runs", runs, "Number of runs (default: the scenario's)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*augment) return cmd_augment(tools_path, tau, alpha, out_path);
    if (*score) return cmd_score(tools_path, tau);
    if (*filter) return cmd_filter(tools_path, manifest_path, args_path, strict);
    if (*serve) return cmd_serve(config_path);
    if (*tune) return cmd_tune(tune_target, dataset_path, config_path, report_path);
    if (*eval) return cmd_eval(scenario_path, mode, seed, runs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
