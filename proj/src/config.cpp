#include <cmath>
#include <cstdlib>

#include "tafc/error.hpp"
#include "tafc/gateway.hpp"

namespace tafc {
namespace {

template <typename T>
void read_into(const Json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

void ProxyConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must lie in [0, 2]");
  }
  budget.validate();
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
  if (augment_options.max_depth < 0) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 0");
}

Json ProxyConfig::to_json() const {
  const ComplexityWeights& w = augment_options.weights;
  Json j = Json::object();
  j["upstream_url"] = upstream_url;
  j["api_key_env"] = api_key_env;
  j["temperature"] = temperature;
  j["budget"] = {{"max_tool_calls", budget.max_tool_calls}, {"timeout_seconds", budget.timeout_seconds}};
  j["strip_marker_fields"] = strip_marker_fields;
  j["mode"] = to_string(mode);
  j["expose_reasoning"] = expose_reasoning;
  j["augment"] = augment;
  j["function_level"] = augment_options.function_level;
  j["complexity"] = {{"alpha", {w.alpha1(), w.alpha2(), w.alpha3()}},
                     {"tau", w.tau()},
                     {"max_depth", augment_options.max_depth}};
  j["think"] = {{"field_name", augment_options.think.field_name},
                {"description", augment_options.think.description_text}};
  j["trace_path"] = trace_path;
  j["trace_fsync"] = trace_fsync;
  j["host"] = host;
  j["port"] = port;
  return j;
}

ProxyConfig ProxyConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  ProxyConfig c;
  read_into(j, "upstream_url", c.upstream_url);
  read_into(j, "api_key", c.api_key);
  read_into(j, "api_key_env", c.api_key_env);
  read_into(j, "temperature", c.temperature);
  if (j.contains("budget")) {
    read_into(j["budget"], "max_tool_calls", c.budget.max_tool_calls);
    read_into(j["budget"], "timeout_seconds", c.budget.timeout_seconds);
  }
  read_into(j, "strip_marker_fields", c.strip_marker_fields);
  if (j.contains("mode")) {
    std::string mode;
    read_into(j, "mode", mode);
    try {
      c.mode = filter_mode_from_string(mode);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
  }
  read_into(j, "expose_reasoning", c.expose_reasoning);
  read_into(j, "augment", c.augment);
  read_into(j, "function_level", c.augment_options.function_level);
  if (j.contains("complexity")) {
    const Json& cx = j["complexity"];
    std::vector<double> alpha = {1.0, 1.0, 1.0};
    double tau = ComplexityWeights::kDefaultTau;
    read_into(cx, "alpha", alpha);
    read_into(cx, "tau", tau);
    read_into(cx, "max_depth", c.augment_options.max_depth);
    if (alpha.size() != 3) throw Error(ErrorCode::ConfigError, "complexity.alpha needs three weights");
    try {
      c.augment_options.weights = ComplexityWeights(alpha[0], alpha[1], alpha[2], tau);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
  }
  if (j.contains("think")) {
    read_into(j["think"], "field_name", c.augment_options.think.field_name);
    read_into(j["think"], "description", c.augment_options.think.description_text);
  }
  read_into(j, "trace_path", c.trace_path);
  read_into(j, "trace_fsync", c.trace_fsync);
  read_into(j, "host", c.host);
  read_into(j, "port", c.port);
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return c;
}

ProxyConfig load_proxy_config(const std::string& path) {
  ProxyConfig c = path.empty() ? ProxyConfig{} : ProxyConfig::from_json(read_json_file(path));
  if (const char* url = std::getenv("TAFC_UPSTREAM_URL"); url != nullptr && *url != '\0') {
    c.upstream_url = url;
  }
  const std::string key_env = c.api_key_env.empty() ? std::string("TAFC_API_KEY") : c.api_key_env;
  if (const char* key = std::getenv(key_env.c_str()); key != nullptr && *key != '\0') {
    c.api_key = key;
  }
  return c;
}

}  // namespace tafc
