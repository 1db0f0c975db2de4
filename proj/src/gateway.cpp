#include "tafc/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>

#include "tafc/error.hpp"

namespace tafc {
namespace {

ProxyResponse error_response(int status, std::string_view type, const std::string& message,
                             Json extension = nullptr) {
  Json body = {{"error", {{"type", type}, {"code", type}, {"message", message}}}};
  if (!extension.is_null()) body[kExtensionField] = std::move(extension);
  return ProxyResponse{status, body.dump()};
}

AugmentedTool plain_tool(const ToolSchema& origin) {
  AugmentedTool t;
  t.schema = origin;
  t.origin = origin;
  t.manifest.function_level = false;
  return t;
}

Json report_json(const ToolCallReport& r) {
  Json j = Json::object();
  j["id"] = r.id;
  j["function"] = r.function_name;
  j["record_id"] = r.record_id;
  j["outcome"] = to_string(r.outcome);
  j["reasoning"] = r.trace.to_json();
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

}  // namespace

std::string last_user_text(const Json& request) {
  if (!request.contains("messages") || !request["messages"].is_array()) return "";
  const Json& messages = request["messages"];
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (!it->is_object() || it->value("role", "") != "user" || !it->contains("content")) continue;
    const Json& content = (*it)["content"];
    if (content.is_string()) return content.get<std::string>();
    std::string text;
    if (content.is_array()) {
      for (const auto& part : content) {
        if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
            part["text"].is_string()) {
          if (!text.empty()) text += "\n";
          text += part["text"].get<std::string>();
        }
      }
    }
    return text;
  }
  return "";
}

std::string make_uuid() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_int_distribution<std::uint64_t> dist;
  std::uint64_t hi = dist(rng);
  std::uint64_t lo = dist(rng);
  hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
  lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
  char buf[37];
  std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                static_cast<unsigned>((hi >> 16) & 0xFFFF), static_cast<unsigned>(hi & 0xFFFF),
                static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
  return buf;
}

Gateway::Gateway(ProxyConfig config, std::shared_ptr<Upstream> upstream,
                 std::shared_ptr<TraceStore> traces, std::shared_ptr<Clock> clock)
    : config_(std::move(config)),
      upstream_(std::move(upstream)),
      traces_(std::move(traces)),
      clock_(std::move(clock)),
      budget_(config_.budget.max_tool_calls) {
  config_.validate();
  if (!upstream_) throw Error(ErrorCode::InvalidArgument, "gateway needs an upstream");
  if (!traces_) traces_ = std::make_shared<TraceStore>();
  if (!clock_) clock_ = std::make_shared<SteadyClock>();
}

std::uint64_t Gateway::record(const std::string& x, const std::string& function_name,
                              const ReasoningTrace& trace, const Json& params, Outcome outcome) {
  TraceRecord r;
  r.x = x;
  r.function_name = function_name;
  r.trace = trace;
  r.parameters = params;
  r.outcome = outcome;
  return traces_->append(std::move(r));
}

Json Gateway::outbound_tools(const Json& tools, ToolRegistry& registry) const {
  Json out = Json::array();
  for (const auto& raw : tools) {
    const ToolSchema origin = parse_tool_schema(raw);
    AugmentedTool tool = config_.augment ? augment_tool(origin, config_.augment_options) : plain_tool(origin);
    Json serialized = serialize_tool_schema(tool.schema);
    if (config_.strip_marker_fields) serialized = without_marker(serialized);
    out.push_back(std::move(serialized));
    registry.add(std::move(tool));
  }
  return out;
}

ProxyResponse Gateway::handle_chat_request(const std::string& request_body, const std::string& session,
                                           const std::string& authorization) {
  Json request;
  try {
    request = Json::parse(request_body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(400, "invalid_request_error", std::string("request is not JSON: ") + e.what());
  }
  if (!request.is_object()) return error_response(400, "invalid_request_error", "request must be an object");

  const double timeout = config_.budget.timeout_seconds;
  const bool has_tools = request.contains("tools") && request["tools"].is_array() && !request["tools"].empty();

  if (!has_tools) {
    try {
      UpstreamReply reply = upstream_->send(request_body, timeout, authorization);
      return ProxyResponse{reply.status, std::move(reply.body)};
    } catch (const Error& e) {
      const bool timed_out = e.code() == ErrorCode::UpstreamTimeout;
      return error_response(timed_out ? 504 : 502, timed_out ? "upstream_timeout" : "upstream_unreachable",
                            e.what());
    }
  }

  const std::string x = last_user_text(request);

  if (budget_.exhausted(session)) {
    const auto id = record(x, "", {}, Json::object(), Outcome::BudgetExhausted);
    return error_response(429, "budget_exhausted",
                          "session '" + session + "' used all " +
                              std::to_string(config_.budget.max_tool_calls) + " tool calls",
                          Json{{"session", session}, {"record_id", id}});
  }

  ToolRegistry registry;
  Json outbound = request;
  try {
    outbound["tools"] = outbound_tools(request["tools"], registry);
  } catch (const Error& e) {
    return error_response(400, "invalid_tool_schema", e.what());
  }
  if (!outbound.contains("temperature")) outbound["temperature"] = config_.temperature;

  UpstreamReply reply;
  const auto started = clock_->now();
  try {
    reply = upstream_->send(outbound.dump(), timeout, authorization);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UpstreamTimeout) {
      const auto id = record(x, "", {}, Json::object(), Outcome::Timeout);
      return error_response(504, "upstream_timeout", e.what(), Json{{"session", session}, {"record_id", id}});
    }
    return error_response(502, "upstream_unreachable", e.what());
  }
  const std::chrono::duration<double> elapsed = clock_->now() - started;
  if (elapsed.count() > timeout) {
    const auto id = record(x, "", {}, Json::object(), Outcome::Timeout);
    return error_response(504, "upstream_timeout",
                          "upstream answered after " + std::to_string(elapsed.count()) + " s",
                          Json{{"session", session}, {"record_id", id}});
  }
  if (reply.status < 200 || reply.status >= 300) return ProxyResponse{reply.status, std::move(reply.body)};

  Json response;
  try {
    response = Json::parse(reply.body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(502, "upstream_invalid_response", e.what());
  }
  if (!response.is_object() || !response.contains("choices") || !response["choices"].is_array()) {
    return ProxyResponse{reply.status, std::move(reply.body)};
  }

  std::vector<ToolCallReport> reports;
  Json refused = Json::array();
  std::size_t kept_calls = 0;

  for (auto& choice : response["choices"]) {
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) continue;
    Json& message = choice["message"];
    if (!message.contains("tool_calls") || !message["tool_calls"].is_array()) continue;

    Json kept = Json::array();
    for (auto& call : message["tool_calls"]) {
      ToolCallReport report;
      report.id = call.value("id", "");
      Json* fn = call.contains("function") && call["function"].is_object() ? &call["function"] : nullptr;
      report.function_name = fn != nullptr ? fn->value("name", "") : "";

      if (budget_.enforce(session) == BudgetDecision::Refusal) {
        report.outcome = Outcome::BudgetExhausted;
        report.record_id = record(x, report.function_name, {}, Json::object(), report.outcome);
        refused.push_back(report_json(report));
        continue;
      }

      const AugmentedTool* tool = registry.find(report.function_name);
      Json raw_args;
      bool parsed = false;
      if (fn != nullptr && fn->contains("arguments")) {
        const Json& a = (*fn)["arguments"];
        try {
          raw_args = a.is_string() ? Json::parse(a.get<std::string>()) : a;
          parsed = raw_args.is_object();
        } catch (const nlohmann::json::parse_error&) {
          parsed = false;
        }
      }

      if (tool == nullptr || !parsed) {
        report.outcome = Outcome::ValidationError;
        report.warnings.push_back(tool == nullptr ? "UnknownFunction: " + report.function_name
                                                  : "arguments are not a JSON object");
        report.record_id = record(x, report.function_name, {}, Json::object(), report.outcome);
        reports.push_back(report);
        kept.push_back(call);
        ++kept_calls;
        continue;
      }

      bool dropped = false;
      try {
        FilteredCall filtered = filter_arguments(*tool, raw_args, config_.mode);
        const ValidationVerdict verdict = validate_arguments(tool->origin, filtered.clean_args);
        report.outcome = verdict.ok() ? Outcome::Success : Outcome::ValidationError;
        report.clean_args = std::move(filtered.clean_args);
        report.trace = std::move(filtered.trace);
        report.warnings = std::move(filtered.strictness_warnings);
        if (!verdict.ok()) report.warnings.push_back(verdict.summary());
        (*fn)["arguments"] = report.clean_args.dump();
      } catch (const Error& e) {
        // Strict mode aborts the call instead of forwarding it.
        dropped = true;
        report.outcome = Outcome::ValidationError;
        report.warnings.push_back(e.what());
      }
      report.record_id = record(x, report.function_name, report.trace, report.clean_args, report.outcome);
      if (dropped) {
        refused.push_back(report_json(report));
      } else {
        kept.push_back(call);
        ++kept_calls;
        reports.push_back(std::move(report));
      }
    }
    if (kept.empty()) {
      message.erase("tool_calls");
    } else {
      message["tool_calls"] = std::move(kept);
    }
  }

  Json extension = Json::object();
  extension["session"] = session;
  extension["tool_calls"] = Json::array();
  for (const auto& r : reports) extension["tool_calls"].push_back(report_json(r));
  if (!refused.empty()) extension["refused"] = refused;

  if (kept_calls == 0 && !refused.empty() &&
      std::all_of(refused.begin(), refused.end(),
                  [](const Json& r) { return r["outcome"] == to_string(Outcome::BudgetExhausted); })) {
    return error_response(429, "budget_exhausted",
                          "session '" + session + "' used all " +
                              std::to_string(config_.budget.max_tool_calls) + " tool calls",
                          extension);
  }
  if (config_.expose_reasoning) {
    response[kExtensionField] = std::move(extension);
  } else if (!refused.empty()) {
    response[kExtensionField] = Json{{"session", session}, {"refused", refused}};
  }
  return ProxyResponse{reply.status, response.dump()};
}

}  // namespace tafc
