#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tafc/augment.hpp"
#include "tafc/budget.hpp"
#include "tafc/filter.hpp"
#include "tafc/json.hpp"
#include "tafc/trace_store.hpp"

namespace tafc {

inline constexpr const char* kSessionHeader = "X-TAFC-Session";
/// Response member carrying reasoning traces back to clients that opt in.
inline constexpr const char* kExtensionField = "tafc";

struct ProxyConfig {
  std::string upstream_url = "http://127.0.0.1:11434";
  /// Credential sent upstream; when empty the client's Authorization header is
  /// passed through.
  std::string api_key;
  /// Environment variable the credential is read from.
  std::string api_key_env = "TAFC_API_KEY";
  double temperature = 0.1;
  Budget budget;
  bool strip_marker_fields = true;
  FilterMode mode = FilterMode::Lenient;
  bool expose_reasoning = true;
  /// false forwards tools unchanged (plain function calling).
  bool augment = true;
  AugmentOptions augment_options;
  /// Empty keeps traces in memory.
  std::string trace_path;
  bool trace_fsync = true;
  std::string host = "127.0.0.1";
  int port = 8080;

  /// Throws Error(InvalidArgument) on out-of-range values.
  void validate() const;
  Json to_json() const;
  /// Missing members keep their defaults. Throws Error(ConfigError).
  static ProxyConfig from_json(const Json& j);
};

/// Reads the config file (when `path` is non-empty) and applies the
/// TAFC_UPSTREAM_URL / TAFC_API_KEY environment overrides.
ProxyConfig load_proxy_config(const std::string& path);

struct UpstreamReply {
  int status = 200;
  std::string body;
};

/// The model endpoint behind the gateway. Implementations throw
/// Error(UpstreamUnreachable) or Error(UpstreamTimeout).
class Upstream {
 public:
  virtual ~Upstream() = default;
  virtual UpstreamReply send(const std::string& body, double timeout_seconds,
                             const std::string& authorization) = 0;
};

/// Adapts a callable, for in-process upstreams.
class FunctionUpstream final : public Upstream {
 public:
  using Handler = std::function<UpstreamReply(const std::string& body, double timeout_seconds)>;
  explicit FunctionUpstream(Handler handler) : handler_(std::move(handler)) {}
  UpstreamReply send(const std::string& body, double timeout_seconds, const std::string&) override {
    return handler_(body, timeout_seconds);
  }

 private:
  Handler handler_;
};

/// POSTs to <base>/v1/chat/completions.
class HttpUpstream final : public Upstream {
 public:
  HttpUpstream(std::string base_url, std::string api_key);
  UpstreamReply send(const std::string& body, double timeout_seconds,
                     const std::string& authorization) override;

 private:
  std::string base_url_;
  std::string api_key_;
};

struct ProxyResponse {
  int status = 200;
  std::string body;
};

/// Tool-call-level outcome of one gateway request, as recorded.
struct ToolCallReport {
  std::string id;
  std::string function_name;
  std::uint64_t record_id = 0;
  Outcome outcome = Outcome::Success;
  Json clean_args = Json::object();
  ReasoningTrace trace;
  std::vector<std::string> warnings;
};

/// Chat-completions proxy: augments outbound tools, filters inbound tool
/// calls, enforces the session budget and records a trace per tool call.
class Gateway {
 public:
  Gateway(ProxyConfig config, std::shared_ptr<Upstream> upstream, std::shared_ptr<TraceStore> traces,
          std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

  ProxyResponse handle_chat_request(const std::string& request_body, const std::string& session,
                                    const std::string& authorization = "");

  BudgetDecision enforce_budget(const std::string& session) { return budget_.enforce(session); }

  const ProxyConfig& config() const { return config_; }
  BudgetLedger& budget() { return budget_; }
  TraceStore& traces() { return *traces_; }

  /// The tools array exactly as sent upstream, for a given client tools array.
  Json outbound_tools(const Json& tools, ToolRegistry& registry) const;

 private:
  std::uint64_t record(const std::string& x, const std::string& function_name,
                       const ReasoningTrace& trace, const Json& params, Outcome outcome);

  ProxyConfig config_;
  std::shared_ptr<Upstream> upstream_;
  std::shared_ptr<TraceStore> traces_;
  std::shared_ptr<Clock> clock_;
  BudgetLedger budget_;
};

/// Text of the last user message, joining text parts of multi-part content.
std::string last_user_text(const Json& request);

std::string make_uuid();

/// HTTP front end: POST /v1/chat/completions and GET /healthz.
class GatewayServer {
 public:
  explicit GatewayServer(Gateway& gateway);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tafc
