// All cpp-httplib usage lives in this translation unit.
#include <httplib.h>

#include <chrono>
#include <mutex>
#include <unordered_map>

#include "tafc/error.hpp"
#include "tafc/gateway.hpp"
#include "tafc/providers.hpp"

namespace tafc {
namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path below the origin, without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_start);
  Endpoint e;
  e.origin = slash == std::string::npos ? url : url.substr(0, slash);
  e.prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

/// "/v1/<route>" under the base URL, tolerating a base that already ends in /v1.
std::string route_path(const Endpoint& e, const std::string& route) {
  const bool has_v1 = e.prefix.size() >= 3 && e.prefix.compare(e.prefix.size() - 3, 3, "/v1") == 0;
  return e.prefix + (has_v1 ? "" : "/v1") + "/" + route;
}

void set_timeouts(httplib::Client& client, double seconds) {
  const auto total = std::chrono::duration<double>(seconds);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(total);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(total - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
}

struct PostResult {
  int status;
  std::string body;
};

PostResult post_json(const std::string& base_url, const std::string& route, const std::string& body,
                     double timeout_seconds, const std::string& authorization, ErrorCode unreachable,
                     ErrorCode timed_out) {
  const Endpoint e = split_url(base_url);
  httplib::Client client(e.origin);
  set_timeouts(client, timeout_seconds);
  httplib::Headers headers;
  if (!authorization.empty()) headers.emplace("Authorization", authorization);

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(route_path(e, route), headers, body, "application/json");
  if (!res) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    const auto err = res.error();
    const bool slow = err == httplib::Error::ConnectionTimeout ||
                      ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                       elapsed.count() >= 0.9 * timeout_seconds);
    throw Error(slow ? timed_out : unreachable,
                e.origin + ": " + httplib::to_string(err) + " after " + std::to_string(elapsed.count()) + " s");
  }
  return PostResult{res->status, res->body};
}

std::string bearer(const std::string& key) { return key.empty() ? std::string() : "Bearer " + key; }

}  // namespace

HttpUpstream::HttpUpstream(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

UpstreamReply HttpUpstream::send(const std::string& body, double timeout_seconds,
                                 const std::string& authorization) {
  const std::string auth = api_key_.empty() ? authorization : bearer(api_key_);
  PostResult r = post_json(base_url_, "chat/completions", body, timeout_seconds, auth,
                           ErrorCode::UpstreamUnreachable, ErrorCode::UpstreamTimeout);
  return UpstreamReply{r.status, std::move(r.body)};
}

std::string HttpChatProvider::complete(const std::string& system, const std::string& user) {
  Json request = {{"model", model_},
                  {"temperature", temperature_},
                  {"messages", Json::array({{{"role", "system"}, {"content", system}},
                                            {{"role", "user"}, {"content", user}}})}};
  PostResult r;
  try {
    r = post_json(base_url_, "chat/completions", request.dump(), timeout_seconds_, bearer(api_key_),
                  ErrorCode::ProviderFailure, ErrorCode::ProviderFailure);
  } catch (const Error& e) {
    throw Error(ErrorCode::ProviderFailure, e.what());
  }
  if (r.status != 200) throw Error(ErrorCode::ProviderFailure, "chat provider returned HTTP " + std::to_string(r.status));
  try {
    const Json j = Json::parse(r.body);
    const Json& content = j.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderFailure, std::string("unexpected chat response: ") + e.what());
  }
}

std::vector<double> HttpEmbeddingProvider::embed(std::string_view text) {
  Json request = {{"model", model_}, {"input", std::string(text)}};
  PostResult r;
  try {
    r = post_json(base_url_, "embeddings", request.dump(), timeout_seconds_, bearer(api_key_),
                  ErrorCode::ProviderFailure, ErrorCode::ProviderFailure);
  } catch (const Error& e) {
    throw Error(ErrorCode::ProviderFailure, e.what());
  }
  if (r.status != 200) throw Error(ErrorCode::ProviderFailure, "embedding provider returned HTTP " + std::to_string(r.status));
  try {
    return Json::parse(r.body).at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderFailure, std::string("unexpected embedding response: ") + e.what());
  }
}

struct GatewayServer::Impl {
  explicit Impl(Gateway& g) : gateway(g) {}

  std::string session_for(const httplib::Request& req) {
    if (req.has_header(kSessionHeader)) {
      std::string s = req.get_header_value(kSessionHeader);
      if (!s.empty()) return s;
    }
    const std::string key = req.remote_addr + ":" + std::to_string(req.remote_port);
    std::lock_guard lock(mutex);
    if (connections.size() > 65536) connections.clear();
    auto [it, inserted] = connections.try_emplace(key);
    if (inserted) it->second = "conn-" + make_uuid();
    return it->second;
  }

  Gateway& gateway;
  httplib::Server server;
  std::mutex mutex;
  std::unordered_map<std::string, std::string> connections;
};

GatewayServer::GatewayServer(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway)) {
  Impl* impl = impl_.get();
  impl->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  impl->server.Post("/v1/chat/completions", [impl](const httplib::Request& req, httplib::Response& res) {
    const std::string session = impl->session_for(req);
    ProxyResponse out = impl->gateway.handle_chat_request(req.body, session, req.get_header_value("Authorization"));
    res.status = out.status;
    res.set_header(kSessionHeader, session);
    res.set_content(out.body, "application/json");
  });
}

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool GatewayServer::listen() { return impl_->server.listen_after_bind(); }

void GatewayServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void GatewayServer::wait_until_ready() { impl_->server.wait_until_ready(); }

}  // namespace tafc
