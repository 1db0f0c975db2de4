#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <thread>

#include "tafc/error.hpp"
#include "tafc/gateway.hpp"

using namespace tafc;

namespace {

// Stub model endpoint on a free local port.
class StubUpstream {
 public:
  explicit StubUpstream(double delay_seconds = 0.0) {
    server_.Post("/v1/chat/completions", [this, delay_seconds](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (delay_seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay_seconds));
      const Json reply = Json::parse(R"({"id":"u","choices":[{"index":0,"message":{"role":"assistant","content":null,
        "tool_calls":[{"id":"c1","type":"function","function":{"name":"get_weather",
        "arguments":"{\"think\":\"Paris is named\",\"location\":\"Paris\"}"}}]},"finish_reason":"tool_calls"}]})");
      res.set_content(reply.dump(), "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubUpstream() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  int port = -1;
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  std::thread thread_;
};

struct RunningGateway {
  RunningGateway(ProxyConfig config, std::shared_ptr<Upstream> upstream)
      : gateway(std::move(config), std::move(upstream), traces), server(gateway) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.listen(); });
    server.wait_until_ready();
  }
  ~RunningGateway() {
    server.stop();
    thread.join();
  }

  std::shared_ptr<TraceStore> traces = std::make_shared<TraceStore>();
  Gateway gateway;
  GatewayServer server;
  int port = -1;
  std::thread thread;
};

const std::string kRequest = R"({"model":"m","messages":[{"role":"user","content":"Weather in Paris?"}],
  "tools":[{"type":"function","function":{"name":"get_weather","parameters":{"type":"object",
  "properties":{"location":{"type":"string"}},"required":["location"]}}}]})";

}  // namespace

TEST_SUITE("http") {

TEST_CASE("gateway over HTTP in front of a stub upstream") {
  StubUpstream upstream;
  REQUIRE(upstream.port > 0);
  ProxyConfig config;
  config.upstream_url = upstream.url();
  RunningGateway gw(config, std::make_shared<HttpUpstream>(upstream.url(), ""));
  REQUIRE(gw.port > 0);

  httplib::Client client("127.0.0.1", gw.port);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);

  httplib::Headers headers{{kSessionHeader, "abc"}, {"Authorization", "Bearer client"}};
  auto res = client.Post("/v1/chat/completions", headers, kRequest, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value(kSessionHeader) == "abc");
  const Json body = Json::parse(res->body);
  CHECK(body["choices"][0]["message"]["tool_calls"][0]["function"]["arguments"] == R"({"location":"Paris"})");
  CHECK(body["tafc"]["tool_calls"][0]["reasoning"]["function_level"] == "Paris is named");
  CHECK(upstream.last_auth == "Bearer client");
  CHECK(Json::parse(upstream.last_body)["tools"][0]["function"]["parameters"]["properties"].contains("think"));
  CHECK(gw.traces->size() == 1);
  CHECK(gw.gateway.budget().used("abc") == 1);

  auto anon = client.Post("/v1/chat/completions", kRequest, "application/json");
  REQUIRE(anon);
  CHECK(anon->get_header_value(kSessionHeader).rfind("conn-", 0) == 0);
}

TEST_CASE("slow upstream times out") {
  StubUpstream upstream(0.6);
  ProxyConfig config;
  config.budget.timeout_seconds = 0.3;
  RunningGateway gw(config, std::make_shared<HttpUpstream>(upstream.url(), "key"));
  httplib::Client client("127.0.0.1", gw.port);
  auto res = client.Post("/v1/chat/completions", kRequest, "application/json");
  REQUIRE(res);
  CHECK(res->status == 504);
  REQUIRE(gw.traces->size() == 1);
  CHECK(gw.traces->records()[0].outcome == Outcome::Timeout);
}

TEST_CASE("unreachable upstream") {
  HttpUpstream nowhere("http://127.0.0.1:1", "");
  CHECK_THROWS_WITH_AS(nowhere.send("{}", 1.0, ""), doctest::Contains("UpstreamUnreachable"), Error);
}

}
