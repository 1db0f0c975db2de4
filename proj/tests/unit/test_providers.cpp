#include <doctest.h>

#include <cmath>

#include "tafc/error.hpp"
#include "tafc/providers.hpp"

using namespace tafc;

TEST_SUITE("providers") {

TEST_CASE("word tokens") {
  CHECK(word_tokens("Hello, World-42!") == std::vector<std::string>{"hello", "world", "42"});
  CHECK(word_tokens("").empty());
}

TEST_CASE("hashed embedder") {
  HashedBagOfWordsEmbedder e(16);
  const auto v = e.embed("a b a");
  double sum = 0;
  for (double x : v) sum += x;
  CHECK(v.size() == 16);
  CHECK(sum == 3.0);
  CHECK(v[HashedBagOfWordsEmbedder::bucket("a", 16)] >= 2.0);
  CHECK(e.embed("A B a") == v);
  CHECK_THROWS_AS(HashedBagOfWordsEmbedder(0), Error);
}

TEST_CASE("token overlap logprob") {
  TokenOverlapLogProb lp;
  // context "a a b": 3 tokens, vocabulary {a, b, c} once c is seen in the text.
  CHECK(*lp.logprob("a c", "a a b") == doctest::Approx(std::log(3.0 / 6.0) + std::log(1.0 / 6.0)));
  CHECK(*lp.logprob("a", "a a b") > *lp.logprob("c", "a a b"));
  CHECK(*lp.logprob("", "a") == 0.0);
}

TEST_CASE("scripted chat") {
  ScriptedChatProvider chat({{{"weather"}, {"tomorrow"}, {"one", "two"}}}, "fallback");
  CHECK(chat.complete("sys", "weather now") == "one");
  CHECK(chat.complete("sys", "weather now") == "two");
  CHECK(chat.complete("sys", "weather now") == "two");
  CHECK(chat.complete("sys", "weather tomorrow") == "fallback");
  CHECK(chat.calls() == 4);

  auto j = ScriptedChatProvider::from_json(Json::parse(R"({"rules":[{"contains_all":["x"],"response":"y"}],"fallback":"z"})"));
  CHECK(j->complete("", "x") == "y");
  CHECK(j->complete("", "w") == "z");
}

TEST_CASE("provider bundle from config") {
  const ProviderBundle b = providers_from_json(Json::parse(
      R"({"chat":{"kind":"scripted","fallback":"ok"},"embed":{"kind":"hashed","dimension":8},"logprob":{"kind":"token_overlap"}})"));
  REQUIRE(b.chat);
  REQUIRE(b.embed);
  REQUIRE(b.logprob);
  CHECK(b.chat->complete("", "") == "ok");
  CHECK(b.embed->embed("x").size() == 8);
  const ProviderBundle n = providers_from_json(Json::parse(R"({"logprob":{"kind":"none"}})"));
  CHECK_FALSE(n.logprob);
  CHECK_THROWS_AS(providers_from_json(Json::parse(R"({"chat":{"kind":"magic"}})")), Error);
}

}
