#include <doctest.h>

#include <cmath>

#include "tafc/complexity.hpp"
#include "tafc/error.hpp"

using namespace tafc;

namespace {

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

ToolSchema db_query() {
  return parse_tool_schema(Json::parse(R"({"name":"db_query","parameters":{"type":"object","properties":{
    "table": {"type":"string","description":"Table to read"},
    "query": {"type":"object","description":"Filter over table, paged by limit",
              "properties":{"filters":{"type":"array","items":{"type":"string"},"minItems":1}}},
    "limit": {"type":"integer","minimum":1,"maximum":100}
  },"required":["table","query"]}})"));
}

}  // namespace

TEST_SUITE("complexity") {

TEST_CASE("combine matches the logistic") {
  const ComplexityWeights w;
  CHECK(combine_subscores(0, 0, 0, w) == 0.5);
  CHECK(combine_subscores(0.5, 0.5, 0.5, w) == doctest::Approx(sigma(1.5)).epsilon(1e-15));
  CHECK(combine_subscores(0.5, 0.5, 0.5, w) == doctest::Approx(0.8176).epsilon(1e-4));
  CHECK(combine_subscores(1, 1, 1, w) == doctest::Approx(0.9526).epsilon(1e-4));
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(800.0) == 1.0);
  CHECK(combine_subscores(1, 1, 1, ComplexityWeights(0, 0, 0, 0.6)) == 0.5);
}

TEST_CASE("weights are validated") {
  CHECK_THROWS_AS(ComplexityWeights(-1, 1, 1, 0.6), Error);
  CHECK_THROWS_AS(ComplexityWeights(1, 1, 1, 1.5), Error);
  CHECK(ComplexityWeights().tau() == 0.6);
}

TEST_CASE("sub-score definitions") {
  const ToolSchema s = db_query();
  // "query" names table and limit: R = 2.
  CHECK(dependency_score(s.parameters, "query") == doctest::Approx(2.0 / 3.0));
  CHECK(dependency_score(s.parameters, "table") == 0.0);
  // Whole tokens only, case-sensitive.
  const ToolSchema t = parse_tool_schema(Json::parse(R"({"name":"f","parameters":{"properties":{
    "a": {"type":"string","description":"tables Limit limit_x a"},
    "table": {"type":"string"}, "limit": {"type":"string"}}}})"));
  CHECK(dependency_score(t.parameters, "a") == 0.0);

  // object > array > string: depth 3, 0.75 + 0.15 * 2 capped at 1.
  CHECK(type_complexity_score(*s.find("query")) == 1.0);
  CHECK(type_complexity_score(*s.find("table")) == 0.0);
  const ParameterNode e = parse_parameter_node(Json::parse(R"({"enum":[1,2]})"));
  CHECK(type_complexity_score(e) == 0.25);
  const ParameterNode a = parse_parameter_node(Json::parse(R"({"type":"array","items":{"type":"integer"}})"));
  CHECK(type_complexity_score(a) == doctest::Approx(0.65));
  const ParameterNode u = parse_parameter_node(Json::parse(R"({"oneOf":[{"type":"string"},{"type":"integer"}]})"));
  CHECK(type_complexity_score(u) == 1.0);

  CHECK(constraint_strictness_score(*s.find("limit"), false) == 0.5);
  CHECK(constraint_strictness_score(*s.find("limit"), true) == 0.75);
  const ParameterNode many = parse_parameter_node(
      Json::parse(R"({"type":"string","pattern":"x","minLength":1,"maxLength":4,"format":"date"})"));
  CHECK(constraint_strictness_score(many, true) == 1.0);
}

TEST_CASE("score_parameter and selection") {
  const ToolSchema s = db_query();
  const ComplexityWeights w;
  const ComplexityEntry q = score_parameter(s, "query", w);
  CHECK(q.psi == doctest::Approx(sigma(2.0 / 3.0 + 1.0 + 0.25)).epsilon(1e-15));
  const ComplexityEntry t = score_parameter(s, "table", w);
  CHECK(t.psi == doctest::Approx(sigma(0.25)).epsilon(1e-15));
  CHECK_THROWS_AS(score_parameter(s, "nope", w), Error);

  const auto selected = select_reasoning_parameters(s, w);
  CHECK(selected == std::set<std::string>{"query", "limit"});

  // Exactly at the threshold is not selected.
  const ComplexityWeights at(1, 1, 1, q.psi);
  CHECK(select_reasoning_parameters(s, at).count("query") == 0);
  CHECK(select_reasoning_parameters(s, ComplexityWeights(0, 0, 0, 0.6)).empty());
}

TEST_CASE("score_tool descends into objects") {
  const auto report = score_tool(db_query(), ComplexityWeights());
  std::vector<std::string> paths;
  for (const auto& e : report) paths.push_back(e.path);
  CHECK(paths == std::vector<std::string>{"table", "query", "query.filters", "limit"});
  for (const auto& e : report) {
    CHECK(e.psi > 0.0);
    CHECK(e.psi < 1.0);
  }
}

TEST_CASE("selection shrinks as tau grows") {
  const ToolSchema s = db_query();
  std::size_t last = 100;
  for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
    const auto n = select_reasoning_parameters(s, ComplexityWeights(1, 1, 1, tau)).size();
    CHECK(n <= last);
    last = n;
  }
}

}
