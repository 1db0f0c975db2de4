#include <doctest.h>

#include "tafc/error.hpp"
#include "tafc/filter.hpp"

using namespace tafc;

namespace {

AugmentedTool db_query(bool function_level = true) {
  const ToolSchema s = parse_tool_schema(Json::parse(R"({"name":"db_query","parameters":{"type":"object","properties":{
    "query":{"type":"object","properties":{"filters":{"type":"array","items":{"type":"string"}}}},
    "raw":{"type":"object"}}}})"));
  return apply_augmentation(s, {"query", "query.filters"}, ThinkDescriptor{}, function_level);
}

}  // namespace

TEST_SUITE("filter") {

TEST_CASE("function-level think is stripped and recorded") {
  const ToolSchema s = parse_tool_schema(Json::parse(R"({"name":"get_weather","parameters":{"properties":{"location":{"type":"string"}}}})"));
  const AugmentedTool t = apply_augmentation(s, {}, ThinkDescriptor{});
  const FilteredCall c = filter_arguments(t, Json::parse(R"({"think":"user asked for Paris weather","location":"Paris"})"),
                                          FilterMode::Strict);
  CHECK(c.clean_args.dump() == R"({"location":"Paris"})");
  REQUIRE(c.trace.function_level.has_value());
  CHECK(*c.trace.function_level == "user asked for Paris weather");
  CHECK(c.trace.per_parameter.empty());
}

TEST_CASE("nested tuples unwrap depth first") {
  const FilteredCall c = filter_arguments(
      db_query(), Json::parse(R"({"think":"t0","query":{"think":"t1","value":{"filters":{"think":"t2","value":["a"]}}}})"),
      FilterMode::Strict);
  CHECK(c.clean_args.dump() == R"({"query":{"filters":["a"]}})");
  CHECK(*c.trace.function_level == "t0");
  CHECK(c.trace.per_parameter == std::map<std::string, std::string>{{"query", "t1"}, {"query.filters", "t2"}});
  CHECK(c.strictness_warnings.empty());
}

TEST_CASE("malformed tuple: strict aborts, lenient passes the raw node") {
  const Json raw = Json::parse(R"({"query":"select *"})");
  CHECK_THROWS_WITH_AS(filter_arguments(db_query(), raw, FilterMode::Strict), doctest::Contains("MalformedReasoningTuple"),
                       Error);
  const FilteredCall c = filter_arguments(db_query(), raw, FilterMode::Lenient);
  CHECK(c.clean_args == raw);
  CHECK(c.strictness_warnings.size() == 1);
  CHECK(c.trace.per_parameter.at("query").empty());
}

TEST_CASE("data outside the manifest is untouched") {
  const Json raw = Json::parse(R"({"raw":{"think":"user data","value":3},"query":{"value":{"filters":{"value":[]}}}})");
  const FilteredCall c = filter_arguments(db_query(), raw, FilterMode::Strict);
  CHECK(c.clean_args.dump() == R"({"raw":{"think":"user data","value":3},"query":{"filters":[]}})");
  CHECK(c.trace.per_parameter.empty());
  CHECK_FALSE(c.trace.function_level.has_value());
}

TEST_CASE("empty reasoning differs from absent reasoning") {
  const FilteredCall c = filter_arguments(db_query(), Json::parse(R"({"think":"","query":{"think":"","value":{}}})"),
                                          FilterMode::Strict);
  REQUIRE(c.trace.function_level.has_value());
  CHECK(c.trace.function_level->empty());
  CHECK(c.trace.per_parameter.count("query") == 1);
}

TEST_CASE("extra tuple keys warn but do not fail") {
  const FilteredCall c = filter_arguments(db_query(), Json::parse(R"({"query":{"think":"a","value":{},"note":1}})"),
                                          FilterMode::Strict);
  CHECK(c.clean_args.dump() == R"({"query":{}})");
  CHECK(c.strictness_warnings.size() == 1);
}

TEST_CASE("filtering clean arguments again changes nothing") {
  const AugmentedTool t = db_query();
  const FilteredCall once = filter_arguments(
      t, Json::parse(R"({"think":"x","query":{"think":"y","value":{"filters":{"think":"z","value":["q"]}}}})"),
      FilterMode::Lenient);
  const AugmentedTool plain = apply_augmentation(t.origin, {}, ThinkDescriptor{}, false);
  CHECK(filter_arguments(plain, once.clean_args, FilterMode::Strict).clean_args == once.clean_args);
}

TEST_CASE("encode is the inverse of filter") {
  const AugmentedTool t = db_query();
  const Json clean = Json::parse(R"({"query":{"filters":["a","b"]},"raw":{"k":1}})");
  ReasoningTrace trace;
  trace.function_level = "why";
  trace.per_parameter["query"] = "q";
  trace.per_parameter["query.filters"] = "f";
  const Json encoded = encode_arguments(t, clean, trace);
  CHECK(encoded.begin().key() == "think");
  CHECK(encoded["query"].begin().key() == "think");
  const FilteredCall back = filter_arguments(t, encoded, FilterMode::Strict);
  CHECK(back.clean_args == clean);
  CHECK(back.trace == trace);
}

TEST_CASE("unknown function") {
  ToolRegistry r;
  r.add(db_query());
  CHECK_THROWS_WITH_AS(filter_call(r, "other", Json::object(), FilterMode::Strict), doctest::Contains("UnknownFunction"),
                       Error);
  CHECK(filter_call(r, "db_query", Json::object(), FilterMode::Strict).function_name == "db_query");
}

TEST_CASE("trace json round trip") {
  ReasoningTrace t;
  t.function_level = "";
  t.per_parameter["a.b"] = "x";
  CHECK(ReasoningTrace::from_json(t.to_json()) == t);
  CHECK(ReasoningTrace::from_json(ReasoningTrace{}.to_json()) == ReasoningTrace{});
}

}
