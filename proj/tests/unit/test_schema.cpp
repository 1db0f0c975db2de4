#include <doctest.h>

#include "tafc/error.hpp"
#include "tafc/schema.hpp"

using namespace tafc;

namespace {

Json weather_tool() {
  return Json::parse(R"({
    "type": "function",
    "function": {
      "name": "get_weather",
      "description": "Current weather",
      "parameters": {
        "type": "object",
        "properties": {
          "location": {"type": "string", "description": "City name"},
          "unit": {"type": "string", "enum": ["c", "f"]}
        },
        "required": ["location"]
      }
    }
  })");
}

ErrorCode code_of(const Json& raw) {
  try {
    parse_tool_schema(raw);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("schema") {

TEST_CASE("parse maps parameters and required set") {
  const ToolSchema s = parse_tool_schema(weather_tool());
  CHECK(s.name == "get_weather");
  REQUIRE(s.properties().size() == 2);
  CHECK(s.properties()[0].name == "location");
  CHECK(s.properties()[1].node.kind == Kind::Enum);
  CHECK(s.required() == std::vector<std::string>{"location"});
  CHECK(s.envelope == ToolEnvelope::Wrapped);
}

TEST_CASE("empty parameters") {
  const ToolSchema s = parse_tool_schema(Json::parse(R"({"name":"ping","parameters":{}})"));
  CHECK(s.properties().empty());
  CHECK(s.envelope == ToolEnvelope::Bare);
  CHECK(canonical_dump(serialize_tool_schema(s)) == canonical_dump(Json::parse(R"({"name":"ping","parameters":{}})")));
}

TEST_CASE("parse errors") {
  CHECK(code_of(Json::parse(R"({"parameters":{"type":"object"}})")) == ErrorCode::MissingName);
  CHECK(code_of(Json::parse(R"({"name":"f","parameters":[1]})")) == ErrorCode::MalformedParameters);
  CHECK(code_of(Json::parse(R"({"name":"f","parameters":{"type":"string"}})")) == ErrorCode::MalformedParameters);
  CHECK(code_of(Json::parse(R"({"name":"f","parameters":{"properties":{"a":{"type":"tuple"}}}})")) ==
        ErrorCode::UnsupportedKind);
  CHECK(code_of(Json::parse(R"({"name":"f","parameters":{"properties":{"a":{"allOf":[]}}}})")) ==
        ErrorCode::UnsupportedKind);
}

TEST_CASE("round trip keeps unknown fields") {
  const Json raw = Json::parse(R"({
    "type": "function", "x-vendor": 1,
    "function": {
      "name": "db_query", "strict": true,
      "parameters": {
        "type": "object", "additionalProperties": false,
        "properties": {
          "query": {"type": "object", "title": "Q",
                    "properties": {"filters": {"type": "array", "items": {"type": "string"}, "minItems": 1}}},
          "limit": {"type": "integer", "minimum": 1, "maximum": 100, "default": 10},
          "mode": {"anyOf": [{"type": "string"}, {"type": "integer"}]},
          "either": {"type": ["string", "number"]},
          "ratio": {"type": "number", "multipleOf": 0.5, "exclusiveMinimum": 0}
        },
        "required": ["query"]
      }
    }
  })");
  const Json back = serialize_tool_schema(parse_tool_schema(raw));
  CHECK(canonical_dump(back) == canonical_dump(raw));
}

TEST_CASE("validation accepts and rejects") {
  const ToolSchema s = parse_tool_schema(weather_tool());
  CHECK(validate_arguments(s, Json::parse(R"({"location":"Paris"})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"location":5})")).ok());
  const auto missing = validate_arguments(s, Json::parse(R"({"unit":"c"})"));
  REQUIRE_FALSE(missing.ok());
  CHECK(missing.violations[0].path == "location");
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"location":"Paris","unit":"k"})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse("[]")).ok());
}

TEST_CASE("constraints") {
  const ToolSchema s = parse_tool_schema(Json::parse(R"({"name":"f","parameters":{"properties":{
    "code": {"type":"string","pattern":"^[A-Z]{3}$"},
    "day": {"type":"string","format":"date"},
    "n": {"type":"integer","minimum":0,"maximum":10,"multipleOf":5},
    "tags": {"type":"array","items":{"type":"string"},"uniqueItems":true,"maxItems":2},
    "name": {"type":"string","maxLength":3}
  }}})"));
  CHECK(validate_arguments(s, Json::parse(R"({"code":"BOS","day":"2025-02-28","n":10,"tags":["a","b"],"name":"héé"})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"code":"bos"})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"day":"2025-02-30"})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"n":7})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"n":15})")).ok());
  CHECK(validate_arguments(s, Json::parse(R"({"n":5.0})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"tags":["a","a"]})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"tags":["a","b","c"]})")).ok());
  CHECK_FALSE(validate_arguments(s, Json::parse(R"({"name":"abcd"})")).ok());
}

TEST_CASE("constraint count") {
  const ParameterNode n = parse_parameter_node(Json::parse(R"({"type":"string","pattern":"x","minLength":1,"format":"date"})"));
  CHECK(n.constraints.count() == 3);
  CHECK(n.depth() == 1);
  const ParameterNode o = parse_parameter_node(Json::parse(R"({"type":"object","properties":{"a":{"type":"array","items":{"type":"integer"}}}})"));
  CHECK(o.depth() == 3);
}

TEST_CASE("tools list forms") {
  const Json one = weather_tool();
  CHECK(parse_tools(Json::array({one})).size() == 1);
  CHECK(parse_tools(one).size() == 1);
  CHECK(parse_tools(Json{{"tools", Json::array({one})}}).size() == 1);
  CHECK_THROWS_AS(parse_tools(Json::array({one, one})), Error);
}

}
