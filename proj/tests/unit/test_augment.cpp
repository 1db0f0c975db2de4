#include <doctest.h>

#include "tafc/augment.hpp"
#include "tafc/error.hpp"

using namespace tafc;

namespace {

ToolSchema weather() {
  return parse_tool_schema(Json::parse(R"({"type":"function","function":{"name":"get_weather",
    "parameters":{"type":"object","properties":{
      "location":{"type":"string"},"unit":{"type":"string","enum":["c","f"]}},
    "required":["location"]}}})"));
}

ToolSchema db_query() {
  return parse_tool_schema(Json::parse(R"({"name":"db_query","description":"Run a query","parameters":{
    "type":"object","properties":{
      "query":{"type":"object","description":"Filters, see limit",
               "properties":{"filters":{"type":"array","items":{"type":"string"},"minItems":1,"maxItems":5,
                                        "description":"Combined with sort"},
                             "sort":{"type":"string"}},
               "required":["filters"]},
      "limit":{"type":"integer"}},
    "required":["query"]}})"));
}

std::vector<std::string> keys(const Json& object) {
  std::vector<std::string> out;
  for (const auto& [k, _] : object.items()) out.push_back(k);
  return out;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("simple tool gains only the optional think field, first") {
  const AugmentedTool t = augment_tool(weather(), AugmentOptions{});
  const Json s = serialize_tool_schema(t.schema);
  const Json& params = s["function"]["parameters"];
  CHECK(keys(params["properties"]) == std::vector<std::string>{"think", "location", "unit"});
  CHECK(params["properties"]["think"]["type"] == "string");
  CHECK(params["required"] == Json::array({"location"}));
  CHECK(t.manifest.function_level);
  CHECK(t.manifest.parameter_paths.empty());
  CHECK(params.contains(std::string(kMarkerKey)));
}

TEST_CASE("complex parameters are wrapped as think/value tuples") {
  const AugmentedTool t = augment_tool(db_query(), AugmentOptions{});
  CHECK(t.manifest.parameter_paths == std::vector<std::string>{"query", "query.filters"});
  const Json s = serialize_tool_schema(t.schema);
  const Json& query = s["parameters"]["properties"]["query"];
  CHECK(keys(query["properties"]) == std::vector<std::string>{"think", "value"});
  CHECK(query["required"] == Json::array({"think", "value"}));
  CHECK(query["description"] == "Filters, see limit");
  const Json& inner = query["properties"]["value"];
  CHECK(inner["properties"]["filters"]["properties"]["value"]["minItems"] == 1);
  CHECK(s["parameters"]["required"] == Json::array({"query"}));
}

TEST_CASE("strip restores the origin") {
  const ToolSchema origin = db_query();
  const AugmentedTool t = augment_tool(origin, AugmentOptions{});
  const ToolSchema back = strip_augmentation(t.schema, t.manifest);
  CHECK(canonical_dump(serialize_tool_schema(back)) == canonical_dump(serialize_tool_schema(origin)));
}

TEST_CASE("name collisions fall back") {
  const ToolSchema s = parse_tool_schema(Json::parse(R"({"name":"f","parameters":{"properties":{
    "think":{"type":"string"},"__tafc_think":{"type":"string"}}}})"));
  const AugmentedTool t = augment_tool(s, AugmentOptions{});
  CHECK(t.manifest.function_field == "__tafc_think_2");
  CHECK_FALSE(t.warnings.empty());

  const ToolSchema one = parse_tool_schema(Json::parse(R"({"name":"f","parameters":{"properties":{"think":{"type":"string"}}}})"));
  CHECK(augment_tool(one, AugmentOptions{}).manifest.function_field == "__tafc_think");
}

TEST_CASE("augmentation is idempotent") {
  const AugmentedTool once = augment_tool(db_query(), AugmentOptions{});
  const AugmentedTool twice = augment_tool(once.schema, AugmentOptions{});
  CHECK(canonical_dump(serialize_tool_schema(twice.schema)) == canonical_dump(serialize_tool_schema(once.schema)));
  CHECK(twice.manifest.parameter_paths == once.manifest.parameter_paths);
  const auto marker = read_marker(once.schema);
  REQUIRE(marker.has_value());
  CHECK(marker->to_json() == once.manifest.to_json());
}

TEST_CASE("explicit plans and bad targets") {
  const ToolSchema s = db_query();
  const AugmentedTool t = apply_augmentation(s, {"limit"}, ThinkDescriptor{}, false);
  CHECK_FALSE(t.manifest.function_level);
  CHECK(t.manifest.parameter_paths == std::vector<std::string>{"limit"});
  CHECK_THROWS_AS(apply_augmentation(s, {"nope"}, ThinkDescriptor{}), Error);
  CHECK_THROWS_AS(apply_augmentation(s, {"limit.x"}, ThinkDescriptor{}), Error);
}

TEST_CASE("default descriptions") {
  const std::string fn = default_think_description(weather());
  CHECK(fn.find("get_weather") != std::string::npos);
  CHECK(fn.find("justify") != std::string::npos);
  const ToolSchema db = parse_tool_schema(Json::parse(R"({"name":"db_query","parameters":{"properties":{
    "query":{"type":"string","pattern":"^select","maxLength":200}}}})"));
  const std::string p = default_think_description(db, "query");
  CHECK(p.find("query") != std::string::npos);
  CHECK(p.find("pattern") != std::string::npos);
  CHECK(p.find("maxLength") != std::string::npos);
  const ToolSchema ping = parse_tool_schema(Json::parse(R"({"name":"ping","parameters":{}})"));
  CHECK_FALSE(default_think_description(ping).empty());
  CHECK_THROWS_AS(default_think_description(ping, "x"), Error);
}

TEST_CASE("marker can be stripped for strict upstreams") {
  const Json s = serialize_tool_schema(augment_tool(weather(), AugmentOptions{}).schema);
  const Json clean = without_marker(s);
  CHECK_FALSE(clean["function"]["parameters"].contains(std::string(kMarkerKey)));
  CHECK(clean["function"]["parameters"]["properties"].contains("think"));
}

TEST_CASE("root without type records the addition") {
  const ToolSchema s = parse_tool_schema(Json::parse(R"({"name":"f","parameters":{"properties":{"a":{"type":"string"}}}})"));
  const AugmentedTool t = augment_tool(s, AugmentOptions{});
  CHECK(t.manifest.added_object_type);
  const ToolSchema back = strip_augmentation(t.schema, t.manifest);
  CHECK(canonical_dump(serialize_tool_schema(back)) == canonical_dump(serialize_tool_schema(s)));
}

TEST_CASE("registry") {
  ToolRegistry r;
  r.add(augment_tool(weather(), AugmentOptions{}));
  CHECK(r.find("get_weather") != nullptr);
  CHECK_THROWS_AS(r.at("nope"), Error);
  CHECK_THROWS_AS(r.add(augment_tool(weather(), AugmentOptions{})), Error);
}

}
