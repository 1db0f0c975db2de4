#include <doctest.h>

#include <cmath>

#include "tafc/error.hpp"
#include "tafc/tuning.hpp"

using namespace tafc;

namespace {

using ToolMap = std::map<std::string, ToolSchema, std::less<>>;

ToolMap weather_tools() {
  ToolMap m;
  m.emplace("get_weather", parse_tool_schema(Json::parse(R"({"name":"get_weather","description":"Forecast lookup",
    "parameters":{"type":"object","properties":{"city":{"type":"string"}},"required":["city"]}})")));
  return m;
}

std::vector<TuningExample> weather_tasks() {
  return {{"weather in Oslo", "get_weather", Json{{"city", "Oslo"}}, "Oslo is named", std::nullopt},
          {"weather in Rome", "get_weather", Json{{"city", "Rome"}}, "Rome is named", std::nullopt}};
}

class InputLogProb final : public LogProbProvider {
 public:
  std::optional<double> logprob(std::string_view, std::string_view context) override {
    if (context.find("Oslo") != std::string_view::npos) return -1.0;
    if (context.find("Rome") != std::string_view::npos) return -3.0;
    return std::nullopt;
  }
};

// Fills the city correctly only when the reasoning-field description says "justify".
class JustifyChat final : public ChatProvider {
 public:
  std::string complete(const std::string& system, const std::string& user) override {
    const bool good = system.find("justify") != std::string::npos;
    const std::string city = user.substr(user.rfind(' ') + 1);
    return Json{{"think", "picked"}, {"city", good ? city : "Paris"}}.dump();
  }
};

class FailingChat final : public ChatProvider {
 public:
  std::string complete(const std::string&, const std::string&) override {
    throw Error(ErrorCode::ProviderFailure, "down");
  }
};

std::vector<TuningExample> dummy_dataset(std::size_t n) {
  std::vector<TuningExample> d;
  for (std::size_t i = 0; i < n; ++i) d.push_back({"x" + std::to_string(i), "f", Json::object(), "r", std::nullopt});
  return d;
}

}  // namespace

TEST_SUITE("tuning") {

TEST_CASE("dataset parsing") {
  const auto d = parse_dataset(
      "{\"x\":\"a\",\"function\":\"f\",\"theta\":{\"k\":1},\"r_star\":\"because\"}\n\n"
      "{\"x\":\"b\",\"function\":\"g\",\"theta\":{},\"r_star\":\"\"}\n");
  REQUIRE(d.size() == 2);
  CHECK(d[0].theta["k"] == 1);
  CHECK(d[1].function_name == "g");
  CHECK_THROWS_WITH_AS(parse_dataset("{\"x\":\"a\"}\n{bad"), doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(parse_dataset("\n{bad"), doctest::Contains("line 2"), Error);
  CHECK_THROWS_AS(parse_dataset("{\"x\":\"a\",\"function\":\"f\",\"theta\":[],\"r_star\":\"\"}"), Error);
}

TEST_CASE("dataset lines join trace records") {
  TraceStore store;
  TraceRecord r;
  r.x = "weather in Oslo";
  r.function_name = "get_weather";
  r.parameters = Json{{"city", "Oslo"}};
  r.trace.function_level = "the user named Oslo";
  const auto id = store.append(r);
  const auto d = parse_dataset("{\"trace_id\":" + std::to_string(id) + ",\"r_star\":\"override\"}", &store);
  REQUIRE(d.size() == 1);
  CHECK(d[0].x == "weather in Oslo");
  CHECK(d[0].theta["city"] == "Oslo");
  CHECK(d[0].r_star == "override");
  CHECK(parse_dataset("{\"trace_id\":" + std::to_string(id) + "}", &store)[0].r_star == "the user named Oslo");
  CHECK_THROWS_AS(parse_dataset("{\"trace_id\":99}", &store), Error);
  CHECK_THROWS_AS(parse_dataset("{\"trace_id\":1}"), Error);
}

TEST_CASE("json object extraction") {
  CHECK(extract_json_object("```json\n{\"a\":1}\n```")->at("a") == 1);
  CHECK_FALSE(extract_json_object("no json here"));
  CHECK_FALSE(extract_json_object("{broken"));
}

TEST_CASE("objective is the mean logprob") {
  const auto tools = weather_tools();
  const auto tasks = weather_tasks();
  ProviderBundle p;
  p.logprob = std::make_shared<InputLogProb>();
  CHECK(estimate_description_objective("D", tasks, tools, p) == -2.0);
  CHECK_THROWS_WITH_AS(estimate_description_objective("D", {}, tools, p), doctest::Contains("EmptyTaskSet"), Error);
}

TEST_CASE("objective prefers descriptions that produce correct arguments") {
  const auto tools = weather_tools();
  const auto tasks = weather_tasks();
  ProviderBundle p;
  p.chat = std::make_shared<JustifyChat>();
  const double with = estimate_description_objective("Explain and justify each value.", tasks, tools, p);
  const double without = estimate_description_objective("Explain each value.", tasks, tools, p);
  CHECK(with > without);
  CHECK(with == doctest::Approx(std::log(3.0 / 4.0)));
  CHECK(without == doctest::Approx(std::log(1.0 / 4.0)));
}

TEST_CASE("refinement") {
  const std::vector<ExecutionTrace> traces{{"x1", "f", Json{{"a", 1}}, Json{{"a", 2}}, "r1", false},
                                           {"x2", "f", Json{{"a", 3}}, Json{{"a", 3}}, "r2", true}};
  ScriptedChatProvider v2({}, "V2");
  const RefinementResult r = refine_descriptions("V1", traces, v2);
  CHECK(r.text == "V2");
  CHECK_FALSE(r.retained);
  const std::string prompt = v2.prompts().at(0);
  CHECK(prompt.find("V1") != std::string::npos);
  CHECK(prompt.find("x1") != std::string::npos);
  CHECK(prompt.find("x2") != std::string::npos);
  CHECK(think_meta_prompt("V1", traces) == think_meta_prompt("V1", traces));

  ScriptedChatProvider blank({}, "  \n");
  const RefinementResult b = refine_descriptions("V1", traces, blank);
  CHECK(b.text == "V1");
  CHECK(b.retained);
  REQUIRE(b.warnings.size() == 1);
  CHECK(b.warnings[0].find("EmptyCandidate") == 0);

  CHECK_THROWS_AS(refine_descriptions("V1", {}, v2), Error);
  FailingChat failing;
  CHECK_THROWS_WITH_AS(refine_descriptions("V1", traces, failing), doctest::Contains("ProviderFailure"), Error);
}

TEST_CASE("think tuning keeps the best epoch") {
  const std::map<std::string, double> objective{{"D0", -5}, {"D1", -3}, {"D2", -2}, {"D3", -4}, {"D4", -2}, {"D5", -1}};
  ThinkTuningSteps steps;
  std::vector<std::string> collected_with;
  steps.objective = [&](const std::string& d) { return objective.at(d); };
  steps.collect = [&](const std::string& d, int) {
    collected_with.push_back(d);
    return std::vector<ExecutionTrace>{{"x", "f", Json::object(), Json::object(), "", true}};
  };
  steps.refine = [](const std::string& d, std::span<const ExecutionTrace>) {
    return RefinementResult{"D" + std::to_string(d.back() - '0' + 1), false, {}};
  };
  const ThinkTuningResult r = run_think_tuning("D0", 5, steps);
  CHECK(r.epochs.size() == 5);
  CHECK(r.selected_epoch == 5);
  CHECK(r.final_description == "D5");
  CHECK(r.final_objective == -1.0);
  CHECK(collected_with == std::vector<std::string>{"D0", "D1", "D2", "D3", "D4"});

  const std::map<std::string, double> worse{{"D0", 0}, {"D1", -1}, {"D2", 0}};
  steps.objective = [&](const std::string& d) { return worse.at(d); };
  const ThinkTuningResult tie = run_think_tuning("D0", 2, steps);
  CHECK(tie.selected_epoch == 0);
  CHECK(tie.final_description == "D0");
}

TEST_CASE("think tuning end to end with scripted providers") {
  const auto tools = weather_tools();
  const auto tasks = weather_tasks();
  ProviderBundle p;
  p.chat = std::make_shared<JustifyChat>();
  ThinkTuningOptions o;
  o.epochs = 2;
  o.traces_per_epoch = 2;
  // The chat provider also acts as refiner and answers with a JSON blob, which
  // still counts as a candidate description.
  const ThinkTuningResult r = tune_think_description("Explain.", tasks, tools, p, o);
  CHECK(r.epochs.size() == 2);
  CHECK(r.initial_objective == doctest::Approx(std::log(1.0 / 4.0)));
}

TEST_CASE("halving losses converge at iteration 12") {
  const auto data = dummy_dataset(20);
  const AlignmentWeights w(1, 0, 0, 0.1, 1e-3);
  const BatchEvaluator evaluate = [](const std::string& d, std::span<const TuningExample>) {
    BatchEvaluation e;
    e.loss = alignment_loss(std::stod(d), 0, 0, AlignmentWeights(1, 0, 0));
    return e;
  };
  const DescriptionRefiner halve = [](const std::string& d, double, std::span<const ReasoningTriple>) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", std::stod(d) / 2.0);
    return std::string(buf);
  };
  const ToolTuningResult r = optimize_tool_description("2.0", data, w, evaluate, halve);
  CHECK(r.stop_reason == "converged");
  CHECK(r.history.size() == 12);
  CHECK(r.final_loss == 2.0 / 2048.0);
  CHECK(r.final_description == r.history.back().description);
}

TEST_CASE("tool refinement stop rules") {
  const auto data = dummy_dataset(3);
  const AlignmentWeights w;
  const std::map<std::string, double> losses{{"a", 1.0}, {"b", 1.5}, {"c", 0.8}, {"d", 0.8}};
  const BatchEvaluator evaluate = [&](const std::string& d, std::span<const TuningExample> batch) {
    BatchEvaluation e;
    e.loss = alignment_loss(losses.at(d), 0, 0, AlignmentWeights(1, 0, 0));
    for (const auto& ex : batch) e.triples.push_back({ex.x, "r", ex.r_star});
    return e;
  };
  const DescriptionRefiner next = [](const std::string& d, double, std::span<const ReasoningTriple>) {
    return std::string(1, static_cast<char>(d[0] + 1));
  };
  const ToolTuningResult best = optimize_tool_description("a", data, w, evaluate, next);
  CHECK(best.loss_history() == std::vector<double>{1.0, 1.5, 0.8, 0.8});
  CHECK(best.final_description == "c");
  CHECK(best.final_loss == 0.8);

  const DescriptionRefiner same = [](const std::string& d, double, std::span<const ReasoningTriple>) { return d; };
  const ToolTuningResult unchanged = optimize_tool_description("a", data, w, evaluate, same);
  CHECK(unchanged.history.size() == 1);
  CHECK(unchanged.stop_reason == "unchanged");

  const AlignmentWeights two(1, 1, 1, 0.1, 1e-3, 2);
  const ToolTuningResult capped = optimize_tool_description("a", data, two, evaluate, next);
  CHECK(capped.history.size() == 2);
  CHECK(capped.stop_reason == "max_iterations");
  CHECK(capped.final_description == "a");

  int calls = 0;
  const DescriptionRefiner flaky = [&](const std::string& d, double, std::span<const ReasoningTriple>) -> std::string {
    if (++calls == 2) throw Error(ErrorCode::ProviderFailure, "down");
    return std::string(1, static_cast<char>(d[0] + 2));
  };
  const ToolTuningResult failed = optimize_tool_description("a", data, w, evaluate, flaky);
  CHECK(failed.provider_failure);
  CHECK(failed.final_description == "c");
  CHECK(failed.history.size() == 2);

  const DescriptionRefiner blank = [&](const std::string&, double, std::span<const ReasoningTriple>) {
    return std::string(" ");
  };
  const ToolTuningResult blanked = optimize_tool_description("a", data, two, evaluate, blank);
  CHECK(blanked.warnings.size() == 1);
  CHECK(blanked.history.size() == 2);

  CHECK_THROWS_AS(optimize_tool_description("a", {}, w, evaluate, next), Error);
}

TEST_CASE("batches rotate through the dataset") {
  const auto data = dummy_dataset(5);
  const AlignmentWeights w(1, 1, 1, 0.1, 1e-3, 3, 2);
  std::vector<std::string> firsts;
  int step = 0;
  const BatchEvaluator evaluate = [&](const std::string&, std::span<const TuningExample> batch) {
    firsts.push_back(batch.front().x);
    CHECK(batch.size() == 2);
    BatchEvaluation e;
    e.loss.l_align = ++step;
    return e;
  };
  const DescriptionRefiner next = [](const std::string& d, double, std::span<const ReasoningTriple>) { return d + "'"; };
  optimize_tool_description("d", data, w, evaluate, next);
  CHECK(firsts == std::vector<std::string>{"x0", "x2", "x4"});
}

TEST_CASE("alignment evaluation with scripted providers") {
  const ToolSchema tool = weather_tools().at("get_weather");
  const std::vector<TuningExample> batch{{"weather in Oslo", "get_weather", Json{{"city", "Oslo"}}, "picked", std::nullopt}};
  ProviderBundle p;
  p.chat = std::make_shared<JustifyChat>();
  p.embed = std::make_shared<HashedBagOfWordsEmbedder>();
  p.logprob = std::make_shared<TokenOverlapLogProb>();
  const AlignmentWeights w;
  const BatchEvaluation good = evaluate_alignment(tool, "Forecast lookup", batch, w, p);
  // The built-in reasoning instruction says "justify", so the mock fills the
  // city correctly and reasons "picked", equal to r_star.
  CHECK(good.loss.l_sem == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(good.loss.l_action == 0.0);
  CHECK(good.loss.l_align == doctest::Approx(good.loss.l_logic / 3.0));
  REQUIRE(good.triples.size() == 1);
  CHECK(good.triples[0].r == "picked");

  ProviderBundle missing = p;
  missing.logprob.reset();
  CHECK_THROWS_AS(evaluate_alignment(tool, "d", batch, w, missing), Error);
  CHECK_THROWS_AS(tune_tool_description(tool, batch, w, missing), Error);
}

}
