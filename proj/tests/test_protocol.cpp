#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "core/protocol.hpp"
#include "core/rewards.hpp"

using namespace core;

namespace {

Problem problem() { return {"p1", "What is 6 times 7?", "42"}; }

}  // namespace

TEST_CASE("prompts are byte-exact for the cold and hinted templates") {
  Problem p = problem();
  CHECK(render_prompt(p, std::nullopt) ==
        "Question: What is 6 times 7?\n\nLet's solve this step by step:");

  TeacherContext ctx;
  ctx.text = "Multiply the two numbers.";
  CHECK(render_prompt(p, ctx) ==
        "Question: What is 6 times 7?\n\nHint:\nMultiply the two numbers.\n\n"
        "Let's solve this step by step:");

  TeacherContext empty_ctx;
  empty_ctx.text = "";
  CHECK(render_prompt(p, empty_ctx) == render_prompt(p, std::nullopt));
}

TEST_CASE("marker detection covers every pattern family") {
  CHECK(contains_answer_marker("so\n#### 42"));
  CHECK(contains_answer_marker("Final answer: 42"));
  CHECK(contains_answer_marker("FINAL ANSWER: 42"));
  CHECK(contains_answer_marker("thus \\boxed{42}"));
  CHECK(contains_answer_marker("<final_answer>42</final_answer>"));
  CHECK(contains_answer_marker("closing </final_answer> tag alone"));
  CHECK_FALSE(contains_answer_marker("no markers to be found here"));
}

TEST_CASE("stripping removes every marker and keeps the reasoning") {
  std::string text =
      "First multiply 6 by 7.\n"
      "The product of the factors is \\boxed{42} as shown.\n"
      "Keep this line intact.\n"
      "#### 42\n"
      "Final answer: 42\n"
      "<final_answer>42</final_answer>\n"
      "Trailing thought.";
  std::string cleaned = strip_answer_markers(text);
  CHECK_FALSE(contains_answer_marker(cleaned));
  CHECK(cleaned.find("First multiply 6 by 7.") != std::string::npos);
  CHECK(cleaned.find("Keep this line intact.") != std::string::npos);
  CHECK(cleaned.find("Trailing thought.") != std::string::npos);
  CHECK(cleaned.find("the factors is  as shown") != std::string::npos);
  CHECK(cleaned.find("42") == std::string::npos);
}

TEST_CASE("teacher selection prefers reward, then brevity, then model, then sample") {
  auto t = [](const std::string& text, int model, int sample) {
    return make_trace("p1", model, Round::ColdA, false, sample, text);
  };
  std::vector<Trace> traces = {
      t("a longer correct trace here\n#### 42", 1, 0),
      t("short\n#### 42", 2, 0),
      t("wrong\n#### 7", 1, 1),
  };
  std::vector<double> r_et = {1.3, 1.3, 0.0};
  auto best = select_teacher(traces, "42", r_et);
  REQUIRE(best.has_value());
  CHECK(*best == 1);  // equal reward, shorter trace wins

  std::vector<Trace> none = {t("wrong\n#### 7", 1, 0)};
  std::vector<double> r_none = {0.0};
  CHECK_FALSE(select_teacher(none, "42", r_none).has_value());

  // Equal reward and equal length: lower model id.
  std::vector<Trace> tie = {t("same\n#### 42", 2, 0), t("same\n#### 42", 1, 0)};
  std::vector<double> r_tie = {1.3, 1.3};
  CHECK(*select_teacher(tie, "42", r_tie) == 1);
}

TEST_CASE("teacher context stays within budget and never leaks an answer") {
  ProtocolConfig cfg;
  cfg.context_budget_tokens = 16;
  std::string body(400, 'x');
  Trace teacher = make_trace("p1", 1, Round::ColdA, false, 0,
                             "Reasoning " + body + "\n#### 42");
  auto ctx = build_teacher_context(teacher, cfg);
  CHECK(ctx.token_count_estimate <= 16);
  CHECK_FALSE(contains_answer_marker(ctx.text));
  CHECK(ctx.source_model_id == 1);
}

TEST_CASE("teacher context extracts the matching strategy block when present") {
  ProtocolConfig cfg;
  std::string text =
      "<strategy id=\"alpha\">\nUse the direct route.\n#### 42\n</strategy>\n"
      "<strategy id=\"beta\">\nUse the scenic route.\n#### 43\n</strategy>";
  Trace teacher = make_trace("p1", 1, Round::ColdA, false, 0, text);
  REQUIRE(teacher.extracted_answer == std::optional<std::string>("43"));
  auto ctx = build_teacher_context(teacher, cfg);
  CHECK(ctx.text.find("scenic") != std::string::npos);
  CHECK(ctx.text.find("direct") == std::string::npos);
  CHECK_FALSE(contains_answer_marker(ctx.text));
}

TEST_CASE("round A samples every model K times with deterministic text") {
  ProtocolConfig cfg;
  cfg.k_cold = 2;
  MockBackend m1({}, std::string("reply one\n#### 42"));
  MockBackend m2({}, std::string("reply two\n#### 7"));
  std::vector<Backend*> backends = {&m1, &m2};
  auto traces = run_round_a(problem(), backends, cfg);
  REQUIRE(traces.size() == 4);
  CHECK(traces[0].model_id == 1);
  CHECK(traces[0].sample_index == 0);
  CHECK(traces[1].sample_index == 1);
  CHECK(traces[2].model_id == 2);
  CHECK(traces[0].round == Round::ColdA);
  CHECK_FALSE(traces[0].hint_shown);
  CHECK(traces[0].extracted_answer == std::optional<std::string>("42"));

  auto again = run_round_a(problem(), backends, cfg);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    CHECK(traces[i].text == again[i].text);
  }
}

TEST_CASE("hint dropout hits its probability over many samples") {
  ProtocolConfig cfg;
  cfg.k_contexted = 1;
  cfg.p_hint = 0.5;
  cfg.team_size = 1;
  Problem p = problem();
  MockBackend backend({}, std::string("any\n#### 1"));
  std::vector<Backend*> backends = {&backend};
  TeacherContext ctx;
  ctx.text = "use multiplication";
  int shown = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Problem varied = p;
    varied.id = "p" + std::to_string(i);
    auto traces = run_round_b(varied, backends, ctx, cfg);
    REQUIRE(traces.size() == 1);
    shown += traces[0].hint_shown ? 1 : 0;
  }
  double freq = static_cast<double>(shown) / n;
  CHECK(std::abs(freq - 0.5) < 0.02);
}

TEST_CASE("an absent or empty teacher never shows a hint") {
  ProtocolConfig cfg;
  cfg.p_hint = 1.0;  // would always show if a context existed
  MockBackend backend({}, std::string("any\n#### 1"));
  std::vector<Backend*> backends = {&backend};
  auto no_teacher = run_round_b(problem(), backends, std::nullopt, cfg);
  for (const auto& t : no_teacher) CHECK_FALSE(t.hint_shown);
  TeacherContext empty_ctx;
  auto silent = run_round_b(problem(), backends, empty_ctx, cfg);
  for (const auto& t : silent) CHECK_FALSE(t.hint_shown);
}

TEST_CASE("a full instance wires rounds, teacher, rewards, and advantages together") {
  ProtocolConfig pcfg;
  pcfg.p_hint = 1.0;  // make the hint deterministic
  RewardConfig rcfg;
  Problem p = problem();

  std::string cold_prompt = render_prompt(p, std::nullopt);
  MockBackend m1({{cold_prompt, "multiply them\n#### 42"}},
                 std::string("hinted copy\n#### 42"));
  MockBackend m2({{cold_prompt, "divide them\n#### 6"}},
                 std::string("hinted recovery\n#### 42"));
  std::vector<Backend*> backends = {&m1, &m2};

  auto ep = run_instance(p, backends, pcfg, rcfg);
  CHECK(ep.round_a_traces.size() == 4);
  CHECK(ep.round_b_traces.size() == 2);
  REQUIRE(ep.teacher.has_value());
  CHECK(ep.teacher->source_model_id == 1);
  CHECK(ep.round_a_success == std::vector<int>{1, 0});
  REQUIRE(ep.breakdowns.size() == 6);
  REQUIRE(ep.advantages.advantages.size() == 6);
  // Model 2 failed cold and succeeded with the hint: a rescue.
  CHECK(ep.breakdowns[5].rescue_z == 1);

  double mean = 0.0;
  for (double r : ep.advantages.advantages) mean += r;
  CHECK(std::isfinite(mean));
}

TEST_CASE("disabling round B yields a cold-only episode") {
  ProtocolConfig pcfg;
  pcfg.enable_round_b = false;
  RewardConfig rcfg;
  MockBackend m1({}, std::string("a\n#### 42"));
  MockBackend m2({}, std::string("b\n#### 42"));
  std::vector<Backend*> backends = {&m1, &m2};
  auto ep = run_instance(problem(), backends, pcfg, rcfg);
  CHECK(ep.round_b_traces.empty());
  CHECK(ep.breakdowns.size() == ep.round_a_traces.size());
}

TEST_CASE("cold evaluation produces a correctness table in problem order") {
  std::vector<Problem> problems = {{"a", "q1", "1"}, {"b", "q2", "2"}};
  MockBackend m1({}, std::string("#### 1"));
  MockBackend m2({}, std::string("#### 2"));
  std::vector<Backend*> backends = {&m1, &m2};
  auto table = run_cold_eval(problems, backends, 2, 0, 4096, 2);
  CHECK(table.num_models == 2);
  CHECK(table.k == 2);
  REQUIRE(table.instances.size() == 2);
  CHECK(table.instances[0].problem_id == "a");
  CHECK(table.instances[0].samples[0] == std::vector<std::uint8_t>{1, 1});
  CHECK(table.instances[0].samples[1] == std::vector<std::uint8_t>{0, 0});
  CHECK(table.instances[1].samples[1] == std::vector<std::uint8_t>{1, 1});
}
