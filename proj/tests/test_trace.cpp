#include <doctest.h>

#include <string>

#include "core/trace.hpp"

using namespace core;

TEST_CASE("answer extraction matches the pinned fixtures") {
  CHECK(extract_answer("...so total is\n#### 57500") == std::optional<std::string>("57500"));
  CHECK(extract_answer("") == std::nullopt);
  CHECK(extract_answer("Final answer: 1, -3") == std::optional<std::string>("1,-3"));
  CHECK(extract_answer("Final answer: 57,500.") == std::optional<std::string>("57500"));
  CHECK(extract_answer("The result is \\boxed{42} indeed") ==
        std::optional<std::string>("42"));
  CHECK(extract_answer("<final_answer>7</final_answer>") ==
        std::optional<std::string>("7"));
  CHECK(extract_answer("no markers here at all") == std::nullopt);
}

TEST_CASE("the last marker in the text wins") {
  CHECK(extract_answer("#### 1\nmore text\n#### 2") == std::optional<std::string>("2"));
  CHECK(extract_answer("Final answer: 5\nlater \\boxed{9}") ==
        std::optional<std::string>("9"));
  CHECK(extract_answer("\\boxed{3} then at the end\nFinal answer: 8") ==
        std::optional<std::string>("8"));
}

TEST_CASE("spans that normalize to empty do not count") {
  CHECK(extract_answer("####   \nFinal answer: 4") == std::optional<std::string>("4"));
  CHECK(extract_answer("\\boxed{} and nothing else") == std::nullopt);
  CHECK(extract_answer("####  .  ") == std::nullopt);
}

TEST_CASE("normalization rules and idempotence") {
  CHECK(normalize_answer(" 57,500. ") == "57500");
  CHECK(normalize_answer("1, -3") == "1,-3");
  CHECK(normalize_answer("abc") == "abc");
  CHECK(normalize_answer("ABC Def") == "abc def");
  CHECK(normalize_answer("1,234,567.89") == "1234567.89");
  // Not thousands-grouped: commas stay (only the adjacent spaces go).
  CHECK(normalize_answer("12,34") == "12,34");
  CHECK(normalize_answer("x , y") == "x,y");
  CHECK(normalize_answer("ends with periods...") == "ends with periods");

  const char* samples[] = {" 57,500. ", "1, -3", "abc",   "ABC Def", "12,34",
                           "x , y",     "",      "  .  ", "1,234",   "a  b"};
  for (const char* s : samples) {
    CHECK(normalize_answer(normalize_answer(s)) == normalize_answer(s));
  }
}

TEST_CASE("correctness compares normalized extraction against gold") {
  Trace t = make_trace("p", 1, Round::ColdA, false, 0, "work...\n#### 57500");
  CHECK(t.extracted_answer == std::optional<std::string>("57500"));
  CHECK(correctness(t, "57500") == 1);
  CHECK(correctness(t, "575") == 0);

  Trace none = make_trace("p", 1, Round::ColdA, false, 0, "no answer given");
  CHECK(correctness(none, "42") == 0);
}

TEST_CASE("token estimate is ceil(chars / 4)") {
  CHECK(token_estimate("") == 0);
  CHECK(token_estimate("a") == 1);
  CHECK(token_estimate("abcd") == 1);
  CHECK(token_estimate("abcde") == 2);
  CHECK(token_estimate(std::string(1536 * 4, 'x')) == 1536);
  CHECK(token_estimate(std::string(1536 * 4 + 1, 'x')) == 1537);
}

TEST_CASE("round names round-trip") {
  CHECK(std::string(round_name(Round::ColdA)) == "A");
  CHECK(std::string(round_name(Round::ContextedB)) == "B");
  CHECK(round_from_name("A") == Round::ColdA);
  CHECK(round_from_name("B") == Round::ContextedB);
}
