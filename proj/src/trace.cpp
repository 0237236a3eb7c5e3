#include "core/trace.hpp"

#include <algorithm>
#include <cctype>

#include "core/errors.hpp"

namespace core {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Case-insensitive search for a lowercase needle.
std::size_t ifind(const std::string& hay_lower, const std::string& needle_lower,
                  std::size_t from) {
  return hay_lower.find(needle_lower, from);
}

// True when the whole string is a number whose commas are valid thousands
// groups, e.g. "57,500" or "-1,234,567.89". "1,-3" is not.
bool is_thousands_grouped_numeric(const std::string& s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t lead = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    ++lead;
    ++i;
  }
  if (lead == 0 || lead > 3) return false;
  std::size_t groups = 0;
  while (i < s.size() && s[i] == ',') {
    ++i;
    for (int k = 0; k < 3; ++k, ++i) {
      if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    ++groups;
  }
  if (groups == 0) return false;
  if (i < s.size() && s[i] == '.') {
    ++i;
    if (i >= s.size()) return false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  }
  return i == s.size();
}

struct Marker {
  std::size_t pos;
  int precedence;  // lower wins at equal pos
  std::string span;
};

// Captures the rest of the line after pos.
std::string rest_of_line(const std::string& text, std::size_t pos) {
  std::size_t end = text.find('\n', pos);
  if (end == std::string::npos) end = text.size();
  return text.substr(pos, end - pos);
}

// Interior of a balanced {...} starting at open_brace; nullopt if unbalanced.
std::optional<std::string> balanced_braces(const std::string& text, std::size_t open_brace) {
  int depth = 0;
  for (std::size_t i = open_brace; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      --depth;
      if (depth == 0) return text.substr(open_brace + 1, i - open_brace - 1);
    }
  }
  return std::nullopt;
}

}  // namespace

const char* round_name(Round r) { return r == Round::ColdA ? "A" : "B"; }

Round round_from_name(const std::string& s) {
  if (s == "A") return Round::ColdA;
  if (s == "B") return Round::ContextedB;
  throw data_error("unknown round name: " + s);
}

int token_estimate(const std::string& text) {
  return static_cast<int>((text.size() + 3) / 4);
}

std::string normalize_answer(const std::string& raw) {
  std::string s = to_lower(raw);
  // Leading whitespace off; trailing whitespace and periods off in any mix.
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && (is_space(s[e - 1]) || s[e - 1] == '.')) --e;
  s = s.substr(b, e - b);
  // Drop whitespace runs adjacent to commas.
  std::string t;
  t.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_space(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_space(s[j])) ++j;
      bool next_comma = j < s.size() && s[j] == ',';
      bool prev_comma = !t.empty() && t.back() == ',';
      if (!next_comma && !prev_comma) t.append(s, i, j - i);
      i = j - 1;
    } else {
      t.push_back(s[i]);
    }
  }
  if (is_thousands_grouped_numeric(t)) {
    t.erase(std::remove(t.begin(), t.end(), ','), t.end());
  }
  return t;
}

std::optional<std::string> extract_answer(const std::string& text) {
  const std::string lower = to_lower(text);
  std::vector<Marker> found;

  // <final_answer> ... </final_answer>
  for (std::size_t p = ifind(lower, "<final_answer>", 0); p != std::string::npos;
       p = ifind(lower, "<final_answer>", p + 1)) {
    std::size_t body = p + 14;
    std::size_t close = ifind(lower, "</final_answer>", body);
    if (close == std::string::npos) break;
    found.push_back({p, 0, text.substr(body, close - body)});
  }
  // #### rest-of-line
  for (std::size_t p = text.find("####"); p != std::string::npos;
       p = text.find("####", p + 1)) {
    found.push_back({p, 1, rest_of_line(text, p + 4)});
  }
  // \boxed{...}
  const std::string boxed = "\\boxed{";
  for (std::size_t p = text.find(boxed); p != std::string::npos;
       p = text.find(boxed, p + 1)) {
    if (auto inner = balanced_braces(text, p + boxed.size() - 1)) {
      found.push_back({p, 2, *inner});
    }
  }
  // Final answer: rest-of-line
  for (std::size_t p = ifind(lower, "final answer:", 0); p != std::string::npos;
       p = ifind(lower, "final answer:", p + 1)) {
    found.push_back({p, 3, rest_of_line(text, p + 13)});
  }

  std::optional<std::string> best;
  std::size_t best_pos = 0;
  int best_prec = 0;
  for (const auto& m : found) {
    std::string norm = normalize_answer(m.span);
    if (norm.empty()) continue;
    if (!best || m.pos > best_pos || (m.pos == best_pos && m.precedence < best_prec)) {
      best = std::move(norm);
      best_pos = m.pos;
      best_prec = m.precedence;
    }
  }
  return best;
}

Trace make_trace(std::string problem_id, int model_id, Round round, bool hint_shown,
                 int sample_index, std::string text) {
  Trace t;
  t.problem_id = std::move(problem_id);
  t.model_id = model_id;
  t.round = round;
  t.hint_shown = hint_shown;
  t.sample_index = sample_index;
  t.token_count_estimate = token_estimate(text);
  t.extracted_answer = extract_answer(text);
  t.text = std::move(text);
  return t;
}

int correctness(const Trace& trace, const std::string& gold_answer) {
  return trace.extracted_answer && *trace.extracted_answer == gold_answer ? 1 : 0;
}

}  // namespace core
