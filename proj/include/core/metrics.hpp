#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace core {

// Per-instance, per-model boolean sample outcomes. Every instance carries
// the same number of models and the same K samples per model.
struct InstanceOutcomes {
  std::string problem_id;
  std::vector<std::vector<std::uint8_t>> samples;  // [model][k]
};

struct CorrectnessTable {
  int num_models = 0;
  int k = 0;
  std::vector<InstanceOutcomes> instances;

  void validate() const;  // throws contract_error on shape violations
};

struct TeamReport {
  double p1 = 0.0;
  double p2 = 0.0;
  double team = 0.0;
  double p12 = 0.0;          // both models correct
  double exactly_one = 0.0;  // exactly one model correct
  double both_wrong = 0.0;
  double delta = 0.0;  // team - max(p1, p2)
  bool bounds_ok = false;
};

// Fraction of instances where any of the model's K samples is correct.
// model is 1-based.
double pass_at_k(const CorrectnessTable& table, int model);

// Fraction of instances where any sample of any model is correct.
double team_pass_at_k(const CorrectnessTable& table);

// Inclusion-exclusion split of a two-model team from the three rates.
// Validates 0 <= p <= 1, team >= max(p1, p2), team <= p1 + p2.
TeamReport decomposition(double p1, double p2, double team);

// Same split from raw counts; the identity team = p1 + p2 - p12 is then
// exact at the integer level, and delta equals the empirical frequency of
// "weaker model correct and stronger model wrong".
TeamReport decomposition_from_table(const CorrectnessTable& table);

}  // namespace core
