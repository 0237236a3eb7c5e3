#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace core {

namespace {

bool any_correct(const std::vector<std::uint8_t>& samples) {
  return std::any_of(samples.begin(), samples.end(), [](std::uint8_t s) { return s != 0; });
}

// Upper bound from the two-model decomposition: delta cannot exceed the
// weaker model's rate nor the stronger model's headroom.
bool delta_bounds_ok(double p1, double p2, double delta, double tol) {
  double weak = std::min(p1, p2);
  double strong = std::max(p1, p2);
  double cap = std::min(weak, 1.0 - strong);
  return delta >= -tol && delta <= cap + tol;
}

}  // namespace

void CorrectnessTable::validate() const {
  if (num_models < 1) throw contract_error("table needs at least one model");
  if (k < 1) throw contract_error("table needs at least one sample per model");
  for (const auto& inst : instances) {
    if (static_cast<int>(inst.samples.size()) != num_models) {
      throw contract_error("instance " + inst.problem_id + ": wrong model count");
    }
    for (const auto& row : inst.samples) {
      if (static_cast<int>(row.size()) != k) {
        throw contract_error("instance " + inst.problem_id + ": wrong sample count");
      }
    }
  }
}

double pass_at_k(const CorrectnessTable& table, int model) {
  table.validate();
  if (model < 1 || model > table.num_models) {
    throw contract_error("pass_at_k: model index out of range");
  }
  if (table.instances.empty()) throw contract_error("pass_at_k: empty table");
  std::size_t hits = 0;
  for (const auto& inst : table.instances) {
    if (any_correct(inst.samples[static_cast<std::size_t>(model - 1)])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(table.instances.size());
}

double team_pass_at_k(const CorrectnessTable& table) {
  table.validate();
  if (table.instances.empty()) throw contract_error("team_pass_at_k: empty table");
  std::size_t hits = 0;
  for (const auto& inst : table.instances) {
    for (const auto& row : inst.samples) {
      if (any_correct(row)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(table.instances.size());
}

TeamReport decomposition(double p1, double p2, double team) {
  const double tol = 1e-9;
  for (double v : {p1, p2, team}) {
    if (!(v >= -tol && v <= 1.0 + tol)) {
      throw contract_error("decomposition: rates must lie in [0, 1]");
    }
  }
  if (team < std::max(p1, p2) - tol) {
    throw contract_error("decomposition: team rate below max(p1, p2)");
  }
  if (team > p1 + p2 + tol) {
    throw contract_error("decomposition: team rate above p1 + p2");
  }
  TeamReport r;
  r.p1 = p1;
  r.p2 = p2;
  r.team = team;
  r.p12 = p1 + p2 - team;
  r.exactly_one = team - r.p12;
  r.both_wrong = 1.0 - team;
  r.delta = team - std::max(p1, p2);
  r.bounds_ok = delta_bounds_ok(p1, p2, r.delta, tol);
  return r;
}

TeamReport decomposition_from_table(const CorrectnessTable& table) {
  table.validate();
  if (table.num_models != 2) {
    throw contract_error("decomposition_from_table: exactly two models required");
  }
  if (table.instances.empty()) {
    throw contract_error("decomposition_from_table: empty table");
  }
  std::size_t n1 = 0, n2 = 0, nteam = 0, nboth = 0;
  for (const auto& inst : table.instances) {
    bool a = any_correct(inst.samples[0]);
    bool b = any_correct(inst.samples[1]);
    n1 += a;
    n2 += b;
    nteam += a || b;
    nboth += a && b;
  }
  double n = static_cast<double>(table.instances.size());
  TeamReport r;
  r.p1 = static_cast<double>(n1) / n;
  r.p2 = static_cast<double>(n2) / n;
  r.team = static_cast<double>(nteam) / n;
  r.p12 = static_cast<double>(nboth) / n;
  r.exactly_one = static_cast<double>(nteam - nboth) / n;
  r.both_wrong = static_cast<double>(table.instances.size() - nteam) / n;
  r.delta = r.team - std::max(r.p1, r.p2);
  r.bounds_ok = delta_bounds_ok(r.p1, r.p2, r.delta, 1e-12);
  return r;
}

}  // namespace core
