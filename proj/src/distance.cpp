#include "core/distance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace core {

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

HashedEmbedder::HashedEmbedder(int dimension) : dimension_(dimension) {
  if (dimension < 1) throw config_error("embedding dimension must be >= 1");
}

EmbeddingVector HashedEmbedder::embed(const std::string& text) const {
  EmbeddingVector v;
  v.values.assign(static_cast<std::size_t>(dimension_), 0.0);
  auto tokens = tokenize_lower(text);
  auto bump = [&](const std::string& feature) {
    v.values[fnv1a64(feature) % static_cast<std::uint64_t>(dimension_)] += 1.0;
  };
  for (const auto& t : tokens) bump(t);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) bump(tokens[i] + "_" + tokens[i + 1]);
  double sq = 0.0;
  for (double x : v.values) sq += x * x;
  v.norm = std::sqrt(sq);
  if (v.norm > 0.0) {
    for (double& x : v.values) x /= v.norm;
  }
  return v;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.all_zero() || b.all_zero()) return 0.0;
  if (a.values.size() != b.values.size()) {
    throw contract_error("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot;
}

double jaccard_similarity(const OpSignatureSet& a, const OpSignatureSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::pair<std::string, std::string>> SignatureExtractor::default_triggers() {
  return {
      {"add", R"(\b(add(s|ed|ing)?|addition|plus|sum(s|med|ming)?)\b)"},
      {"subtract", R"(\b(subtract(s|ed|ing)?|subtraction|minus|difference)\b)"},
      {"multiply", R"(\b(multipl(y|ies|ied|ying|ication)|times|product)\b)"},
      {"divide", R"(\b(divid(e|es|ed|ing)|division|quotient)\b)"},
      {"simplify", R"(\bsimplif(y|ies|ied|ying|ication)\b)"},
      {"substitute", R"(\bsubstitut(e|es|ed|ing|ion)\b)"},
      {"factor", R"(\bfactor(s|ed|ing|ization)?\b)"},
      {"expand", R"(\b(expand(s|ed|ing)?|expansion)\b)"},
      {"case_analysis", R"(case(s)?\b|consider .* cases)"},
      {"inequality", R"(\b(inequalit(y|ies)|greater than|less than|at least|at most)\b)"},
      {"modular", R"(\b(modul(o|ar|us)|mod|remainder|congruent)\b)"},
      {"equation_setup", R"(\bequations?\b|let\s+\w+\s+(be|denote)|set\s+up)"},
      {"percent", R"(%|\bpercent(age)?s?\b)"},
      {"elimination", R"(\beliminat(e|es|ed|ing|ion)\b)"},
  };
}

SignatureExtractor::SignatureExtractor() : SignatureExtractor(default_triggers()) {}

SignatureExtractor::SignatureExtractor(
    const std::vector<std::pair<std::string, std::string>>& triggers) {
  for (const auto& [name, pattern] : triggers) {
    try {
      compiled_.emplace_back(name,
                             std::regex(pattern, std::regex::icase | std::regex::ECMAScript));
    } catch (const std::regex_error& e) {
      throw config_error("bad trigger pattern for '" + name + "': " + e.what());
    }
  }
}

OpSignatureSet SignatureExtractor::extract(const std::string& text) const {
  OpSignatureSet out;
  for (const auto& [name, re] : compiled_) {
    if (std::regex_search(text, re)) out.insert(name);
  }
  return out;
}

std::vector<std::string> SignatureExtractor::vocabulary() const {
  std::vector<std::string> names;
  names.reserve(compiled_.size());
  for (const auto& [name, re] : compiled_) names.push_back(name);
  return names;
}

Featurizer::Featurizer() : embedder_(256), extractor_() {}

Featurizer::Featurizer(HashedEmbedder embedder, SignatureExtractor extractor)
    : embedder_(std::move(embedder)), extractor_(std::move(extractor)) {}

std::shared_ptr<const TraceFeatures> Featurizer::features(const std::string& text) const {
  {
    std::shared_lock lock(mu_);
    auto it = cache_.find(text);
    if (it != cache_.end()) return it->second;
  }
  auto f = std::make_shared<TraceFeatures>();
  f->text = text;
  f->embedding = embedder_.embed(text);
  f->ops = extractor_.extract(text);
  std::unique_lock lock(mu_);
  auto [it, inserted] = cache_.emplace(text, std::move(f));
  return it->second;
}

const Featurizer& Featurizer::shared_default() {
  static const Featurizer instance;
  return instance;
}

double hybrid_distance(const TraceFeatures& a, const TraceFeatures& b,
                       const DistanceConfig& cfg) {
  if (a.text == b.text) return 0.0;
  double cos = cosine_similarity(a.embedding, b.embedding);
  double jac = jaccard_similarity(a.ops, b.ops);
  double d = cfg.lambda_emb * (1.0 - cos) + cfg.lambda_struct * (1.0 - jac);
  return std::clamp(d, 0.0, 1.0);
}

double hybrid_distance(const Trace& a, const Trace& b, const DistanceConfig& cfg) {
  const auto& feat = Featurizer::shared_default();
  return hybrid_distance(*feat.features(a.text), *feat.features(b.text), cfg);
}

}  // namespace core
