#pragma once

#include <memory>
#include <regex>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core/trace.hpp"

namespace core {

// L2-normalized non-negative term-frequency vector. norm holds the
// pre-normalization magnitude; norm == 0 flags a degenerate (empty) text.
struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;
  bool all_zero() const { return norm == 0.0; }
};

using OpSignatureSet = std::set<std::string>;

struct DistanceConfig {
  double lambda_emb = 0.6;
  double lambda_struct = 0.4;
};

// Feature-hashed unigram+bigram term frequencies over lowercased
// alphanumeric tokens, hashed with FNV-1a into a fixed number of buckets.
class HashedEmbedder {
 public:
  explicit HashedEmbedder(int dimension = 256);
  EmbeddingVector embed(const std::string& text) const;
  int dimension() const { return dimension_; }

 private:
  int dimension_;
};

// 0 if either vector is all-zero; otherwise the dot product (inputs are
// unit length, so this is the cosine). Non-negative under the default
// provider because components are non-negative.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// |a ∩ b| / |a ∪ b|, with Jaccard(∅, ∅) = 1.
double jaccard_similarity(const OpSignatureSet& a, const OpSignatureSet& b);

// Maps trace text to the set of operation signatures whose trigger pattern
// matches anywhere, case-insensitively. The default table pins 14 names;
// entries can be overridden or extended through the run configuration.
class SignatureExtractor {
 public:
  SignatureExtractor();  // default trigger table
  explicit SignatureExtractor(
      const std::vector<std::pair<std::string, std::string>>& triggers);
  OpSignatureSet extract(const std::string& text) const;
  std::vector<std::string> vocabulary() const;

  static std::vector<std::pair<std::string, std::string>> default_triggers();

 private:
  std::vector<std::pair<std::string, std::regex>> compiled_;
};

struct TraceFeatures {
  std::string text;
  EmbeddingVector embedding;
  OpSignatureSet ops;
};

// Embeds and extracts once per distinct text; cached, safe to share across
// worker threads, and behaviorally identical to no cache at all.
class Featurizer {
 public:
  Featurizer();
  Featurizer(HashedEmbedder embedder, SignatureExtractor extractor);

  std::shared_ptr<const TraceFeatures> features(const std::string& text) const;

  static const Featurizer& shared_default();

 private:
  HashedEmbedder embedder_;
  SignatureExtractor extractor_;
  mutable std::shared_mutex mu_;
  mutable std::unordered_map<std::string, std::shared_ptr<const TraceFeatures>> cache_;
};

// lambda_emb * (1 - cos) + lambda_struct * (1 - jaccard), clamped to [0, 1].
// Identical texts are distance 0 by definition, which also covers the
// degenerate all-zero-vs-all-zero corner.
double hybrid_distance(const TraceFeatures& a, const TraceFeatures& b,
                       const DistanceConfig& cfg);
double hybrid_distance(const Trace& a, const Trace& b, const DistanceConfig& cfg);

}  // namespace core
