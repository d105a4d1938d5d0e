#pragma once

// Scoring contracts (embedding, keyword generation, logit ranking, segment
// generation) and the pure score math shared by every allocation variant.
//
// Contracts must be safe to call from multiple threads; implementations are
// expected to behave as pure functions of their inputs (plus construction
// seed). Remote implementations may serialize internally but present the
// same reentrant surface.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lera/core.hpp"

namespace lera {

// ----------------------------------------------------------------------------
// Contracts
// ----------------------------------------------------------------------------

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Unit-norm vector of fixed dimension, deterministic per implementation.
  virtual std::vector<double> embed(const std::string& text) const = 0;
  virtual std::size_t dimension() const = 0;
};

struct KeywordResult {
  std::vector<std::string> keywords;  // 2-3 entries on the happy path
  bool used_fallback = false;         // empty keywords => caller retrieves on raw query text
};

class KeywordGenerator {
 public:
  virtual ~KeywordGenerator() = default;
  virtual KeywordResult keywords(const std::string& query_text,
                                 const std::string& context_text) const = 0;
};

struct ChoiceCandidate {
  std::string id;
  std::string description;
};

class LogitScorer {
 public:
  virtual ~LogitScorer() = default;
  // Raw log-score per choice, aligned with `candidates`; when include_phi is
  // set the final entry scores the no-insertion option.
  virtual std::vector<double> score(const std::string& query_text,
                                    const std::string& context_text,
                                    const std::vector<ChoiceCandidate>& candidates,
                                    bool include_phi) const = 0;
};

struct GeneratedSegment {
  std::string text;
  bool is_end = false;
};

class SegmentGenerator {
 public:
  virtual ~SegmentGenerator() = default;
  virtual GeneratedSegment next_segment(const std::string& query_text,
                                        const std::string& prefix_text,
                                        const std::optional<Advertiser>& selected_ad) = 0;
};

// Everything run_auction needs. `baseline_noise` feeds the optional noise
// multiplier of the embedding-only baseline; unset means 1.0 for everyone.
struct ScorerBundle {
  std::shared_ptr<const EmbeddingProvider> embedder;
  std::shared_ptr<const KeywordGenerator> keywords;
  std::shared_ptr<const LogitScorer> logits;
  std::function<double(const Advertiser&)> baseline_noise;
};

// ----------------------------------------------------------------------------
// Score math
// ----------------------------------------------------------------------------

inline double cosine_similarity(const std::vector<double>& u,
                                const std::vector<double>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  if (u.empty()) throw std::invalid_argument("cosine_similarity: empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0)
    throw std::invalid_argument("cosine_similarity: zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// Affine map of a cosine in [-1,1] onto (0,1]: max(floor, (c+1)/2).
// The floor keeps the bid multiplier strictly positive. Inputs a hair outside
// [-1,1] from rounding are clamped; anything further is an error.
inline double normalize_similarity(double c, double floor_eps) {
  constexpr double kSlack = 1e-9;
  if (!(floor_eps > 0.0))
    throw std::invalid_argument("normalize_similarity: floor must be positive");
  if (!std::isfinite(c) || c < -1.0 - kSlack || c > 1.0 + kSlack)
    throw std::invalid_argument("normalize_similarity: cosine outside [-1,1]");
  c = std::clamp(c, -1.0, 1.0);
  return std::max(floor_eps, (c + 1.0) / 2.0);
}

// Max-shifted softmax; sums to 1 within 1e-9 and is invariant to a uniform
// shift of the logits.
inline std::vector<double> softmax(const std::vector<double>& z) {
  if (z.empty()) throw std::invalid_argument("softmax: empty input");
  double zmax = z[0];
  for (double x : z) {
    if (!std::isfinite(x)) throw std::invalid_argument("softmax: non-finite logit");
    zmax = std::max(zmax, x);
  }
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

// ----------------------------------------------------------------------------
// Text helpers shared by the mock scorers and the dialogue layer
// ----------------------------------------------------------------------------

// Lowercased alphanumeric runs. "SilentStorm Earbuds, ANC!" -> {silentstorm, earbuds, anc}
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace lera
