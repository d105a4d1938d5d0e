#pragma once

// Deterministic in-process scorers. Every mock is a pure function of its
// inputs and construction seed, which is what makes the mechanism's
// incentive properties checkable by brute force.

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

#include "lera/scoring.hpp"

namespace lera::mocks {

// ----------------------------------------------------------------------------
// Hashing primitives
// ----------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ----------------------------------------------------------------------------
// Mock embedding
// ----------------------------------------------------------------------------

// Sum of per-token pseudo-random unit directions, L2-normalized. Texts that
// share tokens land close; token repetition raises the shared component, so
// fixture descriptions repeat their category label to separate categories.
inline std::vector<double> mock_embed(const std::string& text, std::size_t dim,
                                      std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("mock_embed: dim must be >= 2");
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.push_back("");  // keep empty text well-defined

  std::vector<double> acc(dim, 0.0);
  for (const auto& token : tokens) {
    std::uint64_t state = splitmix64(fnv1a(token) ^ splitmix64(seed));
    std::vector<double> tv(dim);
    double norm2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      state = splitmix64(state);
      // uniform in [-1, 1)
      tv[d] = static_cast<double>(static_cast<std::int64_t>(state >> 11)) /
                  static_cast<double>(1LL << 52) -
              1.0;
      norm2 += tv[d] * tv[d];
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += tv[d] * inv;
  }

  double norm2 = 0.0;
  for (double x : acc) norm2 += x * x;
  if (norm2 == 0.0) {  // cancellation is possible in principle; re-seed once
    return mock_embed(text + " ", dim, seed + 1);
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : acc) x *= inv;
  return acc;
}

class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(std::size_t dim = 64, std::uint64_t seed = 42)
      : dim_(dim), seed_(seed) {}

  std::vector<double> embed(const std::string& text) const override {
    return mock_embed(text, dim_, seed_);
  }
  std::size_t dimension() const override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Thread-safe memoization around any deterministic provider. Grid sweeps in
// the verification oracle re-embed the same handful of texts millions of
// times; this keeps those runs inside their time budget.
class CachingEmbedder : public EmbeddingProvider {
 public:
  explicit CachingEmbedder(std::shared_ptr<const EmbeddingProvider> inner)
      : inner_(std::move(inner)) {}

  std::vector<double> embed(const std::string& text) const override {
    {
      std::shared_lock lock(mutex_);
      auto it = cache_.find(text);
      if (it != cache_.end()) return it->second;
    }
    auto vec = inner_->embed(text);
    std::unique_lock lock(mutex_);
    return cache_.emplace(text, std::move(vec)).first->second;
  }
  std::size_t dimension() const override { return inner_->dimension(); }

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

// Exact preset vectors keyed by text; unit tests use this to pin cosines.
class FixedEmbedder : public EmbeddingProvider {
 public:
  FixedEmbedder(std::size_t dim, std::map<std::string, std::vector<double>> vectors)
      : dim_(dim), vectors_(std::move(vectors)) {}

  std::vector<double> embed(const std::string& text) const override {
    auto it = vectors_.find(text);
    if (it == vectors_.end())
      throw ScorerError("mock_embedder", "no fixed vector for text: " + text);
    return it->second;
  }
  std::size_t dimension() const override { return dim_; }

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<double>> vectors_;
};

// ----------------------------------------------------------------------------
// Mock keyword generation
// ----------------------------------------------------------------------------

// category label -> trigger tokens matched in the query text
using Lexicon = std::map<std::string, std::vector<std::string>>;

// Extracts up to three category labels whose triggers fire in the query,
// skipping categories whose label already appears in the context (so a
// dialogue does not keep retrieving what it has already covered). Pads with
// the top match to reach two; with no match at all, falls back to generic
// query tokens.
class LexiconKeywordGenerator : public KeywordGenerator {
 public:
  explicit LexiconKeywordGenerator(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

  KeywordResult keywords(const std::string& query_text,
                         const std::string& context_text) const override {
    const auto query_tokens = tokenize(query_text);
    const auto context_tokens = tokenize(context_text);
    auto in_context = [&](const std::string& label) {
      for (const auto& part : tokenize(label)) {
        if (std::find(context_tokens.begin(), context_tokens.end(), part) ==
            context_tokens.end())
          return false;
      }
      return true;
    };

    struct Match {
      std::string label;
      int hits = 0;
      std::size_t first_pos = 0;
    };
    std::vector<Match> matches;
    for (const auto& [label, triggers] : lexicon_) {
      Match m{label, 0, query_tokens.size()};
      auto count_token = [&](const std::string& t) {
        for (std::size_t i = 0; i < query_tokens.size(); ++i) {
          if (query_tokens[i] == t) {
            ++m.hits;
            m.first_pos = std::min(m.first_pos, i);
          }
        }
      };
      for (const auto& trig : triggers) count_token(trig);
      for (const auto& part : tokenize(label)) count_token(part);
      if (m.hits > 0 && !in_context(label)) matches.push_back(std::move(m));
    }
    std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
      if (a.hits != b.hits) return a.hits > b.hits;
      if (a.first_pos != b.first_pos) return a.first_pos < b.first_pos;
      return a.label < b.label;
    });

    KeywordResult out;
    for (const auto& m : matches) {
      if (out.keywords.size() == 3) break;
      out.keywords.push_back(m.label);
    }
    if (out.keywords.empty()) {
      // No lexicon match: generic tokens from the query.
      out.used_fallback = true;
      for (const auto& t : query_tokens) {
        if (t.size() >= 4 &&
            std::find(out.keywords.begin(), out.keywords.end(), t) == out.keywords.end())
          out.keywords.push_back(t);
        if (out.keywords.size() == 2) break;
      }
      for (const auto& t : query_tokens) {
        if (out.keywords.size() >= 2) break;
        if (std::find(out.keywords.begin(), out.keywords.end(), t) == out.keywords.end())
          out.keywords.push_back(t);
      }
      while (out.keywords.size() < 2) out.keywords.push_back("general");
    }
    while (out.keywords.size() < 2) out.keywords.push_back(out.keywords.front());
    return out;
  }

 private:
  Lexicon lexicon_;
};

// ----------------------------------------------------------------------------
// Mock logit scorers
// ----------------------------------------------------------------------------

// Perfect-information double: +10 on the ground-truth candidate, -10 on
// everything else; when the ground truth is absent the no-insertion choice
// gets the +10 instead.
class OracleLogitScorer : public LogitScorer {
 public:
  explicit OracleLogitScorer(std::string ground_truth_id)
      : ground_truth_id_(std::move(ground_truth_id)) {}

  std::vector<double> score(const std::string&, const std::string&,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    bool found = false;
    std::vector<double> z;
    z.reserve(candidates.size() + (include_phi ? 1 : 0));
    for (const auto& c : candidates) {
      const bool hit = (c.id == ground_truth_id_);
      found = found || hit;
      z.push_back(hit ? 10.0 : -10.0);
    }
    if (include_phi) z.push_back(found ? -10.0 : 10.0);
    return z;
  }

 private:
  std::string ground_truth_id_;
};

inline std::shared_ptr<const LogitScorer> oracle_logit_scorer(std::string ground_truth_id) {
  return std::make_shared<OracleLogitScorer>(std::move(ground_truth_id));
}

// Deterministic content-based scorer: logit = scale * cosine between the
// query embedding and the candidate description embedding. The logits never
// see bids, which is the premise the payment rule's incentive guarantee
// rests on. Best suited to short texts; hash-noise in the mock embedding
// grows toward 1/sqrt(dim) for long ones.
class EmbeddingLogitScorer : public LogitScorer {
 public:
  EmbeddingLogitScorer(std::shared_ptr<const EmbeddingProvider> embedder,
                       double scale = 8.0, double phi_logit = 0.0)
      : embedder_(std::move(embedder)), scale_(scale), phi_logit_(phi_logit) {}

  std::vector<double> score(const std::string& query_text, const std::string&,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    const auto qv = embedder_->embed(query_text);
    std::vector<double> z;
    z.reserve(candidates.size() + (include_phi ? 1 : 0));
    for (const auto& c : candidates)
      z.push_back(scale_ * cosine_similarity(qv, embedder_->embed(c.description)));
    if (include_phi) z.push_back(phi_logit_);
    return z;
  }

 private:
  std::shared_ptr<const EmbeddingProvider> embedder_;
  double scale_;
  double phi_logit_;
};

// Instruction-following ranker double for dialogue runs. Relevance is the
// count of distinctive query tokens found in the description (scaled by
// description length), and a candidate whose description shares distinctive
// tokens with already-generated context is penalized per shared token, the
// way the ranking instructions tell a real model to avoid duplicating
// products and categories it has already covered.
class TokenOverlapLogitScorer : public LogitScorer {
 public:
  explicit TokenOverlapLogitScorer(double scale = 6.0, double phi_logit = 0.0,
                                   double repeat_penalty = 8.0)
      : scale_(scale), phi_logit_(phi_logit), repeat_penalty_(repeat_penalty) {}

  std::vector<double> score(const std::string& query_text,
                            const std::string& context_text,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    const auto probe = distinctive_tokens(query_text);
    const auto context = distinctive_tokens(context_text);
    std::vector<double> z;
    z.reserve(candidates.size() + (include_phi ? 1 : 0));
    for (const auto& c : candidates) {
      const auto desc = distinctive_tokens(c.description);
      long hits = 0;
      long repeats = 0;
      for (const auto& t : desc) {
        if (probe.count(t)) ++hits;
        if (context.count(t)) ++repeats;
      }
      const double relevance =
          static_cast<double>(hits) / std::sqrt(1.0 + static_cast<double>(desc.size()));
      z.push_back(scale_ * relevance - repeat_penalty_ * static_cast<double>(repeats));
    }
    if (include_phi) z.push_back(phi_logit_);
    return z;
  }

  static std::set<std::string> distinctive_tokens(const std::string& text) {
    static const std::set<std::string> stopwords = {
        "the", "and", "for", "with", "that", "this", "from", "into", "over",
        "her", "his", "she", "has", "had", "was", "are", "but", "not", "now",
        "all", "any", "out", "its", "our", "your", "you", "can", "will",
        "they", "them", "one", "two", "too", "very", "just", "like", "some",
        "more", "when", "what", "who", "how", "would", "could", "need",
        "want", "get", "gets", "also"};
    std::set<std::string> out;
    for (auto& t : tokenize(text))
      if (t.size() >= 3 && !stopwords.count(t)) out.insert(std::move(t));
    return out;
  }

 private:
  double scale_;
  double phi_logit_;
  double repeat_penalty_;
};

// Replays a preset logit vector; choice count must match.
class FixedLogitScorer : public LogitScorer {
 public:
  explicit FixedLogitScorer(std::vector<double> logits) : logits_(std::move(logits)) {}

  std::vector<double> score(const std::string&, const std::string&,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    const std::size_t want = candidates.size() + (include_phi ? 1 : 0);
    if (logits_.size() != want)
      throw ScorerError("fixed_logit_scorer", "preset length does not match choice count");
    return logits_;
  }

 private:
  std::vector<double> logits_;
};

// Constant logit for every advertiser, a lower one for phi: always favors
// inserting something. Used to exercise insertion-budget limits.
class InsertionEagerScorer : public LogitScorer {
 public:
  std::vector<double> score(const std::string&, const std::string&,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    std::vector<double> z(candidates.size(), 5.0);
    if (include_phi) z.push_back(-5.0);
    return z;
  }
};

// ----------------------------------------------------------------------------
// Mock segment generation
// ----------------------------------------------------------------------------

// Replays a fixed script. A supplied ad is acknowledged with an "[AD:<id>]"
// marker so the dialogue context carries evidence of what was inserted.
// Signals the end on the last entry, or early on the literal entry "END".
class ScriptedSegmentGenerator : public SegmentGenerator {
 public:
  explicit ScriptedSegmentGenerator(std::vector<std::string> script)
      : script_(std::move(script)) {
    if (script_.empty()) throw std::invalid_argument("script must be non-empty");
  }

  GeneratedSegment next_segment(const std::string&, const std::string&,
                                const std::optional<Advertiser>& selected_ad) override {
    if (index_ >= script_.size()) return {"", true};
    const std::string& entry = script_[index_++];
    if (entry == "END") return {"", true};
    GeneratedSegment seg;
    seg.text = entry;
    if (selected_ad) seg.text += " [AD:" + selected_ad->id + "]";
    seg.is_end = (index_ == script_.size());
    return seg;
  }

 private:
  std::vector<std::string> script_;
  std::size_t index_ = 0;
};

inline std::unique_ptr<SegmentGenerator> mock_segment_generator(
    std::vector<std::string> script) {
  return std::make_unique<ScriptedSegmentGenerator>(std::move(script));
}

// ----------------------------------------------------------------------------
// Bundles
// ----------------------------------------------------------------------------

// Fully deterministic bundle: cached mock embeddings, lexicon keywords, and a
// content-based logit scorer whose scores never see bids.
inline ScorerBundle make_mock_bundle(const Lexicon& lexicon, std::uint64_t seed = 42,
                                     std::size_t dim = 64, double logit_scale = 8.0,
                                     double phi_logit = 0.0) {
  ScorerBundle bundle;
  auto embedder = std::make_shared<CachingEmbedder>(
      std::make_shared<MockEmbeddingProvider>(dim, seed));
  bundle.embedder = embedder;
  bundle.keywords = std::make_shared<LexiconKeywordGenerator>(lexicon);
  bundle.logits = std::make_shared<EmbeddingLogitScorer>(embedder, logit_scale, phi_logit);
  return bundle;
}

// Same retrieval path, but the fine ranker is the overlap-based dialogue
// double that avoids re-covering what the context already mentions.
inline ScorerBundle make_overlap_bundle(const Lexicon& lexicon, std::uint64_t seed = 42,
                                        std::size_t dim = 64, double logit_scale = 6.0,
                                        double phi_logit = 0.0,
                                        double repeat_penalty = 8.0) {
  ScorerBundle bundle = make_mock_bundle(lexicon, seed, dim);
  bundle.logits =
      std::make_shared<TokenOverlapLogitScorer>(logit_scale, phi_logit, repeat_penalty);
  return bundle;
}

// Per-advertiser noise multiplier for the embedding-only baseline:
// 1 + amplitude * u with u drawn deterministically from (seed, id) in [-1, 1).
inline std::function<double(const Advertiser&)> make_uniform_noise(std::uint64_t seed,
                                                                   double amplitude) {
  return [seed, amplitude](const Advertiser& ad) {
    const std::uint64_t h = splitmix64(fnv1a(ad.id) ^ splitmix64(seed));
    const double u =
        static_cast<double>(static_cast<std::int64_t>(h >> 11)) /
            static_cast<double>(1LL << 52) -
        1.0;
    return 1.0 + amplitude * u;
  };
}

// ----------------------------------------------------------------------------
// Latency-model decorators (benchmark harness)
// ----------------------------------------------------------------------------

// Charges a fixed cost per evaluated choice, modeling prefill cost growing
// with the candidate count on a logprob endpoint.
class DelayedLogitScorer : public LogitScorer {
 public:
  DelayedLogitScorer(std::shared_ptr<const LogitScorer> inner, double per_eval_ms)
      : inner_(std::move(inner)), per_eval_ms_(per_eval_ms) {}

  std::vector<double> score(const std::string& query_text,
                            const std::string& context_text,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    auto z = inner_->score(query_text, context_text, candidates, include_phi);
    const double ms = per_eval_ms_ * static_cast<double>(z.size());
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
    return z;
  }

 private:
  std::shared_ptr<const LogitScorer> inner_;
  double per_eval_ms_;
};

class DelayedKeywordGenerator : public KeywordGenerator {
 public:
  DelayedKeywordGenerator(std::shared_ptr<const KeywordGenerator> inner, double per_call_ms)
      : inner_(std::move(inner)), per_call_ms_(per_call_ms) {}

  KeywordResult keywords(const std::string& query_text,
                         const std::string& context_text) const override {
    auto out = inner_->keywords(query_text, context_text);
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(per_call_ms_));
    return out;
  }

 private:
  std::shared_ptr<const KeywordGenerator> inner_;
  double per_call_ms_;
};

}  // namespace lera::mocks
