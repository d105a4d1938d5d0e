#pragma once

// Core domain types for the two-stage ad auction: advertisers, queries,
// per-stage score traces, auction outcomes and dialogue transcripts.
// All types are immutable values; nothing here touches a scorer or the wire.

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lera {

// Reserved sentinel for the no-insertion option. Never a valid advertiser id.
inline const std::string& phi_id() {
  static const std::string id = "__phi__";
  return id;
}

inline bool is_phi(const std::string& id) { return id == phi_id(); }

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

class MechanismError : public std::runtime_error {
 public:
  explicit MechanismError(const std::string& what) : std::runtime_error(what) {}
};

// A pluggable scorer (embedding / keyword / logit / generator) failed.
class ScorerError : public MechanismError {
 public:
  ScorerError(std::string scorer, const std::string& what)
      : MechanismError(scorer + ": " + what), scorer_name(std::move(scorer)) {}
  std::string scorer_name;
};

// Scorer or consistency failure surfaced through run_auction, annotated with
// the variant and stage it happened in.
class AuctionError : public MechanismError {
 public:
  AuctionError(std::string variant, std::string stage, const std::string& what,
               std::string scorer = "")
      : MechanismError("[" + variant + "/" + stage + "] " + what),
        variant_name(std::move(variant)),
        stage(std::move(stage)),
        scorer_name(std::move(scorer)) {}
  std::string variant_name;
  std::string stage;
  std::string scorer_name;  // non-empty when rooted in a ScorerError
};

// ----------------------------------------------------------------------------
// Domain types
// ----------------------------------------------------------------------------

struct Advertiser {
  std::string id;
  std::string name;
  std::string category;
  std::string description;            // public product description
  double bid = 1.0;                   // reported price-per-click, > 0
  std::optional<double> true_value;   // private value, simulation only

  bool operator==(const Advertiser&) const = default;
};

enum class QueryKind { complex_intent, intent_shift, negative_refinement, multi_need };

inline std::string to_string(QueryKind k) {
  switch (k) {
    case QueryKind::complex_intent: return "complex";
    case QueryKind::intent_shift: return "shift";
    case QueryKind::negative_refinement: return "negative";
    case QueryKind::multi_need: return "multi";
  }
  throw MechanismError("unreachable query kind");
}

inline std::optional<QueryKind> query_kind_from_string(std::string_view s) {
  if (s == "complex") return QueryKind::complex_intent;
  if (s == "shift") return QueryKind::intent_shift;
  if (s == "negative") return QueryKind::negative_refinement;
  if (s == "multi") return QueryKind::multi_need;
  return std::nullopt;
}

struct Query {
  std::string id;
  std::string text;
  QueryKind kind = QueryKind::complex_intent;
  std::optional<std::string> ground_truth_ad;     // single-ad benchmark only
  std::vector<std::string> target_categories;     // multi-need benchmark only

  bool operator==(const Query&) const = default;
};

// Stage 1 output: bid-weighted similarity ranking and the candidate set.
// Score maps cover the whole pool; `members` is the admitted top-k slice.
struct CandidateSet {
  std::vector<std::string> members;                // descending weighted score
  std::map<std::string, double> raw_relevance;     // id -> s1 in (0,1]
  std::map<std::string, double> weighted_scores;   // id -> s1 * bid
  double entry_threshold = 0.0;                    // (k+1)-th weighted score, 0 if pool <= k
  int k = 0;                                       // requested size

  bool operator==(const CandidateSet&) const = default;
};

// Stage 2 output: softmax relevance over candidates plus the no-insertion
// choice. The phi entry of `weighted_scores` already includes the
// no-insertion margin so winner and runner-up are re-derivable from the trace.
struct StageTwoResult {
  std::vector<std::string> choices;      // candidate ids ++ [phi]
  std::vector<double> raw_logits;        // aligned with choices
  std::vector<double> relevance;         // softmax of raw_logits
  std::vector<double> weighted_scores;   // relevance * bid, bid(phi) = 1 (+ margin)
  std::string winner;                    // advertiser id or phi
  double runner_up_score = 0.0;          // best weighted score among non-winners

  bool operator==(const StageTwoResult&) const = default;

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = std::find(choices.begin(), choices.end(), id);
    if (it == choices.end()) return std::nullopt;
    return static_cast<std::size_t>(it - choices.begin());
  }
};

struct ScorerCalls {
  long embed_calls = 0;
  long keyword_calls = 0;
  long logit_calls = 0;      // scorer invocations
  long logit_evals = 0;      // per-choice evaluations (parallel-prefill cost unit)
  long generator_calls = 0;

  ScorerCalls& operator+=(const ScorerCalls& o) {
    embed_calls += o.embed_calls;
    keyword_calls += o.keyword_calls;
    logit_calls += o.logit_calls;
    logit_evals += o.logit_evals;
    generator_calls += o.generator_calls;
    return *this;
  }
  bool operator==(const ScorerCalls&) const = default;
};

struct AuctionOutcome {
  std::string winner;                     // advertiser id or phi
  std::optional<double> payment;          // present iff winner != phi
  std::optional<CandidateSet> stage1;     // absent for llm_only
  std::optional<StageTwoResult> stage2;   // absent for embedding_only / keyword_match
  ScorerCalls scorer_calls;
  double elapsed_ms = 0.0;

  bool operator==(const AuctionOutcome&) const = default;
};

struct DialogueSegment {
  std::string text;
  AuctionOutcome decision;
  bool inserted = false;

  bool operator==(const DialogueSegment&) const = default;
};

struct DialogueTranscript {
  Query query;
  std::vector<DialogueSegment> segments;
  int insertions_used = 0;
  int total_parts = 0;
  std::map<std::string, double> accrued_payments;  // advertiser id -> total
  bool incomplete = false;                          // generator aborted mid-dialogue

  bool operator==(const DialogueTranscript&) const = default;
};

// Mechanism defaults mirror the inference settings the benchmark ships with.
struct MechanismConfig {
  int k_single = 5;
  int k_dynamic = 8;
  double no_insertion_margin = 0.0;
  int max_parts = 10;
  int max_insertions = 3;
  double norm_floor = 1e-6;
  long seed = 42;
  bool all_one_bids = false;

  bool operator==(const MechanismConfig&) const = default;
};

// ----------------------------------------------------------------------------
// Ranking order
// ----------------------------------------------------------------------------

// Strict ranking used everywhere a score ties must break deterministically:
// higher score first; on exact ties phi beats any advertiser (conservative
// non-insertion), then the lower id.
inline bool ranks_ahead(double score_a, const std::string& id_a,
                        double score_b, const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  const bool phi_a = is_phi(id_a);
  const bool phi_b = is_phi(id_b);
  if (phi_a != phi_b) return phi_a;
  return id_a < id_b;
}

// ----------------------------------------------------------------------------
// Instance validation
// ----------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline const Advertiser* find_advertiser(const std::vector<Advertiser>& pool,
                                         const std::string& id) {
  for (const auto& ad : pool)
    if (ad.id == id) return &ad;
  return nullptr;
}

inline bool is_single_ad_kind(QueryKind k) {
  return k == QueryKind::complex_intent || k == QueryKind::intent_shift ||
         k == QueryKind::negative_refinement;
}

inline void validate_pool(const std::vector<Advertiser>& pool, ValidationReport& report) {
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  if (pool.empty()) fail("advertiser pool is empty");
  std::map<std::string, int> seen;
  for (const auto& ad : pool) {
    if (ad.id.empty()) fail("advertiser id is empty");
    if (is_phi(ad.id)) fail("advertiser id is reserved: " + ad.id);
    if (++seen[ad.id] == 2) fail("duplicate id: " + ad.id);
    if (!(ad.bid > 0.0)) fail("bid must be positive: " + ad.id);
    if (ad.description.empty()) fail("description must be non-empty: " + ad.id);
    if (ad.true_value && !(*ad.true_value > 0.0))
      fail("true_value must be positive: " + ad.id);
  }
}

inline void validate_benchmark_query(const Query& query,
                                     const std::vector<Advertiser>& pool,
                                     ValidationReport& report) {
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  if (is_single_ad_kind(query.kind)) {
    if (!query.ground_truth_ad) {
      fail("missing ground_truth_ad for query " + query.id);
    } else if (!find_advertiser(pool, *query.ground_truth_ad)) {
      fail("ground_truth_ad not in pool for query " + query.id);
    }
  } else {
    if (query.target_categories.empty())
      fail("missing target_categories for query " + query.id);
  }
}

inline void validate_config(const MechanismConfig& config, ValidationReport& report) {
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  if (config.k_single < 1) fail("k_single must be positive");
  if (config.k_dynamic < 1) fail("k_dynamic must be positive");
  if (config.max_parts < 1) fail("max_parts must be positive");
  if (config.max_insertions < 1) fail("max_insertions must be positive");
  if (!(config.norm_floor > 0.0)) fail("norm_floor must be positive");
  if (config.no_insertion_margin < 0.0) fail("no_insertion_margin must be >= 0");
}

// Report-style check of a (pool, query, config) instance. Never throws.
inline ValidationReport validate_instance(const std::vector<Advertiser>& pool,
                                          const Query& query,
                                          const MechanismConfig& config) {
  ValidationReport report;
  validate_pool(pool, report);
  validate_benchmark_query(query, pool, report);
  validate_config(config, report);
  return report;
}

}  // namespace lera
