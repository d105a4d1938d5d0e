#pragma once

// Single-ad mechanism: coarse bid-weighted similarity filtering (stage 1),
// softmax-over-logits fine ranking against a no-insertion option (stage 2),
// critical-value payment, and the comparison variants used by the benchmark.

#include <chrono>

#include "lera/core.hpp"
#include "lera/scoring.hpp"

namespace lera {

enum class Variant { lera, embedding_only, llm_only, keyword_match, cosine_llm };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::lera: return "lera";
    case Variant::embedding_only: return "embedding_only";
    case Variant::llm_only: return "llm_only";
    case Variant::keyword_match: return "keyword_match";
    case Variant::cosine_llm: return "cosine_llm";
  }
  throw MechanismError("unreachable variant");
}

inline std::optional<Variant> variant_from_string(std::string_view s) {
  if (s == "lera") return Variant::lera;
  if (s == "embedding_only") return Variant::embedding_only;
  if (s == "llm_only") return Variant::llm_only;
  if (s == "keyword_match") return Variant::keyword_match;
  if (s == "cosine_llm") return Variant::cosine_llm;
  return std::nullopt;
}

inline const std::vector<std::string>& all_variant_names() {
  static const std::vector<std::string> names = {
      "lera", "embedding_only", "llm_only", "keyword_match", "cosine_llm"};
  return names;
}

// ----------------------------------------------------------------------------
// Stage 1: coarse filtering
// ----------------------------------------------------------------------------

// s1_i = normalize(cos(embed(retrieval_text), embed(d_i))); members are the
// top-k by s1_i * bid_i; entry_threshold is the score a (k+1)-th bidder would
// have to beat, 0 when the whole pool fits.
inline CandidateSet stage1_filter(const std::string& retrieval_text,
                                  const std::vector<Advertiser>& pool, int k,
                                  const EmbeddingProvider& embedder,
                                  double floor_eps) {
  if (pool.empty()) throw MechanismError("stage1_filter: empty advertiser pool");
  if (k < 1) throw MechanismError("stage1_filter: k must be >= 1");

  const auto query_vec = embedder.embed(retrieval_text);
  CandidateSet cs;
  cs.k = k;

  std::vector<std::pair<double, std::string>> ranked;  // (weighted score, id)
  ranked.reserve(pool.size());
  for (const auto& ad : pool) {
    const double c = cosine_similarity(query_vec, embedder.embed(ad.description));
    const double s1 = normalize_similarity(c, floor_eps);
    const double weighted = s1 * ad.bid;
    cs.raw_relevance[ad.id] = s1;
    cs.weighted_scores[ad.id] = weighted;
    ranked.emplace_back(weighted, ad.id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return ranks_ahead(a.first, a.second, b.first, b.second);
  });

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  for (std::size_t i = 0; i < take; ++i) cs.members.push_back(ranked[i].second);
  cs.entry_threshold = ranked.size() > static_cast<std::size_t>(k)
                           ? ranked[static_cast<std::size_t>(k)].first
                           : 0.0;
  return cs;
}

// ----------------------------------------------------------------------------
// Stage 2: fine ranking
// ----------------------------------------------------------------------------

// Softmax over scorer logits for (candidates ++ phi); weighted score is
// relevance * bid with bid(phi) = 1, and phi's entry additionally carries the
// no-insertion margin so the stored trace is exactly what the winner rule saw.
inline StageTwoResult stage2_rank(const std::string& query_text,
                                  const std::string& context_text,
                                  const std::vector<std::string>& candidate_ids,
                                  const std::vector<Advertiser>& pool,
                                  const LogitScorer& scorer, double margin) {
  if (candidate_ids.empty()) throw MechanismError("stage2_rank: no candidates");

  std::vector<ChoiceCandidate> candidates;
  candidates.reserve(candidate_ids.size());
  std::vector<double> bids;
  for (const auto& id : candidate_ids) {
    const Advertiser* ad = find_advertiser(pool, id);
    if (!ad) throw MechanismError("stage2_rank: candidate not in pool: " + id);
    candidates.push_back({ad->id, ad->description});
    bids.push_back(ad->bid);
  }

  const auto z = scorer.score(query_text, context_text, candidates, /*include_phi=*/true);
  if (z.size() != candidate_ids.size() + 1)
    throw ScorerError("logit_scorer", "output length mismatch: got " +
                                          std::to_string(z.size()) + ", want " +
                                          std::to_string(candidate_ids.size() + 1));

  StageTwoResult r;
  r.choices = candidate_ids;
  r.choices.push_back(phi_id());
  r.raw_logits = z;
  r.relevance = softmax(z);
  r.weighted_scores.resize(r.choices.size());
  for (std::size_t i = 0; i < candidate_ids.size(); ++i)
    r.weighted_scores[i] = r.relevance[i] * bids[i];
  r.weighted_scores.back() = r.relevance.back() * 1.0 + margin;

  std::size_t best = 0;
  for (std::size_t i = 1; i < r.choices.size(); ++i) {
    if (ranks_ahead(r.weighted_scores[i], r.choices[i], r.weighted_scores[best],
                    r.choices[best]))
      best = i;
  }
  r.winner = r.choices[best];
  double runner_up = 0.0;
  bool have_runner_up = false;
  for (std::size_t i = 0; i < r.choices.size(); ++i) {
    if (i == best) continue;
    if (!have_runner_up || r.weighted_scores[i] > runner_up) {
      runner_up = r.weighted_scores[i];
      have_runner_up = true;
    }
  }
  r.runner_up_score = have_runner_up ? runner_up : 0.0;
  return r;
}

inline StageTwoResult stage2_rank(const std::string& query_text,
                                  const std::string& context_text,
                                  const CandidateSet& candidates,
                                  const std::vector<Advertiser>& pool,
                                  const LogitScorer& scorer, double margin) {
  return stage2_rank(query_text, context_text, candidates.members, pool, scorer, margin);
}

// ----------------------------------------------------------------------------
// Payment
// ----------------------------------------------------------------------------

// Minimum bid that keeps the winner winning: enough to enter the stage-1
// top-k AND to beat the stage-2 runner-up (which includes phi).
inline double critical_value_payment(const CandidateSet& stage1,
                                     const StageTwoResult& stage2,
                                     const std::string& winner) {
  if (is_phi(winner))
    throw MechanismError("critical_value_payment: no payment for the no-insertion outcome");
  if (std::find(stage1.members.begin(), stage1.members.end(), winner) ==
      stage1.members.end())
    throw MechanismError("critical_value_payment: winner missing from stage 1: " + winner);
  if (stage2.winner != winner)
    throw MechanismError("critical_value_payment: winner missing from stage 2: " + winner);

  const double s1 = stage1.raw_relevance.at(winner);
  const auto idx = stage2.index_of(winner);
  const double s2 = stage2.relevance.at(*idx);
  return std::max(stage1.entry_threshold / s1, stage2.runner_up_score / s2);
}

// ----------------------------------------------------------------------------
// run_auction
// ----------------------------------------------------------------------------

namespace detail {

inline std::string retrieval_text_from_keywords(const KeywordResult& kw,
                                                const Query& query) {
  return kw.keywords.empty() ? query.text : join(kw.keywords, " ");
}

// Whole-pool similarity ranking used by the decoupled baseline; optional
// per-advertiser noise multiplies the relevance before bid weighting.
inline CandidateSet baseline_ranking(const std::string& text,
                                     const std::vector<Advertiser>& pool,
                                     const ScorerBundle& scorers, double floor_eps) {
  const auto query_vec = scorers.embedder->embed(text);
  CandidateSet cs;
  cs.k = static_cast<int>(pool.size());
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(pool.size());
  for (const auto& ad : pool) {
    const double c = cosine_similarity(query_vec, scorers.embedder->embed(ad.description));
    const double noise = scorers.baseline_noise ? scorers.baseline_noise(ad) : 1.0;
    const double s = normalize_similarity(c, floor_eps) * noise;
    const double weighted = s * ad.bid;
    cs.raw_relevance[ad.id] = s;
    cs.weighted_scores[ad.id] = weighted;
    ranked.emplace_back(weighted, ad.id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return ranks_ahead(a.first, a.second, b.first, b.second);
  });
  for (const auto& [score, id] : ranked) cs.members.push_back(id);
  cs.entry_threshold = 0.0;
  return cs;
}

// Classical second-price ratio on a score map: max_{j != winner} s_j b_j / s_w.
inline double second_price_payment(const CandidateSet& ranking, const std::string& winner) {
  double best_other = 0.0;
  bool have_other = false;
  for (const auto& [id, weighted] : ranking.weighted_scores) {
    if (id == winner) continue;
    if (!have_other || weighted > best_other) {
      best_other = weighted;
      have_other = true;
    }
  }
  if (!have_other) return 0.0;  // no competitor
  return best_other / ranking.raw_relevance.at(winner);
}

}  // namespace detail

// Runs one auction for `query` under `variant`. `context_text` is the
// dialogue prefix (empty for single-turn); `k_override` replaces
// config.k_single when positive (the dialogue loop passes k_dynamic).
inline AuctionOutcome run_auction(Variant variant, const Query& query,
                                  const std::vector<Advertiser>& pool,
                                  const MechanismConfig& config,
                                  const ScorerBundle& scorers,
                                  const std::string& context_text = "",
                                  int k_override = 0) {
  const auto started = std::chrono::steady_clock::now();
  const int k = k_override > 0 ? k_override : config.k_single;
  AuctionOutcome out;
  std::string stage = "setup";

  const bool needs_retrieval = variant != Variant::llm_only;
  const bool needs_keywords =
      variant == Variant::lera || variant == Variant::keyword_match;
  const bool needs_logits = variant == Variant::lera || variant == Variant::llm_only ||
                            variant == Variant::cosine_llm;
  if (needs_retrieval && !scorers.embedder)
    throw AuctionError(to_string(variant), stage, "scorer bundle has no embedder");
  if (needs_keywords && !scorers.keywords)
    throw AuctionError(to_string(variant), stage, "scorer bundle has no keyword generator");
  if (needs_logits && !scorers.logits)
    throw AuctionError(to_string(variant), stage, "scorer bundle has no logit scorer");

  try {
    switch (variant) {
      case Variant::lera: {
        stage = "keywords";
        const auto kw = scorers.keywords->keywords(query.text, context_text);
        out.scorer_calls.keyword_calls += 1;
        stage = "stage1";
        out.stage1 = stage1_filter(detail::retrieval_text_from_keywords(kw, query), pool,
                                   k, *scorers.embedder, config.norm_floor);
        out.scorer_calls.embed_calls += 1 + static_cast<long>(pool.size());
        stage = "stage2";
        out.stage2 = stage2_rank(query.text, context_text, *out.stage1, pool,
                                 *scorers.logits, config.no_insertion_margin);
        out.scorer_calls.logit_calls += 1;
        out.scorer_calls.logit_evals += static_cast<long>(out.stage1->members.size()) + 1;
        out.winner = out.stage2->winner;
        stage = "payment";
        if (!is_phi(out.winner))
          out.payment = critical_value_payment(*out.stage1, *out.stage2, out.winner);
        break;
      }
      case Variant::embedding_only: {
        stage = "stage1";
        out.stage1 = detail::baseline_ranking(query.text, pool, scorers, config.norm_floor);
        out.scorer_calls.embed_calls += 1 + static_cast<long>(pool.size());
        out.winner = out.stage1->members.front();
        stage = "payment";
        out.payment = detail::second_price_payment(*out.stage1, out.winner);
        break;
      }
      case Variant::llm_only: {
        stage = "stage2";
        std::vector<std::string> everyone;
        everyone.reserve(pool.size());
        for (const auto& ad : pool) everyone.push_back(ad.id);
        if (everyone.empty()) throw MechanismError("empty advertiser pool");
        out.stage2 = stage2_rank(query.text, context_text, everyone, pool,
                                 *scorers.logits, config.no_insertion_margin);
        out.scorer_calls.logit_calls += 1;
        out.scorer_calls.logit_evals += static_cast<long>(everyone.size()) + 1;
        out.winner = out.stage2->winner;
        stage = "payment";
        if (!is_phi(out.winner)) {
          const auto idx = out.stage2->index_of(out.winner);
          out.payment = out.stage2->runner_up_score / out.stage2->relevance.at(*idx);
        }
        break;
      }
      case Variant::keyword_match: {
        stage = "keywords";
        const auto kw = scorers.keywords->keywords(query.text, context_text);
        out.scorer_calls.keyword_calls += 1;
        stage = "stage1";
        out.stage1 = stage1_filter(detail::retrieval_text_from_keywords(kw, query), pool,
                                   k, *scorers.embedder, config.norm_floor);
        out.scorer_calls.embed_calls += 1 + static_cast<long>(pool.size());
        out.winner = out.stage1->members.front();
        stage = "payment";
        out.payment = detail::second_price_payment(*out.stage1, out.winner);
        break;
      }
      case Variant::cosine_llm: {
        stage = "stage1";
        out.stage1 = stage1_filter(query.text, pool, k, *scorers.embedder,
                                   config.norm_floor);
        out.scorer_calls.embed_calls += 1 + static_cast<long>(pool.size());
        stage = "stage2";
        out.stage2 = stage2_rank(query.text, context_text, *out.stage1, pool,
                                 *scorers.logits, config.no_insertion_margin);
        out.scorer_calls.logit_calls += 1;
        out.scorer_calls.logit_evals += static_cast<long>(out.stage1->members.size()) + 1;
        out.winner = out.stage2->winner;
        stage = "payment";
        if (!is_phi(out.winner))
          out.payment = critical_value_payment(*out.stage1, *out.stage2, out.winner);
        break;
      }
    }
  } catch (const AuctionError&) {
    throw;
  } catch (const ScorerError& e) {
    throw AuctionError(to_string(variant), stage, e.what(), e.scorer_name);
  } catch (const std::exception& e) {
    throw AuctionError(to_string(variant), stage, e.what());
  }

  // A stage-2 winner that stage 1 never admitted means the engine is broken;
  // surface it instead of repairing.
  if (out.stage1 && out.stage2 && !is_phi(out.winner) &&
      std::find(out.stage1->members.begin(), out.stage1->members.end(), out.winner) ==
          out.stage1->members.end()) {
    throw AuctionError(to_string(variant), "consistency",
                       "stage-2 winner not a stage-1 member: " + out.winner);
  }

  out.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return out;
}

}  // namespace lera
