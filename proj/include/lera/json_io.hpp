#pragma once

// JSON encodings for the domain types. Field names here are the external
// contract: dataset files, HTTP payloads and report files all use them.
// The no-insertion winner encodes as null; inside stage-2 traces the
// no-insertion choice appears as the literal "__phi__" entry.

#include <json.hpp>

#include "lera/core.hpp"

namespace lera {

using json = nlohmann::json;

// ---- Advertiser -------------------------------------------------------------

inline json to_json(const Advertiser& ad) {
  json j{{"id", ad.id},
         {"name", ad.name},
         {"category", ad.category},
         {"description", ad.description},
         {"bid", ad.bid}};
  if (ad.true_value) j["true_value"] = *ad.true_value;
  return j;
}

inline Advertiser advertiser_from_json(const json& j) {
  Advertiser ad;
  ad.id = j.at("id").get<std::string>();
  ad.name = j.value("name", std::string{});
  ad.category = j.value("category", std::string{});
  ad.description = j.at("description").get<std::string>();
  ad.bid = j.at("bid").get<double>();
  if (j.contains("true_value") && !j.at("true_value").is_null())
    ad.true_value = j.at("true_value").get<double>();
  return ad;
}

// ---- Query ------------------------------------------------------------------

inline json to_json(const Query& q) {
  json j{{"id", q.id}, {"text", q.text}};
  if (q.kind == QueryKind::multi_need) {
    j["target_categories"] = q.target_categories;
  } else {
    j["kind"] = to_string(q.kind);
    if (q.ground_truth_ad) j["ground_truth_ad"] = *q.ground_truth_ad;
  }
  return j;
}

inline Query query_from_json(const json& j) {
  Query q;
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  if (j.contains("target_categories")) {
    q.kind = QueryKind::multi_need;
    q.target_categories = j.at("target_categories").get<std::vector<std::string>>();
  } else {
    const auto kind = query_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw MechanismError("unknown query kind: " + j.at("kind").dump());
    q.kind = *kind;
    if (j.contains("ground_truth_ad") && !j.at("ground_truth_ad").is_null())
      q.ground_truth_ad = j.at("ground_truth_ad").get<std::string>();
  }
  return q;
}

// ---- MechanismConfig ----------------------------------------------------------

inline json to_json(const MechanismConfig& c) {
  return json{{"k_single", c.k_single},
              {"k_dynamic", c.k_dynamic},
              {"no_insertion_margin", c.no_insertion_margin},
              {"max_parts", c.max_parts},
              {"max_insertions", c.max_insertions},
              {"norm_floor", c.norm_floor},
              {"seed", c.seed},
              {"all_one_bids", c.all_one_bids}};
}

// Starts from `base` so partial objects act as overrides.
inline MechanismConfig mechanism_config_from_json(const json& j,
                                                  MechanismConfig base = {}) {
  MechanismConfig c = base;
  c.k_single = j.value("k_single", c.k_single);
  c.k_dynamic = j.value("k_dynamic", c.k_dynamic);
  c.no_insertion_margin = j.value("no_insertion_margin", c.no_insertion_margin);
  c.max_parts = j.value("max_parts", c.max_parts);
  c.max_insertions = j.value("max_insertions", c.max_insertions);
  c.norm_floor = j.value("norm_floor", c.norm_floor);
  c.seed = j.value("seed", c.seed);
  c.all_one_bids = j.value("all_one_bids", c.all_one_bids);
  return c;
}

// ---- CandidateSet / StageTwoResult -------------------------------------------

inline json to_json(const CandidateSet& cs) {
  return json{{"members", cs.members},
              {"raw_relevance", cs.raw_relevance},
              {"weighted_scores", cs.weighted_scores},
              {"entry_threshold", cs.entry_threshold},
              {"k", cs.k}};
}

inline CandidateSet candidate_set_from_json(const json& j) {
  CandidateSet cs;
  cs.members = j.at("members").get<std::vector<std::string>>();
  cs.raw_relevance = j.at("raw_relevance").get<std::map<std::string, double>>();
  cs.weighted_scores = j.at("weighted_scores").get<std::map<std::string, double>>();
  cs.entry_threshold = j.at("entry_threshold").get<double>();
  cs.k = j.at("k").get<int>();
  return cs;
}

inline json to_json(const StageTwoResult& r) {
  return json{{"choices", r.choices},
              {"raw_logits", r.raw_logits},
              {"relevance", r.relevance},
              {"weighted_scores", r.weighted_scores},
              {"winner", r.winner},
              {"runner_up_score", r.runner_up_score}};
}

inline StageTwoResult stage_two_from_json(const json& j) {
  StageTwoResult r;
  r.choices = j.at("choices").get<std::vector<std::string>>();
  r.raw_logits = j.at("raw_logits").get<std::vector<double>>();
  r.relevance = j.at("relevance").get<std::vector<double>>();
  r.weighted_scores = j.at("weighted_scores").get<std::vector<double>>();
  r.winner = j.at("winner").get<std::string>();
  r.runner_up_score = j.at("runner_up_score").get<double>();
  return r;
}

// ---- ScorerCalls / AuctionOutcome --------------------------------------------

inline json to_json(const ScorerCalls& c) {
  return json{{"embed_calls", c.embed_calls},
              {"keyword_calls", c.keyword_calls},
              {"logit_calls", c.logit_calls},
              {"logit_evals", c.logit_evals},
              {"generator_calls", c.generator_calls}};
}

inline ScorerCalls scorer_calls_from_json(const json& j) {
  ScorerCalls c;
  c.embed_calls = j.value("embed_calls", 0L);
  c.keyword_calls = j.value("keyword_calls", 0L);
  c.logit_calls = j.value("logit_calls", 0L);
  c.logit_evals = j.value("logit_evals", 0L);
  c.generator_calls = j.value("generator_calls", 0L);
  return c;
}

inline json to_json(const AuctionOutcome& out) {
  json trace;
  trace["stage1"] = out.stage1 ? to_json(*out.stage1) : json(nullptr);
  trace["stage2"] = out.stage2 ? to_json(*out.stage2) : json(nullptr);
  return json{{"winner", is_phi(out.winner) ? json(nullptr) : json(out.winner)},
              {"payment", out.payment ? json(*out.payment) : json(nullptr)},
              {"trace", trace},
              {"scorer_calls", to_json(out.scorer_calls)},
              {"elapsed_ms", out.elapsed_ms}};
}

inline AuctionOutcome auction_outcome_from_json(const json& j) {
  AuctionOutcome out;
  out.winner = j.at("winner").is_null() ? phi_id() : j.at("winner").get<std::string>();
  if (!j.at("payment").is_null()) out.payment = j.at("payment").get<double>();
  const auto& trace = j.at("trace");
  if (!trace.at("stage1").is_null()) out.stage1 = candidate_set_from_json(trace.at("stage1"));
  if (!trace.at("stage2").is_null()) out.stage2 = stage_two_from_json(trace.at("stage2"));
  out.scorer_calls = scorer_calls_from_json(j.at("scorer_calls"));
  out.elapsed_ms = j.at("elapsed_ms").get<double>();
  return out;
}

// ---- DialogueTranscript -------------------------------------------------------

inline json to_json(const DialogueTranscript& t) {
  json segments = json::array();
  for (const auto& seg : t.segments) {
    segments.push_back(
        json{{"text", seg.text},
             {"winner", is_phi(seg.decision.winner) ? json(nullptr)
                                                    : json(seg.decision.winner)},
             {"payment", seg.decision.payment ? json(*seg.decision.payment) : json(nullptr)},
             {"inserted", seg.inserted},
             {"decision", to_json(seg.decision)}});
  }
  return json{{"query_id", t.query.id},
              {"query", to_json(t.query)},
              {"segments", std::move(segments)},
              {"insertions_used", t.insertions_used},
              {"total_parts", t.total_parts},
              {"accrued_payments", t.accrued_payments},
              {"incomplete", t.incomplete}};
}

inline DialogueTranscript dialogue_transcript_from_json(const json& j) {
  DialogueTranscript t;
  t.query = query_from_json(j.at("query"));
  for (const auto& sj : j.at("segments")) {
    DialogueSegment seg;
    seg.text = sj.at("text").get<std::string>();
    seg.inserted = sj.at("inserted").get<bool>();
    seg.decision = auction_outcome_from_json(sj.at("decision"));
    t.segments.push_back(std::move(seg));
  }
  t.insertions_used = j.at("insertions_used").get<int>();
  t.total_parts = j.at("total_parts").get<int>();
  t.accrued_payments = j.at("accrued_payments").get<std::map<std::string, double>>();
  t.incomplete = j.value("incomplete", false);
  return t;
}

}  // namespace lera
