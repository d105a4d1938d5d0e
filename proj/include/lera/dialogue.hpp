#pragma once

// Segmented dialogue orchestration: one auction per segment, a hard insertion
// budget, and context-aware retrieval so the mechanism stops re-selling
// categories it has already covered.

#include "lera/auction.hpp"

namespace lera {

namespace detail {

inline AuctionOutcome forced_no_insertion() {
  AuctionOutcome out;
  out.winner = phi_id();
  return out;
}

}  // namespace detail

// Runs up to config.max_parts segments. Before each segment an auction is
// held with k = k_dynamic and the concatenated prefix as context; once
// max_insertions ads are placed the decision is forced to no-insertion
// without touching any scorer. A generator failure aborts with the partial
// transcript flagged incomplete.
inline DialogueTranscript run_dialogue(const Query& query,
                                       const std::vector<Advertiser>& pool,
                                       const MechanismConfig& config,
                                       const ScorerBundle& scorers,
                                       SegmentGenerator& generator, Variant variant) {
  if (config.max_parts < 1) throw MechanismError("run_dialogue: max_parts must be >= 1");
  if (config.max_insertions < 1)
    throw MechanismError("run_dialogue: max_insertions must be >= 1");

  DialogueTranscript transcript;
  transcript.query = query;
  std::string context;

  for (int part = 0; part < config.max_parts; ++part) {
    AuctionOutcome decision;
    if (transcript.insertions_used < config.max_insertions) {
      decision = run_auction(variant, query, pool, config, scorers, context,
                             config.k_dynamic);
    } else {
      decision = detail::forced_no_insertion();
    }

    std::optional<Advertiser> selected;
    if (!is_phi(decision.winner)) {
      const Advertiser* ad = find_advertiser(pool, decision.winner);
      if (!ad)
        throw MechanismError("run_dialogue: winner not in pool: " + decision.winner);
      selected = *ad;
    }

    GeneratedSegment segment;
    try {
      segment = generator.next_segment(query.text, context, selected);
    } catch (const std::exception&) {
      transcript.incomplete = true;
      break;
    }

    DialogueSegment entry;
    entry.text = segment.text;
    entry.decision = std::move(decision);
    entry.inserted = selected.has_value();
    if (entry.inserted) {
      transcript.insertions_used += 1;
      transcript.accrued_payments[entry.decision.winner] +=
          entry.decision.payment.value_or(0.0);
    }
    transcript.segments.push_back(std::move(entry));

    if (!context.empty()) context += "\n";
    context += transcript.segments.back().text;

    transcript.total_parts = static_cast<int>(transcript.segments.size());
    if (segment.is_end) break;
  }

  transcript.total_parts = static_cast<int>(transcript.segments.size());
  return transcript;
}

// Transcript-level coverage of requested categories by inserted ads.
inline std::vector<std::string> inserted_categories(const DialogueTranscript& transcript,
                                                    const std::vector<Advertiser>& pool) {
  std::vector<std::string> cats;
  for (const auto& seg : transcript.segments) {
    if (!seg.inserted) continue;
    if (const Advertiser* ad = find_advertiser(pool, seg.decision.winner))
      cats.push_back(ad->category);
  }
  return cats;
}

}  // namespace lera
