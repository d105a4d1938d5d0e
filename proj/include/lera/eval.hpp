#pragma once

// Benchmark metrics: single-ad selection accuracy, multi-ad category
// coverage, and the top-k ablation runner. Reports carry no timing fields so
// equal inputs produce byte-identical JSON.

#include <functional>
#include <set>

#include "lera/dataset.hpp"
#include "lera/dialogue.hpp"

namespace lera::eval {

// ----------------------------------------------------------------------------
// Accuracy
// ----------------------------------------------------------------------------

struct QueryTrace {
  std::string query_id;
  std::string winner;  // advertiser id or phi
  bool correct = false;
  std::string error;  // auction error text; counted as incorrect
};

struct AccuracyReport {
  std::string variant;
  std::map<std::string, double> per_kind;  // "complex"/"shift"/"negative" -> fraction
  double overall = 0.0;                    // pooled ratio over all single queries
  std::vector<QueryTrace> trace;
};

// A scorer bundle may depend on the query (the oracle scorer needs the
// query's ground truth); plain bundles are lifted via the overload below.
using BundleForQuery = std::function<ScorerBundle(const Query&)>;

inline BundleForQuery fixed_bundle(ScorerBundle bundle) {
  return [bundle = std::move(bundle)](const Query&) { return bundle; };
}

// Per-query oracle bundles: the logit scorer always knows the right answer,
// so accuracy isolates whether stage 1 let the right answer through.
inline BundleForQuery oracle_bundle(const ScorerBundle& base) {
  return [base](const Query& q) {
    ScorerBundle b = base;
    b.logits = mocks::oracle_logit_scorer(q.ground_truth_ad.value_or(""));
    return b;
  };
}

// Winner == ground truth counts as correct; the no-insertion outcome, a wrong
// ad, or an auction error all count as incorrect.
inline AccuracyReport eval_single_accuracy(const Dataset& dataset, Variant variant,
                                           const MechanismConfig& config,
                                           const BundleForQuery& bundle_for_query) {
  if (dataset.single_queries.empty())
    throw MechanismError("eval_single_accuracy: no single-ad queries");

  AccuracyReport report;
  report.variant = to_string(variant);
  std::map<std::string, std::pair<long, long>> per_kind;  // kind -> (correct, total)
  long correct_total = 0;

  for (const auto& query : dataset.single_queries) {
    QueryTrace t;
    t.query_id = query.id;
    try {
      const auto out = run_auction(variant, query, dataset.pool, config,
                                   bundle_for_query(query));
      t.winner = out.winner;
      t.correct = (out.winner == *query.ground_truth_ad);
    } catch (const MechanismError& e) {
      t.winner = phi_id();
      t.correct = false;
      t.error = e.what();
    }
    auto& bucket = per_kind[to_string(query.kind)];
    bucket.second += 1;
    if (t.correct) {
      bucket.first += 1;
      ++correct_total;
    }
    report.trace.push_back(std::move(t));
  }

  for (const auto& [kind, counts] : per_kind)
    report.per_kind[kind] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
  report.overall = static_cast<double>(correct_total) /
                   static_cast<double>(dataset.single_queries.size());
  return report;
}

inline AccuracyReport eval_single_accuracy(const Dataset& dataset, Variant variant,
                                           const MechanismConfig& config,
                                           const ScorerBundle& bundle) {
  return eval_single_accuracy(dataset, variant, config, fixed_bundle(bundle));
}

// ----------------------------------------------------------------------------
// Coverage
// ----------------------------------------------------------------------------

// |distinct selected categories ∩ targets| / |targets|
inline double coverage_fraction(const std::vector<std::string>& selected_categories,
                                const std::vector<std::string>& target_categories) {
  if (target_categories.empty())
    throw std::invalid_argument("coverage_fraction: no target categories");
  const std::set<std::string> targets(target_categories.begin(), target_categories.end());
  const std::set<std::string> selected(selected_categories.begin(),
                                       selected_categories.end());
  long hit = 0;
  for (const auto& t : targets) hit += selected.count(t) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(targets.size());
}

struct CoverageEntry {
  std::string query_id;
  double coverage = 0.0;
  std::vector<std::string> selected_categories;  // one per inserted ad, in order
  int insertions_used = 0;
  bool incomplete = false;
};

struct CoverageReport {
  std::string variant;
  std::vector<CoverageEntry> per_query;
  double mean_coverage = 0.0;
};

// Dialogues need a fresh generator per query (generators are stateful).
using GeneratorFactory = std::function<std::unique_ptr<SegmentGenerator>(const Query&)>;

inline GeneratorFactory scripted_generator_factory(std::vector<std::string> script) {
  return [script = std::move(script)](const Query&) {
    return mocks::mock_segment_generator(script);
  };
}

inline std::vector<std::string> default_dialogue_script(int parts = 6) {
  std::vector<std::string> script;
  for (int i = 1; i <= parts; ++i)
    script.push_back("Segment " + std::to_string(i) + " of the reply.");
  script.push_back("END");
  return script;
}

inline CoverageReport eval_multi_coverage(const Dataset& dataset, Variant variant,
                                          const MechanismConfig& config,
                                          const ScorerBundle& bundle,
                                          const GeneratorFactory& make_generator) {
  if (dataset.multi_queries.empty())
    throw MechanismError("eval_multi_coverage: no multi-ad queries");

  CoverageReport report;
  report.variant = to_string(variant);
  double sum = 0.0;
  for (const auto& query : dataset.multi_queries) {
    auto generator = make_generator(query);
    const auto transcript =
        run_dialogue(query, dataset.pool, config, bundle, *generator, variant);
    CoverageEntry entry;
    entry.query_id = query.id;
    entry.selected_categories = inserted_categories(transcript, dataset.pool);
    entry.coverage = coverage_fraction(entry.selected_categories, query.target_categories);
    entry.insertions_used = transcript.insertions_used;
    entry.incomplete = transcript.incomplete;
    sum += entry.coverage;
    report.per_query.push_back(std::move(entry));
  }
  report.mean_coverage = sum / static_cast<double>(dataset.multi_queries.size());
  return report;
}

// ----------------------------------------------------------------------------
// Report JSON
// ----------------------------------------------------------------------------

inline json to_json(const AccuracyReport& r) {
  json trace = json::array();
  for (const auto& t : r.trace) {
    json entry{{"query_id", t.query_id},
               {"winner", is_phi(t.winner) ? json(nullptr) : json(t.winner)},
               {"correct", t.correct}};
    if (!t.error.empty()) entry["error"] = t.error;
    trace.push_back(std::move(entry));
  }
  return json{{"variant", r.variant},
              {"per_kind", r.per_kind},
              {"overall", r.overall},
              {"trace", std::move(trace)}};
}

inline json to_json(const CoverageReport& r) {
  json per_query = json::array();
  for (const auto& e : r.per_query) {
    json entry{{"query_id", e.query_id},
               {"coverage", e.coverage},
               {"selected_categories", e.selected_categories},
               {"insertions_used", e.insertions_used}};
    if (e.incomplete) entry["incomplete"] = true;
    per_query.push_back(std::move(entry));
  }
  return json{{"variant", r.variant},
              {"per_query", std::move(per_query)},
              {"mean_coverage", r.mean_coverage}};
}

}  // namespace lera::eval
