#pragma once

// Concurrency benchmark and top-k ablation. Real model latency needs real
// endpoints; this harness instead charges a configurable per-evaluation delay
// so call-count effects (K+1 vs N+1 prefills) show up in wall-clock numbers.

#include <atomic>
#include <mutex>
#include <numeric>
#include <thread>

#include "lera/eval.hpp"

namespace lera::eval {

struct DelayModel {
  double per_logit_eval_ms = 0.0;   // charged per evaluated choice
  double per_keyword_call_ms = 0.0;  // charged per keyword generation call
};

inline ScorerBundle with_delays(ScorerBundle bundle, const DelayModel& delay) {
  if (delay.per_logit_eval_ms > 0.0)
    bundle.logits =
        std::make_shared<mocks::DelayedLogitScorer>(bundle.logits, delay.per_logit_eval_ms);
  if (delay.per_keyword_call_ms > 0.0 && bundle.keywords)
    bundle.keywords = std::make_shared<mocks::DelayedKeywordGenerator>(
        bundle.keywords, delay.per_keyword_call_ms);
  return bundle;
}

inline ScorerCalls transcript_scorer_calls(const DialogueTranscript& t) {
  ScorerCalls calls;
  for (const auto& seg : t.segments) calls += seg.decision.scorer_calls;
  calls.generator_calls += t.total_parts;
  return calls;
}

inline long count_tokens(const std::string& text) {
  return static_cast<long>(tokenize(text).size());
}

struct BenchOptions {
  DelayModel delay;
  int script_parts = 4;    // segments per dialogue before END
  int jobs_per_level = 0;  // 0 => max(2 * level, 8)
};

struct BenchLevel {
  int concurrency = 1;
  int jobs = 0;
  double mean_latency_ms = 0.0;
  double wall_ms = 0.0;
  long tokens = 0;
  double throughput_tokens_per_s = 0.0;
  ScorerCalls scorer_calls;
};

struct BenchReport {
  std::string variant;
  std::vector<BenchLevel> levels;
};

// Drives concurrent dialogue streams at each concurrency level. Latency is
// per-dialogue wall time including every auction; throughput counts the
// scripted tokens the mock generator produced.
inline BenchReport bench_throughput(const Dataset& dataset, Variant variant,
                                    const MechanismConfig& config,
                                    const ScorerBundle& bundle,
                                    const std::vector<int>& concurrency_levels,
                                    const BenchOptions& options = {}) {
  if (concurrency_levels.empty())
    throw std::invalid_argument("bench_throughput: no concurrency levels");
  for (int level : concurrency_levels)
    if (level < 1 || level > 16)
      throw std::invalid_argument("bench_throughput: concurrency level outside 1..16");
  if (dataset.single_queries.empty())
    throw MechanismError("bench_throughput: no queries to drive");

  const ScorerBundle delayed = with_delays(bundle, options.delay);
  const auto script = default_dialogue_script(options.script_parts);

  BenchReport report;
  report.variant = to_string(variant);

  for (int level : concurrency_levels) {
    const int jobs = options.jobs_per_level > 0 ? options.jobs_per_level
                                                : std::max(2 * level, 8);
    std::vector<double> latencies(static_cast<std::size_t>(jobs), 0.0);
    std::vector<long> tokens(static_cast<std::size_t>(jobs), 0);
    std::vector<ScorerCalls> calls(static_cast<std::size_t>(jobs));
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= jobs) return;
        try {
          const auto& query =
              dataset.single_queries[static_cast<std::size_t>(i) %
                                     dataset.single_queries.size()];
          mocks::ScriptedSegmentGenerator generator(script);
          const auto begin = std::chrono::steady_clock::now();
          const auto transcript =
              run_dialogue(query, dataset.pool, config, delayed, generator, variant);
          latencies[static_cast<std::size_t>(i)] =
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                        begin)
                  .count();
          long t = 0;
          for (const auto& seg : transcript.segments) t += count_tokens(seg.text);
          tokens[static_cast<std::size_t>(i)] = t;
          calls[static_cast<std::size_t>(i)] = transcript_scorer_calls(transcript);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };

    const auto wall_begin = std::chrono::steady_clock::now();
    std::vector<std::thread> threads;
    for (int w = 0; w < level; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    const double wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - wall_begin)
                               .count();

    BenchLevel entry;
    entry.concurrency = level;
    entry.jobs = jobs;
    entry.mean_latency_ms =
        std::accumulate(latencies.begin(), latencies.end(), 0.0) / jobs;
    entry.wall_ms = wall_ms;
    entry.tokens = std::accumulate(tokens.begin(), tokens.end(), 0L);
    entry.throughput_tokens_per_s =
        wall_ms > 0.0 ? static_cast<double>(entry.tokens) / (wall_ms / 1000.0) : 0.0;
    for (const auto& c : calls) entry.scorer_calls += c;
    report.levels.push_back(std::move(entry));
  }
  return report;
}

// ----------------------------------------------------------------------------
// Top-k ablation
// ----------------------------------------------------------------------------

struct AblationRow {
  int k = 0;
  double accuracy = 0.0;
  double coverage = 0.0;
  double throughput_tokens_per_s = 0.0;
};

struct AblationTable {
  std::string variant;
  std::vector<AblationRow> rows;
};

// Re-runs accuracy (k_single := k), coverage (k_dynamic := k) and a one-level
// throughput measurement per candidate-set size.
inline AblationTable topk_ablation(const Dataset& dataset, Variant variant,
                                   const MechanismConfig& base_config,
                                   const BundleForQuery& accuracy_bundle,
                                   const ScorerBundle& bundle,
                                   const std::vector<int>& k_values,
                                   const BenchOptions& bench_options = {},
                                   int bench_level = 8) {
  if (k_values.empty()) throw std::invalid_argument("topk_ablation: no k values");
  AblationTable table;
  table.variant = to_string(variant);
  for (int k : k_values) {
    MechanismConfig config = base_config;
    config.k_single = k;
    config.k_dynamic = k;
    AblationRow row;
    row.k = k;
    row.accuracy = eval_single_accuracy(dataset, variant, config, accuracy_bundle).overall;
    if (!dataset.multi_queries.empty())
      row.coverage = eval_multi_coverage(dataset, variant, config, bundle,
                                         scripted_generator_factory(
                                             default_dialogue_script(
                                                 bench_options.script_parts)))
                         .mean_coverage;
    row.throughput_tokens_per_s =
        bench_throughput(dataset, variant, config, bundle, {bench_level}, bench_options)
            .levels.front()
            .throughput_tokens_per_s;
    table.rows.push_back(row);
  }
  return table;
}

// ----------------------------------------------------------------------------
// Report JSON / CSV
// ----------------------------------------------------------------------------

inline json to_json(const BenchReport& r) {
  json levels = json::array();
  for (const auto& l : r.levels)
    levels.push_back(json{{"concurrency", l.concurrency},
                          {"jobs", l.jobs},
                          {"mean_latency_ms", l.mean_latency_ms},
                          {"wall_ms", l.wall_ms},
                          {"tokens", l.tokens},
                          {"throughput_tokens_per_s", l.throughput_tokens_per_s},
                          {"scorer_calls", lera::to_json(l.scorer_calls)}});
  return json{{"variant", r.variant}, {"levels", std::move(levels)}};
}

inline json to_json(const AblationTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back(json{{"k", r.k},
                        {"accuracy", r.accuracy},
                        {"coverage", r.coverage},
                        {"throughput_tokens_per_s", r.throughput_tokens_per_s}});
  return json{{"variant", t.variant}, {"rows", std::move(rows)}};
}

inline std::string to_csv(const AblationTable& t) {
  std::string csv = "k,accuracy,coverage,throughput_tokens_per_s\n";
  for (const auto& r : t.rows) {
    csv += std::to_string(r.k) + "," + std::to_string(r.accuracy) + "," +
           std::to_string(r.coverage) + "," +
           std::to_string(r.throughput_tokens_per_s) + "\n";
  }
  return csv;
}

}  // namespace lera::eval
