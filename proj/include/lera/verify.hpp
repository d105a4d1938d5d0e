#pragma once

// Brute-force verification of the payment rule and its incentive claims.
// Everything here goes through the public run_auction surface only, never
// the internal score math, so it stays an independent check on the engine.

#include <atomic>
#include <mutex>
#include <random>
#include <thread>

#include "lera/auction.hpp"
#include "lera/json_io.hpp"
#include "lera/mocks.hpp"

namespace lera::verify {

struct BidGrid {
  double b_max = 10.0;
  double delta = 0.01;
};

inline std::vector<double> grid_points(const BidGrid& grid) {
  if (!(grid.delta > 0.0)) throw std::invalid_argument("grid delta must be positive");
  std::vector<double> points;
  for (long i = 1;; ++i) {
    const double b = static_cast<double>(i) * grid.delta;
    if (b > grid.b_max + 1e-12) break;
    points.push_back(b);
  }
  if (points.empty()) throw std::invalid_argument("empty bid grid");
  return points;
}

// Copy of the pool with one bid replaced; the unit of every grid sweep.
inline std::vector<Advertiser> with_bid(std::vector<Advertiser> pool,
                                        const std::string& id, double bid) {
  for (auto& ad : pool) {
    if (ad.id == id) {
      ad.bid = bid;
      return pool;
    }
  }
  throw MechanismError("advertiser not in pool: " + id);
}

namespace detail {

inline bool same_outcome(const AuctionOutcome& a, const AuctionOutcome& b) {
  return a.winner == b.winner && a.payment == b.payment && a.stage1 == b.stage1 &&
         a.stage2 == b.stage2;
}

// Two identical auctions must agree; anything else means a scorer broke the
// determinism contract and every grid conclusion would be garbage.
inline void require_deterministic(Variant variant, const Query& query,
                                  const std::vector<Advertiser>& pool,
                                  const MechanismConfig& config,
                                  const ScorerBundle& scorers) {
  const auto a = run_auction(variant, query, pool, config, scorers);
  const auto b = run_auction(variant, query, pool, config, scorers);
  if (!same_outcome(a, b))
    throw MechanismError("non-deterministic scorer detected: identical calls disagree");
}

// Evaluates fn(points[i]) for every grid index on a small worker pool;
// results come back indexed, so reports never depend on scheduling.
template <typename T, typename Fn>
std::vector<T> map_grid(const std::vector<double>& points, Fn&& fn) {
  std::vector<T> results(points.size());
  const unsigned workers =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(points.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < points.size(); ++i) results[i] = fn(points[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        results[i] = fn(points[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace detail

// ----------------------------------------------------------------------------
// critical_bid_oracle
// ----------------------------------------------------------------------------

struct GridOutcome {
  double bid = 0.0;
  bool wins = false;
  std::optional<double> payment;
};

struct OracleResult {
  std::optional<double> minimal_winning_bid;
  bool non_contiguous_win_set = false;  // allocation non-monotone on the grid
  long wins_on_grid = 0;
  std::vector<GridOutcome> per_bid;  // filled when keep_trace is set
};

// Re-runs the full mechanism at every grid bid, holding all other bids fixed,
// and reports the smallest bid at which `advertiser_id` wins.
inline OracleResult critical_bid_oracle(Variant variant, const Query& query,
                                        const std::vector<Advertiser>& pool,
                                        const MechanismConfig& config,
                                        const ScorerBundle& scorers,
                                        const std::string& advertiser_id,
                                        const BidGrid& grid, bool keep_trace = false) {
  detail::require_deterministic(variant, query, pool, config, scorers);
  const auto points = grid_points(grid);
  auto outcomes = detail::map_grid<GridOutcome>(points, [&](double b) {
    const auto out =
        run_auction(variant, query, with_bid(pool, advertiser_id, b), config, scorers);
    GridOutcome g;
    g.bid = b;
    g.wins = (out.winner == advertiser_id);
    if (g.wins) g.payment = out.payment;
    return g;
  });

  OracleResult result;
  for (const auto& g : outcomes) {
    if (g.wins) {
      ++result.wins_on_grid;
      if (!result.minimal_winning_bid) result.minimal_winning_bid = g.bid;
    } else if (result.minimal_winning_bid) {
      result.non_contiguous_win_set = true;
    }
  }
  if (keep_trace) result.per_bid = std::move(outcomes);
  return result;
}

// ----------------------------------------------------------------------------
// ic_dominance_check
// ----------------------------------------------------------------------------

struct ICViolation {
  double bid = 0.0;
  double utility = 0.0;
};

struct ICReport {
  double truthful_utility = 0.0;
  bool truthful_wins = false;
  std::vector<ICViolation> violations;  // bids strictly better than truthful
  double max_regret = 0.0;
};

// Checks that no grid deviation beats truthful bidding, in the regime where
// the candidate set cannot depend on the bid (pool size <= k). Utility is
// (true_value - payment) * click_prob on a win, 0 otherwise.
inline ICReport ic_dominance_check(const Query& query,
                                   const std::vector<Advertiser>& pool,
                                   const MechanismConfig& config,
                                   const ScorerBundle& scorers,
                                   const std::string& advertiser_id, double true_value,
                                   double click_prob, const BidGrid& grid,
                                   Variant variant = Variant::lera) {
  if (pool.size() > static_cast<std::size_t>(config.k_single))
    throw std::invalid_argument(
        "ic_dominance_check: pool must fit the candidate set (pool <= k)");
  detail::require_deterministic(variant, query, pool, config, scorers);

  auto utility_at = [&](double bid) {
    const auto out =
        run_auction(variant, query, with_bid(pool, advertiser_id, bid), config, scorers);
    if (out.winner != advertiser_id) return std::pair{0.0, false};
    return std::pair{(true_value - out.payment.value_or(0.0)) * click_prob, true};
  };

  ICReport report;
  const auto truthful = utility_at(true_value);
  report.truthful_utility = truthful.first;
  report.truthful_wins = truthful.second;

  const auto points = grid_points(grid);
  const auto utilities =
      detail::map_grid<double>(points, [&](double b) { return utility_at(b).first; });
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double regret = utilities[i] - report.truthful_utility;
    report.max_regret = std::max(report.max_regret, regret);
    if (regret > 1e-9) report.violations.push_back({points[i], utilities[i]});
  }
  report.max_regret = std::max(report.max_regret, 0.0);
  return report;
}

// ----------------------------------------------------------------------------
// composition_sensitivity_probe
// ----------------------------------------------------------------------------

struct ProbeBidTrace {
  double bid = 0.0;
  bool in_topk = false;
  std::string winner;
  std::optional<double> payment;
  std::map<std::string, double> stage2_relevance;  // by choice id, phi included
};

struct RecompositionEvent {
  double bid = 0.0;           // first bid of the new composition
  std::string kind;           // "entered_topk" | "left_topk" | "membership_shift"
  double max_s2_shift = 0.0;  // largest relevance move among surviving choices
};

struct PaymentDiscrepancy {
  double bid = 0.0;
  double closed_form = 0.0;
  double oracle_minimal = 0.0;
};

struct ProbeReport {
  std::vector<ProbeBidTrace> per_bid;
  std::vector<RecompositionEvent> recomposition_events;
  std::vector<PaymentDiscrepancy> payment_discrepancies;
  bool non_monotonic_allocation = false;

  bool has_findings() const {
    return !recomposition_events.empty() || !payment_discrepancies.empty() ||
           non_monotonic_allocation;
  }
};

// Sweeps the bid grid looking for the pool > k effect where the probed
// advertiser's bid changes WHO its stage-2 competitors are. Candidate-set
// changes and closed-form/oracle payment gaps are recorded as findings: they
// are the documented behavior of a two-stage auction, not engine bugs. With
// pool <= k the composition cannot change and the log comes back empty.
inline ProbeReport composition_sensitivity_probe(const Query& query,
                                                 const std::vector<Advertiser>& pool,
                                                 const MechanismConfig& config,
                                                 const ScorerBundle& scorers,
                                                 const std::string& advertiser_id,
                                                 const BidGrid& grid,
                                                 Variant variant = Variant::lera) {
  detail::require_deterministic(variant, query, pool, config, scorers);

  const auto points = grid_points(grid);
  ProbeReport report;
  report.per_bid = detail::map_grid<ProbeBidTrace>(points, [&](double b) {
    const auto out =
        run_auction(variant, query, with_bid(pool, advertiser_id, b), config, scorers);
    ProbeBidTrace t;
    t.bid = b;
    if (out.stage1)
      t.in_topk = std::find(out.stage1->members.begin(), out.stage1->members.end(),
                            advertiser_id) != out.stage1->members.end();
    t.winner = out.winner;
    if (out.winner == advertiser_id) t.payment = out.payment;
    if (out.stage2)
      for (std::size_t i = 0; i < out.stage2->choices.size(); ++i)
        t.stage2_relevance[out.stage2->choices[i]] = out.stage2->relevance[i];
    return t;
  });

  std::optional<double> minimal_win;
  bool lost_after_win = false;
  for (const auto& t : report.per_bid) {
    if (t.winner == advertiser_id) {
      if (!minimal_win) minimal_win = t.bid;
    } else if (minimal_win) {
      lost_after_win = true;
    }
  }
  report.non_monotonic_allocation = lost_after_win;

  for (std::size_t i = 1; i < report.per_bid.size(); ++i) {
    const auto& prev = report.per_bid[i - 1];
    const auto& cur = report.per_bid[i];
    const bool membership_changed = [&] {
      if (prev.in_topk != cur.in_topk) return true;
      // Same admission status but a different surviving choice set also
      // counts: the probed bid displaced somebody else.
      if (prev.stage2_relevance.size() != cur.stage2_relevance.size()) return true;
      for (const auto& [id, rel] : prev.stage2_relevance)
        if (!cur.stage2_relevance.count(id)) return true;
      return false;
    }();
    if (!membership_changed) continue;

    RecompositionEvent ev;
    ev.bid = cur.bid;
    ev.kind = prev.in_topk == cur.in_topk ? "membership_shift"
              : cur.in_topk              ? "entered_topk"
                                         : "left_topk";
    for (const auto& [id, rel] : cur.stage2_relevance) {
      auto it = prev.stage2_relevance.find(id);
      if (it != prev.stage2_relevance.end())
        ev.max_s2_shift = std::max(ev.max_s2_shift, std::abs(rel - it->second));
    }
    report.recomposition_events.push_back(ev);
  }

  if (minimal_win) {
    for (const auto& t : report.per_bid) {
      if (t.winner != advertiser_id || !t.payment) continue;
      if (std::abs(*t.payment - *minimal_win) > grid.delta)
        report.payment_discrepancies.push_back({t.bid, *t.payment, *minimal_win});
    }
  }
  return report;
}

// ----------------------------------------------------------------------------
// Seeded random instances for the pool <= K regime
// ----------------------------------------------------------------------------

struct ICInstance {
  std::vector<Advertiser> pool;
  Query query;
  std::string advertiser_id;  // the strategic bidder under test
  double true_value = 1.0;
  double click_prob = 1.0;
};

namespace detail {

struct VocabCategory {
  const char* label;
  std::vector<const char*> triggers;
};

inline const std::vector<VocabCategory>& instance_vocab() {
  static const std::vector<VocabCategory> vocab = {
      {"snacks", {"chips", "popcorn", "pretzels", "granola"}},
      {"beverages", {"coffee", "tea", "matcha", "kombucha"}},
      {"electronics", {"earbuds", "charger", "speaker", "keyboard"}},
      {"outerwear", {"jacket", "parka", "vest", "raincoat"}},
      {"footwear", {"boots", "sneakers", "sandals", "trainers"}},
      {"skincare", {"serum", "sunscreen", "moisturizer", "balm"}},
      {"homeware", {"lamp", "fan", "blanket", "purifier"}},
      {"pantry", {"oatmeal", "salmon", "pasta", "sauce"}},
  };
  return vocab;
}

inline const std::vector<const char*>& filler_words() {
  static const std::vector<const char*> fillers = {
      "premium", "daily", "compact", "crafted", "fresh",   "durable",
      "smooth",  "bold",  "gentle",  "classic", "natural", "bright"};
  return fillers;
}

}  // namespace detail

inline mocks::Lexicon instance_lexicon() {
  mocks::Lexicon lex;
  for (const auto& cat : detail::instance_vocab()) {
    std::vector<std::string> triggers;
    for (const char* t : cat.triggers) triggers.emplace_back(t);
    lex[cat.label] = std::move(triggers);
  }
  return lex;
}

// A small random single-ad instance whose pool fits the stage-1 candidate set
// (2..5 ads), built from a fixed category vocabulary. Deterministic per seed.
inline ICInstance make_random_ic_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& vocab = detail::instance_vocab();
  const auto& fillers = detail::filler_words();
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  };

  ICInstance inst;
  const int n_ads = 2 + static_cast<int>(pick(4));  // 2..5
  for (int i = 0; i < n_ads; ++i) {
    const auto& cat = vocab[pick(vocab.size())];
    Advertiser ad;
    ad.id = std::string(cat.label) + "-" + std::to_string(i);
    ad.name = std::string(cat.label) + " brand " + std::to_string(i);
    ad.category = cat.label;
    ad.description = std::string(cat.label) + " " +
                     cat.triggers[pick(cat.triggers.size())] + " " +
                     fillers[pick(fillers.size())] + " " + std::string(cat.label) +
                     " " + cat.triggers[pick(cat.triggers.size())] + " " +
                     fillers[pick(fillers.size())];
    ad.bid = uniform(0.2, 4.0);
    inst.pool.push_back(std::move(ad));
  }

  const std::size_t target = pick(inst.pool.size());
  inst.advertiser_id = inst.pool[target].id;
  inst.true_value = uniform(0.05, 6.0);
  inst.click_prob = uniform(0.1, 1.0);

  const auto& qcat = vocab[pick(vocab.size())];
  const auto& bidder_cat = inst.pool[target].category;
  // Half the time aim the query at the bidder's own category so wins happen.
  const std::string aim = (rng() % 2 == 0) ? bidder_cat : qcat.label;
  std::string trigger;
  for (const auto& cat : vocab)
    if (aim == cat.label) trigger = cat.triggers[pick(cat.triggers.size())];
  inst.query.id = "ic-" + std::to_string(seed);
  inst.query.kind = QueryKind::complex_intent;
  inst.query.ground_truth_ad = inst.advertiser_id;  // not used by the check
  inst.query.text = "looking for " + trigger + " something " + aim + " today";
  return inst;
}

// ----------------------------------------------------------------------------
// Report JSON
// ----------------------------------------------------------------------------

inline json to_json(const OracleResult& r) {
  json j{{"minimal_winning_bid",
          r.minimal_winning_bid ? json(*r.minimal_winning_bid) : json(nullptr)},
         {"non_contiguous_win_set", r.non_contiguous_win_set},
         {"wins_on_grid", r.wins_on_grid}};
  if (!r.per_bid.empty()) {
    json trace = json::array();
    for (const auto& g : r.per_bid)
      trace.push_back(json{{"bid", g.bid},
                           {"wins", g.wins},
                           {"payment", g.payment ? json(*g.payment) : json(nullptr)}});
    j["per_bid"] = std::move(trace);
  }
  return j;
}

inline json to_json(const ICReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations)
    violations.push_back(json{{"bid", v.bid}, {"utility", v.utility}});
  return json{{"truthful_utility", r.truthful_utility},
              {"truthful_wins", r.truthful_wins},
              {"violations", std::move(violations)},
              {"max_regret", r.max_regret}};
}

inline json to_json(const ProbeReport& r) {
  json events = json::array();
  for (const auto& e : r.recomposition_events)
    events.push_back(
        json{{"bid", e.bid}, {"kind", e.kind}, {"max_s2_shift", e.max_s2_shift}});
  json discrepancies = json::array();
  for (const auto& d : r.payment_discrepancies)
    discrepancies.push_back(json{{"bid", d.bid},
                                 {"closed_form", d.closed_form},
                                 {"oracle_minimal", d.oracle_minimal}});
  json per_bid = json::array();
  for (const auto& t : r.per_bid)
    per_bid.push_back(json{{"bid", t.bid},
                           {"in_topk", t.in_topk},
                           {"winner", is_phi(t.winner) ? json(nullptr) : json(t.winner)},
                           {"payment", t.payment ? json(*t.payment) : json(nullptr)}});
  return json{{"recomposition_events", std::move(events)},
              {"payment_discrepancies", std::move(discrepancies)},
              {"non_monotonic_allocation", r.non_monotonic_allocation},
              {"per_bid", std::move(per_bid)}};
}

}  // namespace lera::verify
