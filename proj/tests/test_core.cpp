#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lera/dialogue.hpp"
#include "lera/json_io.hpp"
#include "test_support.hpp"

using namespace lera;
using lera::testing::make_ad;
using lera::testing::make_query;

TEST_CASE("validate_instance") {
  MechanismConfig config;
  SUBCASE("well-formed instance is ok") {
    std::vector<Advertiser> pool = {make_ad("a1", "c", "desc one", 1.0),
                                    make_ad("a2", "c", "desc two", 1.0)};
    CHECK(validate_instance(pool, make_query("q", "text", "a1"), config).ok());
  }
  SUBCASE("duplicate id") {
    std::vector<Advertiser> pool = {make_ad("a1", "c", "d", 1.0),
                                    make_ad("a1", "c", "d", 1.0)};
    const auto report = validate_instance(pool, make_query("q", "t", "a1"), config);
    REQUIRE(!report.ok());
    bool found = false;
    for (const auto& v : report.violations) found = found || v.find("duplicate id") == 0;
    CHECK(found);
  }
  SUBCASE("non-positive bid") {
    std::vector<Advertiser> pool = {make_ad("a1", "c", "d", 0.0)};
    const auto report = validate_instance(pool, make_query("q", "t", "a1"), config);
    bool found = false;
    for (const auto& v : report.violations)
      found = found || v.find("bid must be positive") == 0;
    CHECK(found);
  }
  SUBCASE("missing ground truth for single-ad kind") {
    std::vector<Advertiser> pool = {make_ad("a1", "c", "d", 1.0)};
    CHECK(!validate_instance(pool, make_query("q", "t"), config).ok());
  }
  SUBCASE("reserved id rejected") {
    std::vector<Advertiser> pool = {make_ad(phi_id(), "c", "d", 1.0)};
    CHECK(!validate_instance(pool, make_query("q", "t", phi_id()), config).ok());
  }
  SUBCASE("multi-need query needs targets") {
    std::vector<Advertiser> pool = {make_ad("a1", "c", "d", 1.0)};
    Query q = make_query("q", "t");
    q.kind = QueryKind::multi_need;
    CHECK(!validate_instance(pool, q, config).ok());
    q.target_categories = {"c"};
    CHECK(validate_instance(pool, q, config).ok());
  }
  SUBCASE("bad config values flagged") {
    std::vector<Advertiser> pool = {make_ad("a1", "c", "d", 1.0)};
    MechanismConfig bad = config;
    bad.k_single = 0;
    bad.norm_floor = 0.0;
    const auto report = validate_instance(pool, make_query("q", "t", "a1"), bad);
    CHECK(report.violations.size() >= 2);
  }
}

TEST_CASE("mechanism defaults match the shipped inference settings") {
  const MechanismConfig config;
  CHECK(config.k_single == 5);
  CHECK(config.k_dynamic == 8);
  CHECK(config.no_insertion_margin == 0.0);
  CHECK(config.max_parts == 10);
  CHECK(config.max_insertions == 3);
  CHECK(config.norm_floor == 1e-6);
  CHECK(config.seed == 42);
  CHECK(config.all_one_bids == false);
}

TEST_CASE("ranking order: score first, phi wins ties, then lower id") {
  CHECK(ranks_ahead(2.0, "b", 1.0, "a"));
  CHECK(!ranks_ahead(1.0, "a", 2.0, "b"));
  CHECK(ranks_ahead(1.0, phi_id(), 1.0, "a"));
  CHECK(!ranks_ahead(1.0, "a", 1.0, phi_id()));
  CHECK(ranks_ahead(1.0, "a", 1.0, "b"));
  CHECK(!ranks_ahead(1.0, "b", 1.0, "a"));
}

namespace {

std::string random_word(std::mt19937_64& rng) {
  static const char* words[] = {"boots", "coffee", "satin", "quiet", "desk",
                                "serum", "trail", "olive", "amber", "nitro"};
  return words[rng() % 10];
}

Advertiser random_advertiser(std::mt19937_64& rng) {
  Advertiser ad;
  ad.id = "ad-" + std::to_string(rng() % 100000);
  ad.name = random_word(rng) + " brand";
  ad.category = random_word(rng);
  ad.description = random_word(rng) + " " + random_word(rng) + " " + random_word(rng);
  ad.bid = 0.1 + static_cast<double>(rng() % 1000) / 250.0;
  if (rng() % 2) ad.true_value = 0.5 + static_cast<double>(rng() % 100) / 10.0;
  return ad;
}

Query random_query(std::mt19937_64& rng) {
  Query q;
  q.id = "q-" + std::to_string(rng() % 100000);
  q.text = random_word(rng) + " " + random_word(rng);
  switch (rng() % 4) {
    case 0: q.kind = QueryKind::complex_intent; break;
    case 1: q.kind = QueryKind::intent_shift; break;
    case 2: q.kind = QueryKind::negative_refinement; break;
    default: q.kind = QueryKind::multi_need; break;
  }
  if (q.kind == QueryKind::multi_need) {
    q.target_categories = {random_word(rng), random_word(rng)};
  } else if (rng() % 2) {
    q.ground_truth_ad = "ad-" + std::to_string(rng() % 100);
  }
  return q;
}

}  // namespace

TEST_CASE("JSON round-trip: dataset types") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 300; ++i) {
    const auto ad = random_advertiser(rng);
    CHECK(advertiser_from_json(to_json(ad)) == ad);
    const auto q = random_query(rng);
    CHECK(query_from_json(to_json(q)) == q);
  }
  MechanismConfig config;
  config.k_single = 7;
  config.no_insertion_margin = 0.125;
  config.all_one_bids = true;
  CHECK(mechanism_config_from_json(to_json(config)) == config);
}

TEST_CASE("JSON round-trip: outcome and transcript through a real auction") {
  const auto& ds = lera::testing::fixture_dataset();
  const auto& bundle = lera::testing::cosine_bundle();
  MechanismConfig config;

  auto out = run_auction(Variant::lera, ds.single_queries[0], ds.pool, config, bundle);
  CHECK(auction_outcome_from_json(to_json(out)) == out);

  auto phi_out = run_auction(Variant::llm_only, ds.single_queries[0], ds.pool, config,
                             bundle);
  CHECK(auction_outcome_from_json(to_json(phi_out)) == phi_out);

  mocks::ScriptedSegmentGenerator gen({"First part.", "Second part.", "END"});
  auto transcript = run_dialogue(ds.multi_queries[0], ds.pool, config,
                                 lera::testing::overlap_bundle(), gen, Variant::lera);
  CHECK(dialogue_transcript_from_json(to_json(transcript)) == transcript);

  // pinned export field names
  const auto j = to_json(transcript);
  CHECK(j.contains("query_id"));
  CHECK(j.contains("insertions_used"));
  REQUIRE(j.at("segments").is_array());
  for (const auto& seg : j.at("segments")) {
    CHECK(seg.contains("text"));
    CHECK(seg.contains("winner"));
    CHECK(seg.contains("payment"));
    CHECK(seg.contains("inserted"));
  }
}

TEST_CASE("candidate ordering is a stable total order") {
  const auto& ds = lera::testing::fixture_dataset();
  const auto& bundle = lera::testing::cosine_bundle();
  const auto a = stage1_filter("snacks", ds.pool, 24, *bundle.embedder, 1e-6);
  const auto b = stage1_filter("snacks", ds.pool, 24, *bundle.embedder, 1e-6);
  CHECK(a == b);
  CHECK(a.members.size() == ds.pool.size());
  for (std::size_t i = 0; i + 1 < a.members.size(); ++i) {
    CHECK(ranks_ahead(a.weighted_scores.at(a.members[i]), a.members[i],
                      a.weighted_scores.at(a.members[i + 1]), a.members[i + 1]));
  }
  // the (k+1)-th score never exceeds any admitted member's score
  for (int k = 1; k <= 24; ++k) {
    const auto cs = stage1_filter("snacks", ds.pool, k, *bundle.embedder, 1e-6);
    for (const auto& id : cs.members)
      CHECK(cs.entry_threshold <= cs.weighted_scores.at(id));
  }
}
