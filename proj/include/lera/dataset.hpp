#pragma once

// Benchmark dataset ingestion. File schemas:
//   advertisers.json    [{"id","name","category","description","bid"}]
//   queries_single.json [{"id","kind","text","ground_truth_ad"}]
//   queries_multi.json  [{"id","text","target_categories"}]
// Unknown fields are ignored. A missing bid defaults to 1.0 when the
// all_one_bids override is active; the override then forces every bid to 1.0.

#include <fstream>
#include <sstream>

#include "lera/json_io.hpp"
#include "lera/mocks.hpp"

namespace lera {

class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetPaths {
  std::string advertisers;
  std::string queries_single;
  std::string queries_multi;

  static DatasetPaths in_dir(const std::string& dir) {
    return {dir + "/advertisers.json", dir + "/queries_single.json",
            dir + "/queries_multi.json"};
  }
};

struct Dataset {
  std::vector<Advertiser> pool;
  std::vector<Query> single_queries;
  std::vector<Query> multi_queries;
};

namespace detail {

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (!j.is_array()) throw SchemaError(path + ": top-level value must be an array");
  return j;
}

inline std::string at(const std::string& path, std::size_t index, const char* field) {
  std::ostringstream os;
  os << path << "[" << index << "]." << field;
  return os.str();
}

inline std::string require_string(const json& j, const std::string& path,
                                  std::size_t index, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string())
    throw SchemaError(at(path, index, field) + ": missing or not a string");
  return j.at(field).get<std::string>();
}

}  // namespace detail

inline std::vector<Advertiser> load_advertisers(const std::string& path,
                                                bool all_one_bids) {
  const json arr = detail::load_json_file(path);
  std::vector<Advertiser> pool;
  std::map<std::string, bool> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& j = arr[i];
    Advertiser ad;
    ad.id = detail::require_string(j, path, i, "id");
    ad.name = j.value("name", std::string{});
    ad.category = detail::require_string(j, path, i, "category");
    ad.description = detail::require_string(j, path, i, "description");
    if (ad.description.empty())
      throw SchemaError(detail::at(path, i, "description") + ": must be non-empty");
    if (j.contains("bid")) {
      if (!j.at("bid").is_number())
        throw SchemaError(detail::at(path, i, "bid") + ": not a number");
      ad.bid = j.at("bid").get<double>();
    } else if (all_one_bids) {
      ad.bid = 1.0;
    } else {
      throw SchemaError(detail::at(path, i, "bid") + ": missing");
    }
    if (all_one_bids) ad.bid = 1.0;
    if (!(ad.bid > 0.0))
      throw SchemaError(detail::at(path, i, "bid") + ": must be positive");
    if (j.contains("true_value") && !j.at("true_value").is_null())
      ad.true_value = j.at("true_value").get<double>();
    if (is_phi(ad.id))
      throw SchemaError(detail::at(path, i, "id") + ": reserved id");
    if (seen.count(ad.id))
      throw SchemaError(detail::at(path, i, "id") + ": duplicate id " + ad.id);
    seen[ad.id] = true;
    pool.push_back(std::move(ad));
  }
  if (pool.empty()) throw SchemaError(path + ": advertiser pool is empty");
  return pool;
}

inline std::vector<Query> load_single_queries(const std::string& path) {
  const json arr = detail::load_json_file(path);
  std::vector<Query> queries;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& j = arr[i];
    Query q;
    q.id = detail::require_string(j, path, i, "id");
    q.text = detail::require_string(j, path, i, "text");
    const auto kind = query_kind_from_string(detail::require_string(j, path, i, "kind"));
    if (!kind || *kind == QueryKind::multi_need)
      throw SchemaError(detail::at(path, i, "kind") + ": not a single-ad kind");
    q.kind = *kind;
    if (!j.contains("ground_truth_ad") || j.at("ground_truth_ad").is_null())
      throw SchemaError(detail::at(path, i, "ground_truth_ad") + ": missing");
    q.ground_truth_ad = j.at("ground_truth_ad").get<std::string>();
    queries.push_back(std::move(q));
  }
  return queries;
}

inline std::vector<Query> load_multi_queries(const std::string& path) {
  const json arr = detail::load_json_file(path);
  std::vector<Query> queries;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& j = arr[i];
    Query q;
    q.id = detail::require_string(j, path, i, "id");
    q.text = detail::require_string(j, path, i, "text");
    q.kind = QueryKind::multi_need;
    if (!j.contains("target_categories") || !j.at("target_categories").is_array() ||
        j.at("target_categories").empty())
      throw SchemaError(detail::at(path, i, "target_categories") + ": missing or empty");
    q.target_categories = j.at("target_categories").get<std::vector<std::string>>();
    queries.push_back(std::move(q));
  }
  return queries;
}

// Loads and cross-validates the full benchmark (ground-truth ids must exist
// in the pool). Throws SchemaError with path + field on any violation.
inline Dataset load_dataset(const DatasetPaths& paths, bool all_one_bids = false) {
  Dataset ds;
  ds.pool = load_advertisers(paths.advertisers, all_one_bids);
  ds.single_queries = load_single_queries(paths.queries_single);
  ds.multi_queries = load_multi_queries(paths.queries_multi);
  for (std::size_t i = 0; i < ds.single_queries.size(); ++i) {
    const auto& q = ds.single_queries[i];
    if (!find_advertiser(ds.pool, *q.ground_truth_ad))
      throw SchemaError(detail::at(paths.queries_single, i, "ground_truth_ad") +
                        ": unknown advertiser " + *q.ground_truth_ad);
  }
  return ds;
}

// Lexicon config: {"category": ["token", ...]}
inline mocks::Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (!j.is_object()) throw SchemaError(path + ": top-level value must be an object");
  mocks::Lexicon lex;
  for (const auto& [category, triggers] : j.items()) {
    if (!triggers.is_array()) throw SchemaError(path + "." + category + ": not an array");
    lex[category] = triggers.get<std::vector<std::string>>();
  }
  return lex;
}

}  // namespace lera
