#pragma once

// HTTP surface: POST /v1/auction, POST /v1/dialogue, GET /healthz.
// Requests are independent; the dataset, config and scorer bundle are
// read-only after startup. Error mapping: 400 malformed body or unknown
// variant, 422 instance validation failure, 502 scorer failure (named).

#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "lera/bench.hpp"
#include "lera/dialogue.hpp"
#include "lera/remote.hpp"

namespace lera::service {

struct ServiceConfig {
  int port = 8080;
  int max_concurrent = 8;
  MechanismConfig mechanism;
  std::string dataset_dir = "data";
  std::string lexicon_path;  // defaults to <dataset_dir>/lexicon.json
  std::string scorer_mode = "mock";  // "mock" (overlap ranker) | "mock-cosine" | "remote"
  std::uint64_t mock_seed = 42;
  std::size_t mock_dim = 64;
  std::vector<std::string> dialogue_script;  // mock generator script
  remote::LogitEndpointConfig logit_endpoint;
  remote::EmbeddingEndpointConfig embedding_endpoint;
  remote::KeywordEndpointConfig keyword_endpoint;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

namespace detail {

inline void parse_endpoint(const json& j, remote::EndpointConfig& endpoint) {
  endpoint.base_url = j.value("url", endpoint.base_url);
  endpoint.path = j.value("path", endpoint.path);
  endpoint.timeout_ms = j.value("timeout_ms", endpoint.timeout_ms);
  endpoint.max_in_flight = j.value("max_in_flight", endpoint.max_in_flight);
  if (j.contains("request_template")) endpoint.request_template = j.at("request_template");
}

inline std::string env_or(const char* name, std::string fallback) {
  const char* value = std::getenv(name);
  return value && *value ? std::string(value) : fallback;
}

}  // namespace detail

// Config file layout is documented in the repo README; LERA_PORT and the
// LERA_*_URL variables override the file.
inline ServiceConfig service_config_from_json(const json& j,
                                              const std::string& config_dir = ".") {
  ServiceConfig cfg;
  cfg.port = j.value("port", cfg.port);
  cfg.max_concurrent = j.value("max_concurrent", cfg.max_concurrent);
  if (j.contains("mechanism"))
    cfg.mechanism = mechanism_config_from_json(j.at("mechanism"));
  cfg.dataset_dir = j.value("dataset_dir", cfg.dataset_dir);
  cfg.lexicon_path = j.value("lexicon_path", cfg.dataset_dir + "/lexicon.json");
  cfg.scorer_mode = j.value("scorer_mode", cfg.scorer_mode);
  cfg.mock_seed = j.value("mock_seed", cfg.mock_seed);
  cfg.mock_dim = j.value("mock_dim", cfg.mock_dim);
  if (j.contains("dialogue_script"))
    cfg.dialogue_script = j.at("dialogue_script").get<std::vector<std::string>>();

  auto load_prompt = [&](const json& node, const char* key) -> std::string {
    if (node.contains(key)) return read_text_file(config_dir + "/" + node.at(key).get<std::string>());
    return "";
  };
  if (j.contains("logit_endpoint")) {
    const auto& node = j.at("logit_endpoint");
    detail::parse_endpoint(node, cfg.logit_endpoint.endpoint);
    cfg.logit_endpoint.prompt_template = load_prompt(node, "prompt_template_file");
    cfg.logit_endpoint.use_normalized =
        node.value("use_normalized_logprob", cfg.logit_endpoint.use_normalized);
    cfg.logit_endpoint.normalized_logprob_pointer = node.value(
        "normalized_logprob_pointer", cfg.logit_endpoint.normalized_logprob_pointer);
    cfg.logit_endpoint.raw_logprob_pointer =
        node.value("raw_logprob_pointer", cfg.logit_endpoint.raw_logprob_pointer);
  }
  if (j.contains("embedding_endpoint")) {
    const auto& node = j.at("embedding_endpoint");
    detail::parse_endpoint(node, cfg.embedding_endpoint.endpoint);
    cfg.embedding_endpoint.embedding_pointer =
        node.value("embedding_pointer", cfg.embedding_endpoint.embedding_pointer);
    cfg.embedding_endpoint.dimension =
        node.value("dimension", cfg.embedding_endpoint.dimension);
  }
  if (j.contains("keyword_endpoint")) {
    const auto& node = j.at("keyword_endpoint");
    detail::parse_endpoint(node, cfg.keyword_endpoint.endpoint);
    cfg.keyword_endpoint.prompt_template = load_prompt(node, "prompt_template_file");
    cfg.keyword_endpoint.text_pointer =
        node.value("text_pointer", cfg.keyword_endpoint.text_pointer);
  }

  cfg.port = std::atoi(detail::env_or("LERA_PORT", std::to_string(cfg.port)).c_str());
  cfg.logit_endpoint.endpoint.base_url =
      detail::env_or("LERA_LOGIT_URL", cfg.logit_endpoint.endpoint.base_url);
  cfg.embedding_endpoint.endpoint.base_url =
      detail::env_or("LERA_EMBED_URL", cfg.embedding_endpoint.endpoint.base_url);
  cfg.keyword_endpoint.endpoint.base_url =
      detail::env_or("LERA_KEYWORD_URL", cfg.keyword_endpoint.endpoint.base_url);
  return cfg;
}

inline ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? "." : path.substr(0, slash);
  return service_config_from_json(j, dir);
}

inline ScorerBundle build_bundle(const ServiceConfig& cfg) {
  if (cfg.scorer_mode == "remote") {
    ScorerBundle bundle;
    bundle.embedder = std::make_shared<remote::RemoteEmbedder>(cfg.embedding_endpoint);
    bundle.keywords =
        std::make_shared<remote::RemoteKeywordGenerator>(cfg.keyword_endpoint);
    bundle.logits = std::make_shared<remote::RemoteLogitScorer>(cfg.logit_endpoint);
    return bundle;
  }
  const auto lexicon = load_lexicon(cfg.lexicon_path);
  if (cfg.scorer_mode == "mock-cosine")
    return mocks::make_mock_bundle(lexicon, cfg.mock_seed, cfg.mock_dim);
  if (cfg.scorer_mode == "mock")
    return mocks::make_overlap_bundle(lexicon, cfg.mock_seed, cfg.mock_dim);
  throw SchemaError("unknown scorer_mode: " + cfg.scorer_mode);
}

// ----------------------------------------------------------------------------
// Service
// ----------------------------------------------------------------------------

class AdService {
 public:
  AdService(ServiceConfig config, Dataset dataset, ScorerBundle bundle)
      : config_(std::move(config)),
        dataset_(std::move(dataset)),
        bundle_(std::move(bundle)) {
    if (config_.dialogue_script.empty())
      config_.dialogue_script = eval::default_dialogue_script(6);
  }

  static AdService from_config(ServiceConfig config) {
    auto dataset = load_dataset(DatasetPaths::in_dir(config.dataset_dir),
                                config.mechanism.all_one_bids);
    auto bundle = build_bundle(config);
    return AdService(std::move(config), std::move(dataset), std::move(bundle));
  }

  void install(httplib::Server& server) const {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}}.dump(), "application/json");
    });
    server.Post("/v1/auction",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle_auction(req, res);
                });
    server.Post("/v1/dialogue",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle_dialogue(req, res);
                });
  }

  // Serves until the process is stopped.
  int run() const {
    httplib::Server server;
    const int pool_size = std::max(config_.max_concurrent, 8);
    server.new_task_queue = [pool_size] { return new httplib::ThreadPool(pool_size); };
    install(server);
    std::fprintf(stderr, "listening on 0.0.0.0:%d (%s scorers, %zu advertisers)\n",
                 config_.port, config_.scorer_mode.c_str(), dataset_.pool.size());
    return server.listen("0.0.0.0", config_.port) ? 0 : 1;
  }

 private:
  struct ParsedRequest {
    Query query;
    Variant variant = Variant::lera;
    std::string context;
    MechanismConfig config;
    std::vector<Advertiser> pool;  // inline pool or server dataset
  };

  static void reply_error(httplib::Response& res, int status, const std::string& message,
                          const std::string& scorer = "") {
    json body{{"error", message}};
    if (!scorer.empty()) body["scorer"] = scorer;
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Returns false after writing an error response.
  bool parse_request(const httplib::Request& req, httplib::Response& res,
                     ParsedRequest& out, bool variant_required) const {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const std::exception& e) {
      reply_error(res, 400, std::string("malformed JSON body: ") + e.what());
      return false;
    }
    if (!body.is_object() || !body.contains("query") || !body.at("query").is_string()) {
      reply_error(res, 400, "body must be an object with a string \"query\"");
      return false;
    }
    out.query.id = body.value("query_id", std::string("http"));
    out.query.text = body.at("query").get<std::string>();
    out.query.kind = QueryKind::complex_intent;

    if (body.contains("variant")) {
      if (!body.at("variant").is_string()) {
        reply_error(res, 400, "\"variant\" must be a string");
        return false;
      }
      const auto variant = variant_from_string(body.at("variant").get<std::string>());
      if (!variant) {
        reply_error(res, 400, "unknown variant: " + body.at("variant").get<std::string>() +
                                  " (expected one of " + join(all_variant_names(), ", ") +
                                  ")");
        return false;
      }
      out.variant = *variant;
    } else if (variant_required) {
      reply_error(res, 400, "missing \"variant\"");
      return false;
    }

    out.context = body.value("context", std::string{});
    try {
      out.config = body.contains("config")
                       ? mechanism_config_from_json(body.at("config"), config_.mechanism)
                       : config_.mechanism;
      if (body.contains("max_parts")) out.config.max_parts = body.at("max_parts").get<int>();
      if (body.contains("max_insertions"))
        out.config.max_insertions = body.at("max_insertions").get<int>();
      if (body.contains("advertiser_pool")) {
        for (const auto& ad : body.at("advertiser_pool"))
          out.pool.push_back(advertiser_from_json(ad));
      } else {
        out.pool = dataset_.pool;
      }
    } catch (const std::exception& e) {
      reply_error(res, 400, std::string("malformed body: ") + e.what());
      return false;
    }

    ValidationReport validation;
    if (out.query.text.empty()) validation.violations.push_back("query text is empty");
    validate_pool(out.pool, validation);
    validate_config(out.config, validation);
    if (!validation.ok()) {
      reply_error(res, 422, "validation failed: " + join(validation.violations, "; "));
      return false;
    }
    return true;
  }

  void handle_auction(const httplib::Request& req, httplib::Response& res) const {
    ParsedRequest parsed;
    if (!parse_request(req, res, parsed, /*variant_required=*/true)) return;
    try {
      const auto outcome = run_auction(parsed.variant, parsed.query, parsed.pool,
                                       parsed.config, bundle_, parsed.context);
      res.set_content(to_json(outcome).dump(), "application/json");
    } catch (const AuctionError& e) {
      if (!e.scorer_name.empty())
        reply_error(res, 502, e.what(), e.scorer_name);
      else
        reply_error(res, 500, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  }

  void handle_dialogue(const httplib::Request& req, httplib::Response& res) const {
    ParsedRequest parsed;
    if (!parse_request(req, res, parsed, /*variant_required=*/false)) return;
    std::vector<std::string> script = config_.dialogue_script;
    try {
      const json body = json::parse(req.body);
      if (body.contains("script"))
        script = body.at("script").get<std::vector<std::string>>();
    } catch (const std::exception&) {
      // unreachable: parse_request already validated the body
    }
    try {
      mocks::ScriptedSegmentGenerator generator(script);
      const auto transcript = run_dialogue(parsed.query, parsed.pool, parsed.config,
                                           bundle_, generator, parsed.variant);
      res.set_content(to_json(transcript).dump(), "application/json");
    } catch (const AuctionError& e) {
      if (!e.scorer_name.empty())
        reply_error(res, 502, e.what(), e.scorer_name);
      else
        reply_error(res, 500, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    }
  }

  ServiceConfig config_;
  Dataset dataset_;
  ScorerBundle bundle_;
};

}  // namespace lera::service
