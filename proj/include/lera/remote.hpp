#pragma once

// HTTP clients implementing the scorer contracts against logprob-capable
// inference endpoints. Engines differ in their request/response shapes, so
// bodies are built from JSON templates with {{...}} placeholders and values
// are read back through configurable JSON pointers.
//
// Logit scoring follows the parallel-prefill pattern: one prompt variant per
// choice, each appending that choice's numeric symbol ("0" = no insertion,
// "1".."K" = candidates), issued concurrently; the per-variant sequence
// log-probability is the raw logit.

#include <condition_variable>
#include <cstdio>
#include <future>

#include <httplib.h>

#include "lera/json_io.hpp"
#include "lera/scoring.hpp"

namespace lera::remote {

inline std::string replace_all(std::string text, const std::string& what,
                               const std::string& with) {
  std::size_t pos = 0;
  while ((pos = text.find(what, pos)) != std::string::npos) {
    text.replace(pos, what.size(), with);
    pos += with.size();
  }
  return text;
}

using Substitutions = std::map<std::string, std::string>;

inline std::string render_template(std::string text, const Substitutions& subs) {
  for (const auto& [key, value] : subs) text = replace_all(std::move(text), key, value);
  return text;
}

// Deep-copies the template, substituting placeholders inside string values.
inline json render_request(const json& request_template, const Substitutions& subs) {
  json out = request_template;
  std::function<void(json&)> walk = [&](json& node) {
    if (node.is_string()) {
      node = render_template(node.get<std::string>(), subs);
    } else if (node.is_object() || node.is_array()) {
      for (auto& child : node) walk(child);
    }
  };
  walk(out);
  return out;
}

class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : limit_(std::max(1, limit)) {}
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  int limit_;
  int active_ = 0;
  std::mutex mutex_;
  std::condition_variable cv_;
};

struct EndpointConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8000"
  std::string path = "/score";
  int timeout_ms = 10000;
  int max_in_flight = 8;
  json request_template;  // strings may carry {{PROMPT}} / {{TEXT}} placeholders
};

namespace detail {

inline json post_json(const EndpointConfig& endpoint, const json& body,
                      const std::string& scorer_name) {
  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(0, endpoint.timeout_ms * 1000);
  client.set_read_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);
  const auto res = client.Post(endpoint.path, body.dump(), "application/json");
  if (!res)
    throw ScorerError(scorer_name, "endpoint unreachable: " + endpoint.base_url +
                                       endpoint.path + " (" +
                                       httplib::to_string(res.error()) + ")");
  if (res->status != 200)
    throw ScorerError(scorer_name, "endpoint returned HTTP " +
                                       std::to_string(res->status) + " from " +
                                       endpoint.base_url + endpoint.path);
  try {
    return json::parse(res->body);
  } catch (const std::exception& e) {
    throw ScorerError(scorer_name, std::string("response is not JSON: ") + e.what());
  }
}

inline json extract(const json& response, const std::string& pointer,
                    const std::string& scorer_name, const std::string& what) {
  try {
    return response.at(json::json_pointer(pointer));
  } catch (const std::exception&) {
    throw ScorerError(scorer_name, "missing " + what + " at " + pointer +
                                       " in endpoint response");
  }
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Logit scorer
// ----------------------------------------------------------------------------

struct LogitEndpointConfig {
  EndpointConfig endpoint;
  std::string prompt_template;  // {{QUERY}}, {{CONTEXT}}, {{CHOICES}}
  // Sequence logprob locations in the response; normalized (length-averaged)
  // is the default, raw total is the alternative.
  std::string normalized_logprob_pointer = "/normalized_prompt_logprob";
  std::string raw_logprob_pointer = "/prompt_logprob";
  bool use_normalized = true;
  std::string no_insertion_label = "No insertion";
};

class RemoteLogitScorer : public LogitScorer {
 public:
  explicit RemoteLogitScorer(LogitEndpointConfig config)
      : config_(std::move(config)),
        limiter_(std::make_shared<InFlightLimiter>(config_.endpoint.max_in_flight)) {
    if (config_.endpoint.request_template.is_null())
      config_.endpoint.request_template =
          json{{"prompt", "{{PROMPT}}"}, {"temperature", 0.0}, {"logprobs", true}};
  }

  std::vector<double> score(const std::string& query_text,
                            const std::string& context_text,
                            const std::vector<ChoiceCandidate>& candidates,
                            bool include_phi) const override {
    // Choice block with numeric symbols; "0" is reserved for no insertion.
    std::string choices_block;
    if (include_phi) choices_block += "Choice 0: " + config_.no_insertion_label + "\n";
    for (std::size_t i = 0; i < candidates.size(); ++i)
      choices_block +=
          "Choice " + std::to_string(i + 1) + ": " + candidates[i].description + "\n";

    const std::string base = render_template(
        config_.prompt_template, {{"{{QUERY}}", query_text},
                                  {"{{CONTEXT}}", context_text},
                                  {"{{CHOICES}}", choices_block}});

    // One prompt variant per choice, appending that choice's symbol.
    std::vector<std::string> prompts;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      prompts.push_back(base + "Choice " + std::to_string(i + 1));
    if (include_phi) prompts.push_back(base + "Choice 0");

    const std::string pointer = config_.use_normalized
                                    ? config_.normalized_logprob_pointer
                                    : config_.raw_logprob_pointer;
    std::vector<std::future<double>> futures;
    futures.reserve(prompts.size());
    for (const auto& prompt : prompts) {
      futures.push_back(std::async(std::launch::async, [this, prompt, pointer] {
        limiter_->acquire();
        struct Release {
          InFlightLimiter* l;
          ~Release() { l->release(); }
        } release{limiter_.get()};
        const json body =
            render_request(config_.endpoint.request_template, {{"{{PROMPT}}", prompt}});
        const json response = detail::post_json(config_.endpoint, body, "logit_scorer");
        const json value = detail::extract(response, pointer, "logit_scorer", "logprob");
        if (!value.is_number())
          throw ScorerError("logit_scorer", "logprob at " + pointer + " is not a number");
        return value.get<double>();
      }));
    }

    std::vector<double> logits;
    logits.reserve(prompts.size());
    for (auto& f : futures) logits.push_back(f.get());
    return logits;  // candidates first, phi last: matches prompt order above
  }

 private:
  LogitEndpointConfig config_;
  std::shared_ptr<InFlightLimiter> limiter_;
};

// ----------------------------------------------------------------------------
// Embedder
// ----------------------------------------------------------------------------

struct EmbeddingEndpointConfig {
  EndpointConfig endpoint;
  std::string embedding_pointer = "/embedding";
  std::size_t dimension = 0;  // 0 = accept whatever the endpoint returns
};

class RemoteEmbedder : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(EmbeddingEndpointConfig config) : config_(std::move(config)) {
    if (config_.endpoint.request_template.is_null())
      config_.endpoint.request_template = json{{"text", "{{TEXT}}"}};
  }

  std::vector<double> embed(const std::string& text) const override {
    const json body =
        render_request(config_.endpoint.request_template, {{"{{TEXT}}", text}});
    const json response = detail::post_json(config_.endpoint, body, "embedder");
    const json value =
        detail::extract(response, config_.embedding_pointer, "embedder", "embedding");
    if (!value.is_array() || value.empty())
      throw ScorerError("embedder", "embedding is not a non-empty array");
    auto vec = value.get<std::vector<double>>();
    if (config_.dimension != 0 && vec.size() != config_.dimension)
      throw ScorerError("embedder", "embedding dimension mismatch: got " +
                                        std::to_string(vec.size()) + ", want " +
                                        std::to_string(config_.dimension));
    double norm2 = 0.0;
    for (double x : vec) norm2 += x * x;
    if (norm2 == 0.0) throw ScorerError("embedder", "embedding is the zero vector");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : vec) x *= inv;
    return vec;
  }

  std::size_t dimension() const override { return config_.dimension; }

 private:
  EmbeddingEndpointConfig config_;
};

// ----------------------------------------------------------------------------
// Keyword generator
// ----------------------------------------------------------------------------

struct KeywordEndpointConfig {
  EndpointConfig endpoint;
  std::string prompt_template;  // {{QUERY}}, {{CONTEXT}}
  std::string text_pointer = "/text";
};

class RemoteKeywordGenerator : public KeywordGenerator {
 public:
  explicit RemoteKeywordGenerator(KeywordEndpointConfig config)
      : config_(std::move(config)) {
    if (config_.endpoint.request_template.is_null())
      config_.endpoint.request_template =
          json{{"prompt", "{{PROMPT}}"}, {"temperature", 0.7}, {"max_tokens", 64}};
  }

  KeywordResult keywords(const std::string& query_text,
                         const std::string& context_text) const override {
    const std::string prompt = render_template(
        config_.prompt_template,
        {{"{{QUERY}}", query_text}, {"{{CONTEXT}}", context_text}});
    const json body =
        render_request(config_.endpoint.request_template, {{"{{PROMPT}}", prompt}});
    const json response = detail::post_json(config_.endpoint, body, "keyword_generator");
    const json value =
        detail::extract(response, config_.text_pointer, "keyword_generator", "text");
    if (!value.is_string())
      throw ScorerError("keyword_generator", "text at " + config_.text_pointer +
                                                 " is not a string");
    return parse_keywords(value.get<std::string>());
  }

  // Comma-separated keywords, clamped to 2..3. An unusable completion flips
  // the fallback flag so the caller retrieves on the raw query text instead.
  static KeywordResult parse_keywords(const std::string& text) {
    KeywordResult result;
    std::string current;
    auto flush = [&] {
      const auto tokens = tokenize(current);
      if (!tokens.empty() && result.keywords.size() < 3)
        result.keywords.push_back(join(tokens, "_"));
      current.clear();
    };
    for (char ch : text) {
      if (ch == ',' || ch == '\n') {
        flush();
      } else {
        current.push_back(ch);
      }
    }
    flush();
    if (result.keywords.empty()) {
      result.used_fallback = true;
      std::fprintf(stderr, "[keyword_generator] unparseable completion, retrieval "
                           "falls back to the raw query text\n");
      return result;
    }
    while (result.keywords.size() < 2) result.keywords.push_back(result.keywords.front());
    return result;
  }

 private:
  KeywordEndpointConfig config_;
};

}  // namespace lera::remote
