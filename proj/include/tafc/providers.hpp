#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tafc/json.hpp"

namespace tafc {

/// Text in, text out. Used both as the model under tuning and as the
/// meta-refiner.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string complete(const std::string& system, const std::string& user) = 0;
};

/// Text to a fixed-length vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(std::string_view text) = 0;
};

/// log P(text | context). nullopt means the provider cannot score this text.
class LogProbProvider {
 public:
  virtual ~LogProbProvider() = default;
  virtual std::optional<double> logprob(std::string_view text, std::string_view context) = 0;
};

/// Lower-cased alphanumeric tokens.
std::vector<std::string> word_tokens(std::string_view text);

/// Counts FNV-1a-hashed tokens into `dimension` buckets.
class HashedBagOfWordsEmbedder final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDimension = 64;
  explicit HashedBagOfWordsEmbedder(std::size_t dimension = kDefaultDimension);
  std::vector<double> embed(std::string_view text) override;
  static std::size_t bucket(std::string_view token, std::size_t dimension);

 private:
  std::size_t dimension_;
};

/// Laplace-smoothed unigram model of the context:
/// sum over text tokens of log((count_in_context + 1) / (context_tokens + vocabulary)).
class TokenOverlapLogProb final : public LogProbProvider {
 public:
  std::optional<double> logprob(std::string_view text, std::string_view context) override;
};

/// Deterministic chat stand-in driven by a table of prompt patterns. The first
/// rule whose substrings all occur (and whose excluded substrings do not) in
/// system + user answers; each rule walks through its responses and then
/// repeats the last one.
class ScriptedChatProvider final : public ChatProvider {
 public:
  struct Rule {
    std::vector<std::string> contains_all;
    std::vector<std::string> contains_none;
    std::vector<std::string> responses;
  };

  ScriptedChatProvider() = default;
  explicit ScriptedChatProvider(std::vector<Rule> rules, std::string fallback = "");

  void add_rule(Rule rule);
  void set_fallback(std::string fallback);
  std::string complete(const std::string& system, const std::string& user) override;
  std::size_t calls() const;
  std::vector<std::string> prompts() const;

  /// {"rules": [{"contains_all": [...], "contains_none": [...], "responses": [...]}],
  ///  "fallback": "..."}; "response" is accepted for a single reply.
  static std::shared_ptr<ScriptedChatProvider> from_json(const Json& j);

 private:
  mutable std::mutex mutex_;
  std::vector<Rule> rules_;
  std::vector<std::size_t> cursor_;
  std::string fallback_;
  std::vector<std::string> prompts_;
};

/// Chat-completions endpoint of an OpenAI-compatible server.
class HttpChatProvider final : public ChatProvider {
 public:
  HttpChatProvider(std::string base_url, std::string api_key, std::string model,
                   double temperature = 0.1, double timeout_seconds = 30.0)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)),
        temperature_(temperature), timeout_seconds_(timeout_seconds) {}
  std::string complete(const std::string& system, const std::string& user) override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  double temperature_;
  double timeout_seconds_;
};

class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string base_url, std::string api_key, std::string model,
                        double timeout_seconds = 30.0)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)),
        timeout_seconds_(timeout_seconds) {}
  std::vector<double> embed(std::string_view text) override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  double timeout_seconds_;
};

struct ProviderBundle {
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<EmbeddingProvider> embed;
  /// May be null: objectives then fall back to smoothed exact-match rates.
  std::shared_ptr<LogProbProvider> logprob;
};

/// Builds providers from a "providers" config object:
///   chat:    {"kind": "scripted", ...} | {"kind": "openai", "base_url", "model", "api_key_env"}
///   embed:   {"kind": "hashed", "dimension": 64} | {"kind": "openai", ...}
///   logprob: {"kind": "token_overlap"} | {"kind": "none"}
/// Throws Error(ConfigError).
ProviderBundle providers_from_json(const Json& j);

}  // namespace tafc
