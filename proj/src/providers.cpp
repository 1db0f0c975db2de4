#include "tafc/providers.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "tafc/error.hpp"

namespace tafc {

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

HashedBagOfWordsEmbedder::HashedBagOfWordsEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

std::size_t HashedBagOfWordsEmbedder::bucket(std::string_view token, std::size_t dimension) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h % dimension);
}

std::vector<double> HashedBagOfWordsEmbedder::embed(std::string_view text) {
  std::vector<double> v(dimension_, 0.0);
  for (const auto& t : word_tokens(text)) v[bucket(t, dimension_)] += 1.0;
  return v;
}

std::optional<double> TokenOverlapLogProb::logprob(std::string_view text, std::string_view context) {
  const auto text_tokens = word_tokens(text);
  const auto context_tokens = word_tokens(context);
  std::map<std::string, int> counts;
  std::set<std::string> vocabulary;
  for (const auto& t : context_tokens) {
    ++counts[t];
    vocabulary.insert(t);
  }
  vocabulary.insert(text_tokens.begin(), text_tokens.end());
  const double denom = static_cast<double>(context_tokens.size() + vocabulary.size());
  double total = 0.0;
  for (const auto& t : text_tokens) {
    auto it = counts.find(t);
    const double c = it == counts.end() ? 0.0 : it->second;
    total += std::log((c + 1.0) / denom);
  }
  return total;
}

ScriptedChatProvider::ScriptedChatProvider(std::vector<Rule> rules, std::string fallback)
    : rules_(std::move(rules)), cursor_(rules_.size(), 0), fallback_(std::move(fallback)) {}

void ScriptedChatProvider::add_rule(Rule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
  cursor_.push_back(0);
}

void ScriptedChatProvider::set_fallback(std::string fallback) {
  std::lock_guard lock(mutex_);
  fallback_ = std::move(fallback);
}

std::string ScriptedChatProvider::complete(const std::string& system, const std::string& user) {
  const std::string prompt = system + "\n" + user;
  std::lock_guard lock(mutex_);
  prompts_.push_back(prompt);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const Rule& rule = rules_[i];
    bool match = true;
    for (const auto& s : rule.contains_all) match = match && prompt.find(s) != std::string::npos;
    for (const auto& s : rule.contains_none) match = match && prompt.find(s) == std::string::npos;
    if (!match || rule.responses.empty()) continue;
    const std::size_t k = std::min(cursor_[i], rule.responses.size() - 1);
    ++cursor_[i];
    return rule.responses[k];
  }
  return fallback_;
}

std::size_t ScriptedChatProvider::calls() const {
  std::lock_guard lock(mutex_);
  return prompts_.size();
}

std::vector<std::string> ScriptedChatProvider::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::shared_ptr<ScriptedChatProvider> ScriptedChatProvider::from_json(const Json& j) {
  auto provider = std::make_shared<ScriptedChatProvider>();
  try {
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) {
        Rule rule;
        if (r.contains("contains_all")) rule.contains_all = r["contains_all"].get<std::vector<std::string>>();
        if (r.contains("contains_none")) rule.contains_none = r["contains_none"].get<std::vector<std::string>>();
        if (r.contains("responses")) rule.responses = r["responses"].get<std::vector<std::string>>();
        if (r.contains("response")) rule.responses.push_back(r["response"].get<std::string>());
        provider->add_rule(std::move(rule));
      }
    }
    if (j.contains("fallback")) provider->set_fallback(j["fallback"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("scripted chat provider: ") + e.what());
  }
  return provider;
}

namespace {

std::string credential(const Json& j) {
  if (j.contains("api_key") && j["api_key"].is_string()) return j["api_key"].get<std::string>();
  const std::string env = j.value("api_key_env", std::string("TAFC_API_KEY"));
  const char* v = std::getenv(env.c_str());
  return v == nullptr ? std::string() : std::string(v);
}

std::string base_url(const Json& j) {
  if (j.contains("base_url")) return j["base_url"].get<std::string>();
  const char* v = std::getenv("TAFC_UPSTREAM_URL");
  if (v == nullptr || *v == '\0') throw Error(ErrorCode::ConfigError, "provider needs base_url or TAFC_UPSTREAM_URL");
  return v;
}

}  // namespace

ProviderBundle providers_from_json(const Json& j) {
  ProviderBundle bundle;
  try {
    const Json chat = j.value("chat", Json{{"kind", "scripted"}});
    const std::string chat_kind = chat.value("kind", std::string("scripted"));
    if (chat_kind == "scripted") {
      bundle.chat = ScriptedChatProvider::from_json(chat);
    } else if (chat_kind == "openai") {
      bundle.chat = std::make_shared<HttpChatProvider>(base_url(chat), credential(chat), chat.value("model", std::string()),
                                                       chat.value("temperature", 0.1),
                                                       chat.value("timeout_seconds", 30.0));
    } else {
      throw Error(ErrorCode::ConfigError, "unknown chat provider kind '" + chat_kind + "'");
    }

    const Json embed = j.value("embed", Json{{"kind", "hashed"}});
    const std::string embed_kind = embed.value("kind", std::string("hashed"));
    if (embed_kind == "hashed") {
      bundle.embed = std::make_shared<HashedBagOfWordsEmbedder>(
          embed.value("dimension", HashedBagOfWordsEmbedder::kDefaultDimension));
    } else if (embed_kind == "openai") {
      bundle.embed = std::make_shared<HttpEmbeddingProvider>(base_url(embed), credential(embed),
                                                             embed.value("model", std::string()),
                                                             embed.value("timeout_seconds", 30.0));
    } else {
      throw Error(ErrorCode::ConfigError, "unknown embedding provider kind '" + embed_kind + "'");
    }

    const Json logprob = j.value("logprob", Json{{"kind", "token_overlap"}});
    const std::string lp_kind = logprob.value("kind", std::string("token_overlap"));
    if (lp_kind == "token_overlap") {
      bundle.logprob = std::make_shared<TokenOverlapLogProb>();
    } else if (lp_kind != "none") {
      throw Error(ErrorCode::ConfigError, "unknown logprob provider kind '" + lp_kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("providers: ") + e.what());
  }
  return bundle;
}

}  // namespace tafc
