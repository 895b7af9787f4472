#pragma once

#include <memory>
#include <regex>
#include <string>

#include "httplib.h"
#include "specprobe/provider.hpp"

namespace specprobe {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorKind::ConfigError, "invalid endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

/// Chat-style HTTP provider for OpenAI-compatible and Anthropic endpoints.
/// `endpoint` is the full URL of the completion route.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderHandle handle) : handle_(std::move(handle)), url_(parse_url(handle_.endpoint)) {}

  const std::string& id() const override { return handle_.provider_id; }
  const std::string& model() const override { return handle_.model; }

  std::string complete(const CompletionRequest& request) override {
    std::string key;
    if (!handle_.auth_env.empty()) {
      const char* v = std::getenv(handle_.auth_env.c_str());
      if (!v || !*v)
        throw Error(ErrorKind::ProviderError, "environment variable " + handle_.auth_env + " is not set",
                    {{"retryable", false}, {"provider", handle_.provider_id}});
      key = v;
    }

    httplib::Client client(url_.origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(600);
    httplib::Headers headers;
    Json body;
    const Json messages = Json::array({{{"role", "user"}, {"content", request.prompt}}});
    if (handle_.api_style == "anthropic") {
      if (!key.empty()) headers.emplace("x-api-key", key);
      headers.emplace("anthropic-version", "2023-06-01");
      body = {{"model", handle_.model},
              {"max_tokens", request.decoding.max_tokens},
              {"temperature", request.decoding.temperature},
              {"messages", messages}};
    } else {
      if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
      body = {{"model", handle_.model},
              {"max_tokens", request.decoding.max_tokens},
              {"temperature", request.decoding.temperature},
              {"messages", messages}};
    }

    auto res = client.Post(url_.path, headers, body.dump(), "application/json");
    if (!res)
      throw Error(ErrorKind::ProviderError, "transport failure: " + httplib::to_string(res.error()),
                  {{"retryable", true}, {"provider", handle_.provider_id}});
    if (res->status == 429 || res->status >= 500)
      throw Error(ErrorKind::ProviderError, fmt::format("HTTP {}", res->status),
                  {{"retryable", true}, {"status", res->status}, {"provider", handle_.provider_id}});
    if (res->status != 200)
      throw Error(ErrorKind::ProviderError, fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 300)),
                  {{"retryable", false}, {"status", res->status}, {"provider", handle_.provider_id}});

    const auto reply = Json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
      throw Error(ErrorKind::ProviderError, "reply body is not JSON", {{"retryable", false}});
    std::string text;
    try {
      if (handle_.api_style == "anthropic") {
        for (const auto& block : reply.at("content"))
          if (block.value("type", std::string()) == "text") text += block.at("text").get<std::string>();
      } else {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (content.is_string()) text = content.get<std::string>();
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::ProviderError, std::string("unexpected reply shape: ") + e.what(), {{"retryable", false}});
    }
    if (trim(text).empty())
      throw Error(ErrorKind::ProviderError, "provider " + handle_.provider_id + " returned an empty body",
                  {{"retryable", false}});
    return text;
  }

 private:
  ProviderHandle handle_;
  ParsedUrl url_;
};

/// Full client stack for a configured provider: HTTP, then parallelism/rate
/// limit/retry, then the record/replay cache.
inline std::shared_ptr<Provider> make_provider(const ProviderHandle& handle, const std::filesystem::path& cache_dir,
                                               CacheMode mode) {
  std::shared_ptr<Provider> p = std::make_shared<HttpProvider>(handle);
  RetryPolicy retry;
  retry.max_retries = handle.max_retries;
  p = std::make_shared<GuardedProvider>(p, handle.max_parallel, handle.requests_per_minute, retry);
  if (mode == CacheMode::Off) return p;
  return std::make_shared<CachingProvider>(p, ResponseCache(cache_dir), mode);
}

}  // namespace specprobe
