#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "specprobe/error.hpp"
#include "specprobe/util.hpp"

namespace specprobe {

struct Decoding {
  double temperature = 0.0;
  int max_tokens = 4096;
};

struct CompletionRequest {
  std::string prompt;
  Decoding decoding;
};

/// One configured model endpoint. Credentials are never stored here, only
/// the name of the environment variable holding them.
struct ProviderHandle {
  std::string provider_id;
  std::string endpoint;
  std::string model;
  std::string auth_env;
  int max_tokens = 4096;
  std::string api_style = "openai";  // "openai" chat completions or "anthropic" messages
  double requests_per_minute = 0;    // 0 = unlimited
  int max_parallel = 4;
  int max_retries = 3;

  Decoding decoding() const { return {0.0, max_tokens}; }
};

inline ProviderHandle provider_from_json(const Json& j) {
  auto need = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string())
      throw Error(ErrorKind::ConfigError, std::string("provider config missing string field '") + key + "'");
    return j.at(key).get<std::string>();
  };
  ProviderHandle h;
  h.provider_id = need("provider_id");
  h.endpoint = need("endpoint");
  h.model = need("model");
  h.auth_env = j.value("auth_env", std::string());
  h.max_tokens = j.value("max_tokens", 4096);
  h.api_style = j.value("api_style", std::string("openai"));
  h.requests_per_minute = j.value("requests_per_minute", 0.0);
  h.max_parallel = j.value("max_parallel", 4);
  h.max_retries = j.value("max_retries", 3);
  if (h.max_tokens <= 0) throw Error(ErrorKind::ConfigError, "max_tokens must be positive");
  if (h.api_style != "openai" && h.api_style != "anthropic")
    throw Error(ErrorKind::ConfigError, "api_style must be 'openai' or 'anthropic'");
  return h;
}

/// Provider config file: a JSON array of provider objects.
inline std::vector<ProviderHandle> load_provider_configs(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, "provider config is not JSON: " + std::string(e.what()));
  }
  if (!j.is_array()) throw Error(ErrorKind::ConfigError, "provider config must be a JSON array");
  std::vector<ProviderHandle> out;
  for (const auto& p : j) out.push_back(provider_from_json(p));
  return out;
}

inline const ProviderHandle& find_provider(const std::vector<ProviderHandle>& all, const std::string& id) {
  for (const auto& p : all)
    if (p.provider_id == id) return p;
  throw Error(ErrorKind::ConfigError, "no provider with id '" + id + "'");
}

class Provider {
 public:
  virtual ~Provider() = default;
  virtual const std::string& id() const = 0;
  virtual const std::string& model() const = 0;
  /// Returns the raw reply text. Throws Error(ProviderError) on transport,
  /// auth or empty-reply failures.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// In-process provider backed by a function; used for offline runs and tests.
class StubProvider : public Provider {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;

  StubProvider(std::string id, std::string model, Fn fn)
      : id_(std::move(id)), model_(std::move(model)), fn_(std::move(fn)) {}

  const std::string& id() const override { return id_; }
  const std::string& model() const override { return model_; }
  std::string complete(const CompletionRequest& request) override {
    auto reply = fn_(request);
    if (trim(reply).empty()) throw Error(ErrorKind::ProviderError, "provider " + id_ + " returned an empty body");
    return reply;
  }

 private:
  std::string id_;
  std::string model_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// record/replay cache

enum class CacheMode { Off, Record, Replay };

inline CacheMode parse_cache_mode(std::string_view s) {
  if (s == "off") return CacheMode::Off;
  if (s == "record") return CacheMode::Record;
  if (s == "replay") return CacheMode::Replay;
  throw Error(ErrorKind::ConfigError, "cache mode must be off, record or replay");
}

/// Reply cache keyed by (model, decoding, prompt). Entries store the full key
/// so a hash collision reads as a miss. Writes are atomic renames; identical
/// keys always carry identical values, so concurrent writers are harmless.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  static Json key_of(const std::string& model, const CompletionRequest& r) {
    return {{"model", model},
            {"temperature", r.decoding.temperature},
            {"max_tokens", r.decoding.max_tokens},
            {"prompt", r.prompt}};
  }

  std::filesystem::path path_for(const Json& key) const { return dir_ / (hex64(fnv1a64(key.dump())) + ".json"); }

  std::optional<std::string> get(const std::string& model, const CompletionRequest& r) const {
    const auto key = key_of(model, r);
    const auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    const auto entry = Json::parse(read_file(path), nullptr, false);
    if (entry.is_discarded() || entry.value("key", Json()) != key) return std::nullopt;
    return entry.at("reply").get<std::string>();
  }

  void put(const std::string& model, const CompletionRequest& r, const std::string& reply) const {
    const auto key = key_of(model, r);
    write_file_atomic(path_for(key), Json{{"key", key}, {"reply", reply}}.dump(2));
  }

 private:
  std::filesystem::path dir_;
};

class CachingProvider : public Provider {
 public:
  CachingProvider(std::shared_ptr<Provider> inner, ResponseCache cache, CacheMode mode, std::string id = {},
                  std::string model = {})
      : inner_(std::move(inner)), cache_(std::move(cache)), mode_(mode) {
    id_ = inner_ ? inner_->id() : std::move(id);
    model_ = inner_ ? inner_->model() : std::move(model);
  }

  const std::string& id() const override { return id_; }
  const std::string& model() const override { return model_; }

  std::string complete(const CompletionRequest& request) override {
    if (mode_ != CacheMode::Off) {
      if (auto hit = cache_.get(model_, request)) return *hit;
      if (mode_ == CacheMode::Replay)
        throw Error(ErrorKind::ProviderError, "replay cache miss for model " + model_, {{"retryable", false}});
    }
    if (!inner_) throw Error(ErrorKind::ProviderError, "no live provider behind cache");
    auto reply = inner_->complete(request);
    if (mode_ == CacheMode::Record) cache_.put(model_, request, reply);
    return reply;
  }

 private:
  std::shared_ptr<Provider> inner_;
  ResponseCache cache_;
  CacheMode mode_;
  std::string id_;
  std::string model_;
};

// ---------------------------------------------------------------------------
// rate limiting and retry

class TokenBucket {
 public:
  using Clock = std::chrono::steady_clock;

  /// rate: tokens per second; capacity: burst size. rate <= 0 disables.
  TokenBucket(double rate, double capacity) : rate_(rate), capacity_(capacity), tokens_(capacity), last_(Clock::now()) {}

  void acquire() {
    if (rate_ <= 0) return;
    std::unique_lock lock(mu_);
    for (;;) {
      refill();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  void refill() {
    const auto now = Clock::now();
    tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
  }

  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mu_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;

  std::chrono::milliseconds delay(int attempt) const {
    double d = static_cast<double>(base_delay.count());
    for (int i = 1; i < attempt; ++i) d *= multiplier;
    return std::chrono::milliseconds(static_cast<long long>(d));
  }
};

inline bool is_retryable(const Error& e) {
  return e.kind() == ErrorKind::ProviderError && e.detail().value("retryable", false);
}

/// Applies a parallelism bound, a token-bucket rate limit and exponential
/// backoff on retryable provider errors. The final error carries the
/// attempt count in its detail.
class GuardedProvider : public Provider {
 public:
  GuardedProvider(std::shared_ptr<Provider> inner, int max_parallel, double requests_per_minute, RetryPolicy retry)
      : inner_(std::move(inner)),
        max_parallel_(std::max(1, max_parallel)),
        bucket_(requests_per_minute / 60.0, std::max(1.0, requests_per_minute / 60.0)),
        retry_(retry) {}

  const std::string& id() const override { return inner_->id(); }
  const std::string& model() const override { return inner_->model(); }

  std::string complete(const CompletionRequest& request) override {
    Slot slot(*this);
    for (int attempt = 1;; ++attempt) {
      bucket_.acquire();
      try {
        return inner_->complete(request);
      } catch (const Error& e) {
        if (!is_retryable(e) || attempt > retry_.max_retries) {
          auto detail = e.detail();
          detail["attempts"] = attempt;
          throw Error(e.kind(), e.what(), detail);
        }
        std::this_thread::sleep_for(retry_.delay(attempt));
      }
    }
  }

 private:
  struct Slot {
    explicit Slot(GuardedProvider& p) : p_(p) {
      std::unique_lock lock(p_.mu_);
      p_.cv_.wait(lock, [&] { return p_.in_flight_ < p_.max_parallel_; });
      ++p_.in_flight_;
    }
    ~Slot() {
      {
        std::lock_guard lock(p_.mu_);
        --p_.in_flight_;
      }
      p_.cv_.notify_one();
    }
    GuardedProvider& p_;
  };

  std::shared_ptr<Provider> inner_;
  int max_parallel_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
  TokenBucket bucket_;
  RetryPolicy retry_;
};

}  // namespace specprobe
