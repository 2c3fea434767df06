#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xprobe/common.hpp"

namespace xprobe {

class GatewayError : public Error {
 public:
  using Error::Error;
};

/// Connection-level failure; retried by the gateway.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// The server answered with an error payload; not retried.
class ServerError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

struct GenParams {
  int max_new_tokens = 32;
  double temperature = 0.0;  // 0 means greedy
  std::vector<std::string> stop_sequences;
  std::optional<std::int64_t> seed;

  /// Greedy decoding; 32 tokens for recall, 16 tokens with a newline stop for translation.
  static GenParams defaults_for(Task task);

  /// Throws GatewayError on max_new_tokens < 1 or negative temperature.
  void check() const;
  bool operator==(const GenParams&) const = default;
};

void to_json(nlohmann::json& out, const GenParams& params);
void from_json(const nlohmann::json& in, GenParams& params);

struct CompletionRecord {
  std::string prompt_text;
  std::string completion_text;
  std::string backend_id;
  GenParams params;
  bool cached = false;
  double latency_ms = 0.0;
  bool fallback = false;  // mock had no entry for the prompt
  std::optional<std::string> error;

  bool ok() const { return !error.has_value(); }
};

void to_json(nlohmann::json& out, const CompletionRecord& record);
void from_json(const nlohmann::json& in, CompletionRecord& record);

/// What a backend returns before gateway post-processing.
struct RawCompletion {
  std::string text;
  bool fallback = false;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  /// May throw TransportError (retryable) or ServerError.
  virtual RawCompletion generate(const std::string& prompt, const GenParams& params) = 0;
};

/// Exact-prompt lookup table with a declared fallback string.
class MockBackend : public Backend {
 public:
  MockBackend(std::map<std::string, std::string> entries, std::string fallback,
              std::string id = "mock");
  /// Fixture: { "fallback": str, "entries": { prompt: completion } }.
  static MockBackend load(const std::filesystem::path& fixture);

  std::string id() const override { return id_; }
  RawCompletion generate(const std::string& prompt, const GenParams& params) override;

 private:
  std::map<std::string, std::string> entries_;
  std::string fallback_;
  std::string id_;
};

/// OpenAI-compatible text completions over HTTP(S).
class HttpBackend : public Backend {
 public:
  struct Options {
    std::string base_url;
    std::string model;
    std::string api_key;
    std::chrono::seconds timeout{60};
  };

  explicit HttpBackend(Options options);
  /// Reads XPROBE_API_BASE and XPROBE_API_KEY.
  static HttpBackend from_env(std::string model);

  std::string id() const override { return "http:" + options_.model; }
  RawCompletion generate(const std::string& prompt, const GenParams& params) override;

  /// Request body sent for `prompt`; exposed for wire-format checks.
  nlohmann::json request_body(const std::string& prompt, const GenParams& params) const;

 private:
  Options options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Append-only directory of serialized CompletionRecords, one file per key.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(std::string_view backend_id, std::string_view prompt,
                         const GenParams& params);

  /// Missing or unreadable entries are misses.
  std::optional<CompletionRecord> get(const std::string& key) const;
  void put(const std::string& key, const CompletionRecord& record) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;
  std::filesystem::path dir_;
};

struct RetryPolicy {
  /// Delay before each retry; attempts = 1 + backoff.size().
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500),
                                                 std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(2000)};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

/// Continuation after echo stripping, stop-sequence truncation and the token budget.
/// Tokens are counted as whitespace-delimited words.
std::string postprocess_completion(std::string_view prompt, std::string text,
                                   const GenParams& params);

class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::optional<ResponseCache> cache = std::nullopt,
          RetryPolicy retry = {});

  /// Throws GatewayError once retries are exhausted.
  CompletionRecord complete(const std::string& prompt, const GenParams& params);

  /// Results in input order; failures become records with `error` set.
  std::vector<CompletionRecord> complete_batch(std::span<const std::string> prompts,
                                               const GenParams& params, std::size_t parallelism);

  std::string backend_id() const { return backend_->id(); }

 private:
  RawCompletion generate_with_retry(const std::string& prompt, const GenParams& params);

  std::shared_ptr<Backend> backend_;
  std::optional<ResponseCache> cache_;
  RetryPolicy retry_;
};

}  // namespace xprobe
