#include "xprobe/model_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "xprobe/digest.hpp"

namespace xprobe {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string unique_suffix() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return std::to_string(rng());
}

}  // namespace

GenParams GenParams::defaults_for(Task task) {
  GenParams params;
  if (task == Task::translation) {
    params.max_new_tokens = 16;
    params.stop_sequences = {"\n"};
  } else {
    params.max_new_tokens = 32;
  }
  return params;
}

void GenParams::check() const {
  if (max_new_tokens < 1) throw GatewayError("max_new_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw GatewayError("temperature must be >= 0");
}

void to_json(json& out, const GenParams& params) {
  out = json{{"max_new_tokens", params.max_new_tokens},
             {"temperature", params.temperature},
             {"stop", params.stop_sequences},
             {"seed", params.seed ? json(*params.seed) : json(nullptr)}};
}

void from_json(const json& in, GenParams& params) {
  params = GenParams{};
  params.max_new_tokens = in.at("max_new_tokens").get<int>();
  params.temperature = in.at("temperature").get<double>();
  params.stop_sequences = in.value("stop", std::vector<std::string>{});
  if (in.contains("seed") && !in.at("seed").is_null()) params.seed = in.at("seed").get<std::int64_t>();
}

void to_json(json& out, const CompletionRecord& record) {
  out = json{{"prompt_text", record.prompt_text},
             {"completion_text", record.completion_text},
             {"backend_id", record.backend_id},
             {"params", record.params},
             {"cached", record.cached},
             {"latency_ms", record.latency_ms},
             {"fallback", record.fallback},
             {"error", record.error ? json(*record.error) : json(nullptr)}};
}

void from_json(const json& in, CompletionRecord& record) {
  record = CompletionRecord{};
  record.prompt_text = in.at("prompt_text").get<std::string>();
  record.completion_text = in.at("completion_text").get<std::string>();
  record.backend_id = in.at("backend_id").get<std::string>();
  record.params = in.at("params").get<GenParams>();
  record.cached = in.value("cached", false);
  record.latency_ms = in.value("latency_ms", 0.0);
  record.fallback = in.value("fallback", false);
  if (in.contains("error") && !in.at("error").is_null()) record.error = in.at("error").get<std::string>();
}

MockBackend::MockBackend(std::map<std::string, std::string> entries, std::string fallback,
                         std::string id)
    : entries_(std::move(entries)), fallback_(std::move(fallback)), id_(std::move(id)) {}

MockBackend MockBackend::load(const std::filesystem::path& fixture) {
  std::ifstream in(fixture, std::ios::binary);
  if (!in) throw GatewayError("cannot read mock fixture " + fixture.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw GatewayError(fixture.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_object()) {
    throw GatewayError(fixture.string() + ": expected {\"fallback\": str, \"entries\": {...}}");
  }
  std::map<std::string, std::string> entries;
  for (const auto& [prompt, completion] : doc["entries"].items()) {
    if (!completion.is_string()) {
      throw GatewayError(fixture.string() + ": completion for a prompt is not a string");
    }
    entries.emplace(prompt, completion.get<std::string>());
  }
  return MockBackend(std::move(entries), doc.value("fallback", std::string{}),
                     "mock:" + fixture.filename().string());
}

RawCompletion MockBackend::generate(const std::string& prompt, const GenParams& /*params*/) {
  auto it = entries_.find(prompt);
  if (it == entries_.end()) return {fallback_, true};
  return {it->second, false};
}

HttpBackend::HttpBackend(Options options) : options_(std::move(options)) {
  std::string url = options_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw GatewayError("base URL needs a scheme (http:// or https://): " + options_.base_url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
}

HttpBackend HttpBackend::from_env(std::string model) {
  const char* base = std::getenv("XPROBE_API_BASE");
  if (!base || !*base) throw GatewayError("XPROBE_API_BASE is not set");
  const char* key = std::getenv("XPROBE_API_KEY");
  return HttpBackend(Options{base, std::move(model), key ? key : "", std::chrono::seconds(60)});
}

json HttpBackend::request_body(const std::string& prompt, const GenParams& params) const {
  json body{{"model", options_.model},
            {"prompt", prompt},
            {"max_tokens", params.max_new_tokens},
            {"temperature", params.temperature},
            {"stop", params.stop_sequences}};
  if (params.seed) body["seed"] = *params.seed;
  return body;
}

RawCompletion HttpBackend::generate(const std::string& prompt, const GenParams& params) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }

  auto res = client.Post(path_prefix_ + "/v1/completions", headers,
                         request_body(prompt, params).dump(), "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("server returned HTTP " + std::to_string(res->status));
  }

  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::parse_error&) {
    throw ServerError("HTTP " + std::to_string(res->status) + ": response is not JSON");
  }
  if (doc.contains("error") && !doc["error"].is_null()) {
    throw ServerError("server error: " + doc["error"].dump());
  }
  if (res->status != 200) throw ServerError("server returned HTTP " + std::to_string(res->status));
  try {
    return {doc.at("choices").at(0).at("text").get<std::string>(), false};
  } catch (const json::exception&) {
    throw ServerError("response has no choices[0].text");
  }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(std::string_view backend_id, std::string_view prompt,
                               const GenParams& params) {
  // json objects serialize with sorted keys, which canonicalizes the params.
  const json material{{"backend", backend_id}, {"prompt", prompt}, {"params", params}};
  return sha256_hex(material.dump());
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<CompletionRecord> ResponseCache::get(const std::string& key) const {
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const json doc = json::parse(in);
    if (doc.value("key", std::string{}) != key) return std::nullopt;
    return doc.at("record").get<CompletionRecord>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const CompletionRecord& record) const {
  const auto final_path = entry_path(key);
  const auto tmp = dir_ / (key + ".tmp." + unique_suffix());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw GatewayError("cannot write cache entry " + tmp.string());
    out << json{{"key", key}, {"record", record}}.dump();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw GatewayError("cannot commit cache entry " + final_path.string());
  }
}

std::string postprocess_completion(std::string_view prompt, std::string text,
                                   const GenParams& params) {
  if (!prompt.empty() && text.starts_with(prompt)) text.erase(0, prompt.size());

  std::size_t cut = text.size();
  for (const auto& stop : params.stop_sequences) {
    if (stop.empty()) continue;
    cut = std::min(cut, text.find(stop));
  }
  text.resize(cut);

  int words = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool starts_word = !is_space(text[i]) && (i == 0 || is_space(text[i - 1]));
    if (!starts_word) continue;
    if (++words > params.max_new_tokens) {
      std::size_t end = i;
      while (end > 0 && is_space(text[end - 1])) --end;
      text.resize(end);
      break;
    }
  }
  return text;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::optional<ResponseCache> cache,
                 RetryPolicy retry)
    : backend_(std::move(backend)), cache_(std::move(cache)), retry_(std::move(retry)) {
  if (!backend_) throw GatewayError("gateway needs a backend");
  if (!retry_.sleep) {
    retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

RawCompletion Gateway::generate_with_retry(const std::string& prompt, const GenParams& params) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return backend_->generate(prompt, params);
    } catch (const TransportError& e) {
      if (attempt >= retry_.backoff.size()) {
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt + 1) +
                             " attempts)");
      }
      retry_.sleep(retry_.backoff[attempt]);
    }
  }
}

CompletionRecord Gateway::complete(const std::string& prompt, const GenParams& params) {
  params.check();
  const auto start = Clock::now();
  const std::string backend_id = backend_->id();
  std::string key;
  if (cache_) {
    key = ResponseCache::key(backend_id, prompt, params);
    if (auto hit = cache_->get(key)) {
      hit->cached = true;
      hit->latency_ms = elapsed_ms(start);
      return *std::move(hit);
    }
  }

  RawCompletion raw = generate_with_retry(prompt, params);
  CompletionRecord record;
  record.prompt_text = prompt;
  record.completion_text = postprocess_completion(prompt, std::move(raw.text), params);
  record.backend_id = backend_id;
  record.params = params;
  record.fallback = raw.fallback;
  record.latency_ms = elapsed_ms(start);
  if (cache_ && !record.fallback) cache_->put(key, record);
  return record;
}

std::vector<CompletionRecord> Gateway::complete_batch(std::span<const std::string> prompts,
                                                      const GenParams& params,
                                                      std::size_t parallelism) {
  if (parallelism < 1) throw GatewayError("parallelism must be >= 1");
  params.check();
  std::vector<CompletionRecord> results(prompts.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        results[i] = complete(prompts[i], params);
      } catch (const std::exception& e) {
        CompletionRecord failed;
        failed.prompt_text = prompts[i];
        failed.backend_id = backend_->id();
        failed.params = params;
        failed.error = e.what();
        results[i] = std::move(failed);
      }
    }
  };

  const std::size_t n_workers = std::min(parallelism, prompts.size());
  if (n_workers <= 1) {
    worker();
    return results;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace xprobe
