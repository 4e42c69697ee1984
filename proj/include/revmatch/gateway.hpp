// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Provider-agnostic chat completion with a content-addressed transcript store.
//
// Modes:
//   live   - every call goes to the provider, nothing is stored
//   record - the store is consulted first; misses go to the provider and are persisted
//   replay - only the store is consulted; a miss is an error and the provider is never touched
//
// Transcript files live at <dir>/<transcript_key>.json and hold the request and response.

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "revmatch/error.hpp"
#include "revmatch/hashing.hpp"
#include "revmatch/http.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/tokenize.hpp"

namespace revmatch {

enum class Purpose
{
  review_generation,
  extraction,
  matching
};

inline std::string_view to_string(Purpose p)
{
  switch (p)
  {
  case Purpose::review_generation: return "review_generation";
  case Purpose::extraction: return "extraction";
  case Purpose::matching: return "matching";
  }
  return "extraction";
}

struct Sampling
{
  double temperature       = 0.0;
  int    max_output_tokens = 1024;

  bool operator==(Sampling const &) const = default;
};

struct CompletionRequest
{
  std::string model_id;
  std::string prompt_text;
  Sampling    sampling;
  Purpose     purpose = Purpose::extraction;
};

enum class FinishState
{
  complete,
  truncated,
  refused
};

inline std::string_view to_string(FinishState f)
{
  switch (f)
  {
  case FinishState::complete: return "complete";
  case FinishState::truncated: return "truncated";
  case FinishState::refused: return "refused";
  }
  return "complete";
}

inline FinishState parse_finish_state(std::string_view s)
{
  if (s == "complete")
    return FinishState::complete;
  if (s == "truncated")
    return FinishState::truncated;
  if (s == "refused")
    return FinishState::refused;
  throw ParseError("unknown finish_state '" + std::string(s) + "'");
}

struct CompletionResponse
{
  std::string text;
  FinishState finish_state = FinishState::complete;
  std::string transcript_key;
};

enum class GatewayMode
{
  live,
  record,
  replay
};

inline std::string_view to_string(GatewayMode m)
{
  switch (m)
  {
  case GatewayMode::live: return "live";
  case GatewayMode::record: return "record";
  case GatewayMode::replay: return "replay";
  }
  return "replay";
}

inline GatewayMode parse_gateway_mode(std::string_view s)
{
  if (s == "live")
    return GatewayMode::live;
  if (s == "record")
    return GatewayMode::record;
  if (s == "replay")
    return GatewayMode::replay;
  throw ConfigError("unknown gateway mode '" + std::string(s) + "' (expected live, record or replay)");
}

/// The exact bytes hashed into a transcript key: compact JSON with sorted keys.
inline std::string canonical_request(CompletionRequest const &r)
{
  nlohmann::json j;  // std::map-backed, so keys serialise sorted
  j["model_id"]          = r.model_id;
  j["prompt_text"]       = r.prompt_text;
  j["temperature"]       = r.sampling.temperature;
  j["max_output_tokens"] = r.sampling.max_output_tokens;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

/// SHA-256 (hex) of canonical_request.
inline std::string transcript_key(CompletionRequest const &r)
{
  return sha256_hex(canonical_request(r));
}

// ---------------------------------------------------------------------------

/// What a provider returns for one request.
struct ProviderReply
{
  std::string text;
  FinishState finish_state = FinishState::complete;
};

class ChatProvider
{
public:
  virtual ~ChatProvider()                                         = default;
  virtual ProviderReply complete(CompletionRequest const &request) = 0;
};

/// OpenAI-compatible chat-completions endpoint.
class OpenAIChatProvider final : public ChatProvider
{
public:
  OpenAIChatProvider(std::string endpoint, std::string api_key, Transport &transport, RetryPolicy retry)
    : endpoint_(std::move(endpoint))
    , api_key_(std::move(api_key))
    , transport_(transport)
    , retry_(retry)
  {}

  ProviderReply complete(CompletionRequest const &request) override
  {
    json body;
    body["model"]       = request.model_id;
    body["messages"]    = json::array({json{{"role", "user"}, {"content", request.prompt_text}}});
    body["temperature"] = request.sampling.temperature;
    body["max_tokens"]  = request.sampling.max_output_tokens;

    HttpRequest req;
    req.method       = "POST";
    req.url          = endpoint_;
    req.content_type = "application/json";
    req.body         = body.dump();
    req.headers.emplace_back("Authorization", "Bearer " + api_key_);

    auto const response = send_with_retries(transport_, req, retry_);
    json       reply;
    try
    {
      reply = json::parse(response.body);
      auto const &choice  = reply.at("choices").at(0);
      auto const &message = choice.at("message");
      ProviderReply out;
      if (message.contains("content") && message.at("content").is_string())
        out.text = message.at("content").get<std::string>();
      auto const finish = choice.value("finish_reason", "stop");
      if (message.contains("refusal") && message.at("refusal").is_string())
      {
        out.finish_state = FinishState::refused;
        if (out.text.empty())
          out.text = message.at("refusal").get<std::string>();
      }
      else if (finish == "length")
        out.finish_state = FinishState::truncated;
      else if (finish == "content_filter")
        out.finish_state = FinishState::refused;
      return out;
    }
    catch (json::exception const &e)
    {
      throw NetworkError("provider returned an unexpected payload: " + std::string(e.what()), response.status, false);
    }
  }

private:
  std::string endpoint_;
  std::string api_key_;
  Transport  &transport_;
  RetryPolicy retry_;
};

// ---------------------------------------------------------------------------

/// Directory of transcript files named by key. Writes go through a temp file and rename.
class TranscriptStore
{
public:
  explicit TranscriptStore(std::filesystem::path dir)
    : dir_(std::move(dir))
  {}

  std::filesystem::path const &dir() const noexcept { return dir_; }

  std::filesystem::path path_for(std::string const &key) const { return dir_ / (key + ".json"); }

  std::optional<CompletionResponse> load(std::string const &key) const
  {
    auto const path = path_for(key);
    if (!std::filesystem::exists(path))
      return std::nullopt;
    try
    {
      json const  j        = json::parse(read_file(path.string()));
      auto const &response = j.at("response");
      return CompletionResponse{response.at("text").get<std::string>(),
                                parse_finish_state(response.value("finish_state", "complete")), key};
    }
    catch (json::exception const &e)
    {
      throw ParseError("corrupt transcript " + path.string() + ": " + e.what());
    }
  }

  void save(CompletionRequest const &request, CompletionResponse const &response) const
  {
    std::filesystem::create_directories(dir_);
    json j;
    j["transcript_key"]                = response.transcript_key;
    j["request"]["model_id"]          = request.model_id;
    j["request"]["purpose"]           = std::string(to_string(request.purpose));
    j["request"]["temperature"]       = request.sampling.temperature;
    j["request"]["max_output_tokens"] = request.sampling.max_output_tokens;
    j["request"]["prompt_text"]       = request.prompt_text;
    j["response"]["finish_state"]     = std::string(to_string(response.finish_state));
    j["response"]["text"]             = response.text;

    write_file_atomic(path_for(response.transcript_key), dump_stable(j));
  }

private:
  std::filesystem::path dir_;
};

struct GatewayConfig
{
  GatewayMode                mode          = GatewayMode::replay;
  std::optional<std::size_t> model_window;  // checked when set
  std::string                tokenizer_id  = std::string(kDefaultTokenizer);
  std::ptrdiff_t             max_in_flight = 4;
};

/// Thread-safe completion gateway.
class Gateway
{
public:
  Gateway(GatewayConfig config, std::optional<TranscriptStore> store, std::shared_ptr<ChatProvider> provider)
    : config_(std::move(config))
    , store_(std::move(store))
    , provider_(std::move(provider))
    , slots_(std::max<std::ptrdiff_t>(1, config_.max_in_flight))
  {
    if (config_.mode != GatewayMode::live && !store_)
      throw ConfigError("record/replay mode needs a transcript directory");
    if (config_.mode != GatewayMode::replay && !provider_)
      throw ConfigError("live/record mode needs a configured provider");
  }

  GatewayMode mode() const noexcept { return config_.mode; }

  /// Number of requests actually sent to the provider.
  std::size_t provider_calls() const noexcept { return provider_calls_.load(); }

  void validate(CompletionRequest const &r) const
  {
    if (r.prompt_text.empty())
      throw PreconditionError("completion prompt is empty");
    if (r.model_id.empty())
      throw PreconditionError("completion model_id is empty");
    if (r.sampling.temperature < 0)
      throw PreconditionError("temperature must be >= 0");
    if (r.sampling.max_output_tokens <= 0)
      throw PreconditionError("max_output_tokens must be > 0");
    if (config_.model_window)
    {
      auto const prompt_tokens = count_tokens(r.prompt_text, config_.tokenizer_id);
      if (prompt_tokens + static_cast<std::size_t>(r.sampling.max_output_tokens) > *config_.model_window)
        throw PreconditionError("prompt (" + std::to_string(prompt_tokens) + " tokens) + max_output_tokens (" +
                                std::to_string(r.sampling.max_output_tokens) + ") exceeds the model window (" +
                                std::to_string(*config_.model_window) + ")");
    }
  }

  CompletionResponse complete(CompletionRequest const &request)
  {
    validate(request);
    auto const key = transcript_key(request);
    switch (config_.mode)
    {
    case GatewayMode::replay:
    {
      auto stored = store_->load(key);
      if (!stored)
        throw ReplayMiss(key);
      return *stored;
    }
    case GatewayMode::live: return call_provider(request, key);
    case GatewayMode::record:
    {
      KeyClaim claim(*this, key);
      if (auto stored = store_->load(key))
        return *stored;
      auto response = call_provider(request, key);
      store_->save(request, response);
      return response;
    }
    }
    throw Error("unreachable gateway mode");
  }

private:
  // Serialises concurrent record-mode calls for the same key so only one reaches the provider.
  class KeyClaim
  {
  public:
    KeyClaim(Gateway &g, std::string key)
      : gateway_(g)
      , key_(std::move(key))
    {
      std::unique_lock lock(gateway_.keys_mutex_);
      gateway_.keys_cv_.wait(lock, [&] { return !gateway_.keys_in_progress_.contains(key_); });
      gateway_.keys_in_progress_.insert(key_);
    }
    ~KeyClaim()
    {
      {
        std::scoped_lock lock(gateway_.keys_mutex_);
        gateway_.keys_in_progress_.erase(key_);
      }
      gateway_.keys_cv_.notify_all();
    }
    KeyClaim(KeyClaim const &)            = delete;
    KeyClaim &operator=(KeyClaim const &) = delete;

  private:
    Gateway    &gateway_;
    std::string key_;
  };

  CompletionResponse call_provider(CompletionRequest const &request, std::string const &key)
  {
    slots_.acquire();
    struct Release
    {
      std::counting_semaphore<> &s;
      ~Release() { s.release(); }
    } release{slots_};
    ++provider_calls_;
    auto reply = provider_->complete(request);
    return CompletionResponse{std::move(reply.text), reply.finish_state, key};
  }

  GatewayConfig                  config_;
  std::optional<TranscriptStore> store_;
  std::shared_ptr<ChatProvider>  provider_;
  std::counting_semaphore<>      slots_;
  std::atomic<std::size_t>       provider_calls_{0};
  std::mutex                     keys_mutex_;
  std::condition_variable        keys_cv_;
  std::set<std::string>          keys_in_progress_;
};

}  // namespace revmatch
