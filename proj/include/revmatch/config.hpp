// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Declarative run configuration, loaded from JSON and overridable from the command line.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/extraction.hpp"
#include "revmatch/feedback.hpp"
#include "revmatch/gateway.hpp"
#include "revmatch/ingest.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/matching.hpp"
#include "revmatch/metrics.hpp"
#include "revmatch/tokenize.hpp"

namespace revmatch {

struct GatewaySettings
{
  std::string                endpoint      = "https://api.openai.com/v1/chat/completions";
  std::string                model_id      = "gpt-4";
  std::string                api_key_env   = "OPENAI_API_KEY";
  std::ptrdiff_t             max_in_flight = 4;
  int                        timeout_s     = 120;
  std::optional<std::size_t> model_window  = 8192;
  RetryPolicy                retry;
};

struct RunConfig
{
  GatewaySettings gateway;
  GatewayMode     mode = GatewayMode::replay;

  std::string tokenizer_id = std::string(kDefaultTokenizer);
  std::string vocab_path;  // registers tokenizer_id as WordPiece when set
  std::size_t input_budget = 6500;

  Sampling review_sampling{0.0, 1500};
  Sampling extraction_sampling{0.0, 1024};
  Sampling matching_sampling{0.0, 1024};
  std::string extraction_template_path;

  VenueFlavor                        default_flavor = VenueFlavor::nature_family;
  std::map<std::string, VenueFlavor> venue_flavors;

  int                          threshold = kDefaultThreshold;
  bool                         control   = true;
  std::optional<std::uint64_t> seed;
  int                          bootstrap_resamples = 1000;
  int                          permutations        = 10000;
  std::vector<StratumKind>     strata              = {StratumKind::by_venue};
  ShuffleRule                  shuffle_rule        = ShuffleRule::nature_journal_and_category_set;

  std::string corpus_path;
  std::string transcripts_dir = "transcripts";
  std::string out_dir         = "runs";
  std::string aspect_schema_path;

  json pdf_service = json::object();
  json platform    = json::object();

  /// Relative paths in a config file are resolved against the file's directory.
  static RunConfig from_json(json const &j, std::filesystem::path const &base = {})
  {
    RunConfig c;
    auto path = [&](json const &obj, char const *key, std::string const &fallback) {
      if (!obj.contains(key))
        return fallback;
      std::filesystem::path p = obj.at(key).get<std::string>();
      if (p.is_relative() && !base.empty())
        p = base / p;
      return p.lexically_normal().string();
    };
    auto sampling = [](json const &obj, Sampling s) {
      s.temperature       = obj.value("temperature", s.temperature);
      s.max_output_tokens = obj.value("max_output_tokens", s.max_output_tokens);
      return s;
    };
    try
    {
      if (j.contains("gateway"))
      {
        auto const &g             = j.at("gateway");
        c.gateway.endpoint        = g.value("endpoint", c.gateway.endpoint);
        c.gateway.model_id        = g.value("model_id", c.gateway.model_id);
        c.gateway.api_key_env     = g.value("api_key_env", c.gateway.api_key_env);
        c.gateway.max_in_flight   = g.value("max_in_flight", c.gateway.max_in_flight);
        c.gateway.timeout_s       = g.value("timeout_s", c.gateway.timeout_s);
        c.gateway.retry.max_retries = g.value("max_retries", c.gateway.retry.max_retries);
        c.gateway.retry.base_delay =
          std::chrono::milliseconds(g.value("retry_base_delay_ms", c.gateway.retry.base_delay.count()));
        if (g.contains("model_window"))
          c.gateway.model_window = g.at("model_window").is_null()
                                     ? std::nullopt
                                     : std::optional<std::size_t>(g.at("model_window").get<std::size_t>());
      }
      if (j.contains("mode"))
        c.mode = parse_gateway_mode(j.at("mode").get<std::string>());
      c.tokenizer_id = j.value("tokenizer_id", c.tokenizer_id);
      c.vocab_path   = path(j, "vocab_path", "");
      c.input_budget = j.value("input_budget", c.input_budget);
      if (j.contains("sampling"))
      {
        auto const &s = j.at("sampling");
        if (s.contains("review"))
          c.review_sampling = sampling(s.at("review"), c.review_sampling);
        if (s.contains("extraction"))
          c.extraction_sampling = sampling(s.at("extraction"), c.extraction_sampling);
        if (s.contains("matching"))
          c.matching_sampling = sampling(s.at("matching"), c.matching_sampling);
      }
      c.extraction_template_path = path(j, "extraction_template", "");
      if (j.contains("flavor"))
        c.default_flavor = parse_venue_flavor(j.at("flavor").get<std::string>());
      if (j.contains("venue_flavors"))
        for (auto const &[venue, flavor] : j.at("venue_flavors").items())
          c.venue_flavors[venue] = parse_venue_flavor(flavor.get<std::string>());
      c.threshold = j.value("threshold", c.threshold);
      c.control   = j.value("control", c.control);
      if (j.contains("seed"))
        c.seed = j.at("seed").get<std::uint64_t>();
      c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
      c.permutations        = j.value("permutations", c.permutations);
      if (j.contains("strata"))
      {
        c.strata.clear();
        for (auto const &s : j.at("strata"))
        {
          auto const kind = parse_stratum_kind(s.get<std::string>());
          if (!kind)
            throw ConfigError("unknown stratum kind " + s.dump());
          c.strata.push_back(*kind);
        }
      }
      if (j.contains("shuffle_rule"))
        c.shuffle_rule = parse_shuffle_rule(j.at("shuffle_rule").get<std::string>());
      c.corpus_path        = path(j, "corpus", c.corpus_path);
      c.transcripts_dir    = path(j, "transcripts", c.transcripts_dir);
      c.out_dir            = path(j, "out", c.out_dir);
      c.aspect_schema_path = path(j, "aspect_schema", "");
      c.pdf_service        = j.value("pdf_service", json::object());
      c.platform           = j.value("platform", json::object());
    }
    catch (json::exception const &e)
    {
      throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
  }

  static RunConfig load(std::string const &path)
  {
    json j;
    try
    {
      j = json::parse(read_file(path));
    }
    catch (json::exception const &e)
    {
      throw ConfigError(path + ": " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path());
  }

  /// Checks ranges and that referenced inputs exist. `needs_corpus` for commands reading one,
  /// `needs_gateway` for commands that talk to the model.
  void validate(bool needs_corpus, bool needs_gateway = true) const
  {
    if (threshold < kMinSimilarity || threshold > kMaxSimilarity)
      throw ConfigError("threshold must lie in [5, 10], got " + std::to_string(threshold));
    if (gateway.max_in_flight < 1)
      throw ConfigError("gateway.max_in_flight must be >= 1");
    if (bootstrap_resamples < 1 || permutations < 1)
      throw ConfigError("bootstrap_resamples and permutations must be >= 1");
    if (needs_corpus)
    {
      if (corpus_path.empty())
        throw ConfigError("no corpus configured (set \"corpus\" or pass --corpus)");
      if (!std::filesystem::exists(corpus_path))
        throw ConfigError("corpus file not found: " + corpus_path);
    }
    if (needs_gateway && mode == GatewayMode::replay && !std::filesystem::is_directory(transcripts_dir))
      throw ConfigError("replay mode needs an existing transcripts directory: " + transcripts_dir);
    if (!vocab_path.empty() && !std::filesystem::exists(vocab_path))
      throw ConfigError("vocab file not found: " + vocab_path);
    if (!extraction_template_path.empty() && !std::filesystem::exists(extraction_template_path))
      throw ConfigError("extraction template not found: " + extraction_template_path);
  }

  /// Registers the configured tokenizer and returns the token budget.
  TokenBudgetConfig token_budget() const
  {
    if (!vocab_path.empty())
      register_wordpiece_tokenizer(tokenizer_id, vocab_path);
    return TokenBudgetConfig::make(input_budget, gateway.model_window.value_or(input_budget + 1), tokenizer_id);
  }

  VenueFlavor flavor_for(std::string const &venue) const
  {
    auto it = venue_flavors.find(venue);
    return it == venue_flavors.end() ? default_flavor : it->second;
  }

  std::uint64_t require_seed(std::string const &command) const
  {
    if (!seed)
      throw ConfigError(command + " needs a seed (set \"seed\" or pass --seed)");
    return *seed;
  }

  /// Everything that affects outputs. Output location and credentials are excluded so the
  /// snapshot, and the run id derived from it, do not depend on where a run is written.
  json snapshot() const
  {
    auto samp = [](Sampling const &s) {
      return json{{"temperature", s.temperature}, {"max_output_tokens", s.max_output_tokens}};
    };
    json j;
    j["gateway"] = json{{"endpoint", gateway.endpoint},
                        {"model_id", gateway.model_id},
                        {"api_key_env", gateway.api_key_env},
                        {"max_in_flight", gateway.max_in_flight},
                        {"model_window", gateway.model_window ? json(*gateway.model_window) : json(nullptr)}};
    j["mode"]         = std::string(to_string(mode));
    j["tokenizer_id"] = tokenizer_id;
    j["vocab_path"]   = vocab_path;
    j["input_budget"] = input_budget;
    j["sampling"] = json{{"review", samp(review_sampling)},
                         {"extraction", samp(extraction_sampling)},
                         {"matching", samp(matching_sampling)}};
    j["extraction_template"] = extraction_template_path;
    j["flavor"]              = std::string(to_string(default_flavor));
    json vf                  = json::object();
    for (auto const &[venue, flavor] : venue_flavors)
      vf[venue] = std::string(to_string(flavor));
    j["venue_flavors"]       = vf;
    j["threshold"]           = threshold;
    j["control"]             = control;
    j["seed"]                = seed ? json(*seed) : json(nullptr);
    j["bootstrap_resamples"] = bootstrap_resamples;
    j["permutations"]        = permutations;
    j["strata"]              = json::array();
    for (auto s : strata)
      j["strata"].push_back(std::string(to_string(s)));
    j["shuffle_rule"] = std::string(to_string(shuffle_rule));
    j["corpus"]       = corpus_path;
    j["transcripts"]  = transcripts_dir;
    return j;
  }
};

/// The API key from the configured environment variable; live and record modes need one.
inline std::string credentials_from_env(RunConfig const &cfg)
{
  char const *value = std::getenv(cfg.gateway.api_key_env.c_str());
  if (value == nullptr || *value == '\0')
    throw ConfigError("missing credentials: environment variable " + cfg.gateway.api_key_env + " is not set (needed in " +
                      std::string(to_string(cfg.mode)) + " mode)");
  return value;
}

}  // namespace revmatch
