// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Run context, ledger and the batch drivers behind each CLI verb.
//
// Every run writes into <out>/<run_id>/ with ledger.json and the feedback/, comments/,
// matches/ and reports/ subdirectories. run_id hashes the command, its arguments and the
// config snapshot, so a replayed run lands in the same place with the same bytes.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "revmatch/aspects.hpp"
#include "revmatch/config.hpp"
#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/extraction.hpp"
#include "revmatch/feedback.hpp"
#include "revmatch/gateway.hpp"
#include "revmatch/hashing.hpp"
#include "revmatch/http.hpp"
#include "revmatch/ingest.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/matching.hpp"
#include "revmatch/metrics.hpp"
#include "revmatch/platform.hpp"
#include "revmatch/stats.hpp"
#include "revmatch/validation.hpp"

namespace revmatch {

enum class ExitCode
{
  ok      = 0,
  partial = 1,  // some items were skipped
  failure = 2
};

/// Calls f(i) for every i in [0, n) on at most `workers` threads. The first exception thrown
/// by any call is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F &&f)
{
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1)
  {
    for (std::size_t i = 0; i < n; ++i)
      f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr       first_error;
  std::mutex               error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++)
        {
          try
          {
            f(i);
          }
          catch (...)
          {
            std::scoped_lock lock(error_mutex);
            if (!first_error)
              first_error = std::current_exception();
          }
        }
      });
  }
  if (first_error)
    std::rethrow_exception(first_error);
}

/// Replaces characters outside [A-Za-z0-9._-] so ids can be used as file names.
inline std::string safe_file_name(std::string_view id)
{
  std::string out;
  for (char c : id)
  {
    bool const ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..")
    out = "_" + out;
  return out;
}

inline std::string format_double(double v, int digits = 6)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// RFC 4180 field quoting.
inline std::string csv_field(std::string_view s)
{
  if (s.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(s);
  std::string out = "\"";
  for (char c : s)
  {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(std::vector<std::string> const &fields)
{
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i)
    out += (i ? "," : "") + csv_field(fields[i]);
  return out + "\n";
}

struct SkipEntry
{
  std::string paper_id;
  std::string comparison;
  std::string list_a;
  std::string list_b;
  std::string stage;
  std::string reason;

  auto operator<=>(SkipEntry const &) const = default;
};

inline json to_json(SkipEntry const &s)
{
  return json{{"paper_id", s.paper_id}, {"comparison", s.comparison}, {"list_a", s.list_a},
              {"list_b", s.list_b},     {"stage", s.stage},           {"reason", s.reason}};
}

/// What a run did: config, transcript keys per stage, artifacts, warnings and skips.
class RunLedger
{
public:
  std::string run_id;
  std::string command;
  json        arguments = json::object();
  json        config    = json::object();

  void add_keys(std::string const &stage, std::vector<std::string> const &keys)
  {
    std::scoped_lock lock(mutex_);
    stage_keys_[stage].insert(keys.begin(), keys.end());
  }

  void add_artifact(std::string const &relative_path)
  {
    std::scoped_lock lock(mutex_);
    artifacts_.insert(relative_path);
  }

  void warn(std::string message)
  {
    std::scoped_lock lock(mutex_);
    warnings_.insert(std::move(message));
  }

  void skip(SkipEntry entry)
  {
    std::scoped_lock lock(mutex_);
    skips_.insert(std::move(entry));
  }

  std::vector<SkipEntry> skips() const
  {
    std::scoped_lock lock(mutex_);
    return {skips_.begin(), skips_.end()};
  }

  std::vector<std::string> warnings() const
  {
    std::scoped_lock lock(mutex_);
    return {warnings_.begin(), warnings_.end()};
  }

  json to_json(ExitCode status) const
  {
    std::scoped_lock lock(mutex_);
    json j;
    j["run_id"]    = run_id;
    j["command"]   = command;
    j["arguments"] = arguments;
    j["config"]    = config;
    j["status"]    = status == ExitCode::ok ? "ok" : status == ExitCode::partial ? "partial" : "failure";
    json keys      = json::object();
    for (auto const &[stage, set] : stage_keys_)
      keys[stage] = std::vector<std::string>(set.begin(), set.end());
    j["transcript_keys"] = keys;
    j["artifacts"]       = std::vector<std::string>(artifacts_.begin(), artifacts_.end());
    j["warnings"]        = std::vector<std::string>(warnings_.begin(), warnings_.end());
    j["skips"]           = json::array();
    for (auto const &s : skips_)
      j["skips"].push_back(revmatch::to_json(s));
    return j;
  }

private:
  mutable std::mutex                           mutex_;
  std::map<std::string, std::set<std::string>> stage_keys_;
  std::set<std::string>                        artifacts_;
  std::set<std::string>                        warnings_;
  std::set<SkipEntry>                          skips_;
};

/// Runs `fn`, re-labelling any non-stage error with the stage name.
template <class F>
auto in_stage(std::string const &stage, F &&fn) -> decltype(fn())
{
  try
  {
    return fn();
  }
  catch (StageError const &)
  {
    throw;
  }
  catch (std::exception const &e)
  {
    throw StageError(stage, e.what());
  }
}

/// Shared state of one command invocation.
class RunContext
{
public:
  /// `transport` carries every network request of the run. In replay mode no provider is
  /// built; in live/record mode `provider` defaults to the configured chat endpoint.
  RunContext(RunConfig config, std::string command, json arguments, Transport &transport,
             std::shared_ptr<ChatProvider> provider = nullptr, std::optional<std::string> run_id = std::nullopt)
    : config_(std::move(config))
    , transport_(transport)
  {
    budget_ = config_.token_budget();
    if (!config_.extraction_template_path.empty())
      extraction_template_ = read_file(config_.extraction_template_path);
    else
      extraction_template_ = std::string(kDefaultExtractionTemplate);

    if (config_.mode != GatewayMode::replay && !provider)
      provider = std::make_shared<OpenAIChatProvider>(config_.gateway.endpoint, credentials_from_env(config_),
                                                      transport_, config_.gateway.retry);
    GatewayConfig gc;
    gc.mode          = config_.mode;
    gc.model_window  = config_.gateway.model_window;
    gc.tokenizer_id  = config_.tokenizer_id;
    gc.max_in_flight = config_.gateway.max_in_flight;
    std::optional<TranscriptStore> store;
    if (config_.mode != GatewayMode::live)
      store.emplace(config_.transcripts_dir);
    gateway_ = std::make_unique<Gateway>(gc, std::move(store), config_.mode == GatewayMode::replay ? nullptr : provider);

    ledger_.command   = std::move(command);
    ledger_.arguments = std::move(arguments);
    ledger_.config    = config_.snapshot();
    json const identity{{"command", ledger_.command}, {"arguments", ledger_.arguments}, {"config", ledger_.config}};
    ledger_.run_id = run_id ? *run_id : sha256_hex(identity.dump()).substr(0, 16);
    if (ledger_.run_id.empty() || safe_file_name(ledger_.run_id) != ledger_.run_id)
      throw ConfigError("invalid run id '" + ledger_.run_id + "'");
    run_dir_ = std::filesystem::path(config_.out_dir) / ledger_.run_id;
  }

  RunConfig const               &config() const noexcept { return config_; }
  Gateway                       &gateway() noexcept { return *gateway_; }
  Transport                     &transport() noexcept { return transport_; }
  RunLedger                     &ledger() noexcept { return ledger_; }
  TokenBudgetConfig const       &budget() const noexcept { return budget_; }
  std::string const             &extraction_template() const noexcept { return extraction_template_; }
  std::filesystem::path const   &run_dir() const noexcept { return run_dir_; }

  /// Writes `content` under the run directory and records it in the ledger.
  std::filesystem::path write_artifact(std::string const &relative_path, std::string_view content)
  {
    auto const path = run_dir_ / relative_path;
    write_file_atomic(path, content);
    ledger_.add_artifact(relative_path);
    return path;
  }

  /// Writes ledger.json and returns `status`.
  ExitCode finish(ExitCode status)
  {
    write_file_atomic(run_dir_ / "ledger.json", dump_stable(ledger_.to_json(status)));
    return status;
  }

  ExtractionConfig extraction_config() const
  {
    return {config_.gateway.model_id, config_.extraction_sampling, extraction_template_};
  }

  MatchingConfig matching_config() const { return {config_.gateway.model_id, config_.matching_sampling}; }

  FeedbackConfig feedback_config(VenueFlavor flavor) const
  {
    return {flavor, config_.gateway.model_id, config_.review_sampling, budget_};
  }

private:
  RunConfig                config_;
  Transport               &transport_;
  std::unique_ptr<Gateway> gateway_;
  RunLedger                ledger_;
  TokenBudgetConfig        budget_;
  std::string              extraction_template_;
  std::filesystem::path    run_dir_;
};

struct CommandResult
{
  ExitCode code = ExitCode::ok;
  json     summary;
};

// ---------------------------------------------------------------------------
// Stage helpers

/// Parsed form of a PDF, through the service in live/record mode and from the transcript
/// directory (documents/<sha256>.json) in record/replay mode.
inline ParsedDocument parse_pdf_recorded(RunContext &ctx, std::string const &pdf_bytes)
{
  auto const &cfg  = ctx.config();
  auto const  key  = sha256_hex(pdf_bytes);
  auto const  path = std::filesystem::path(cfg.transcripts_dir) / "documents" / (key + ".json");
  if (cfg.mode != GatewayMode::live && std::filesystem::exists(path))
    return load_parsed_document(path.string());
  if (cfg.mode == GatewayMode::replay)
    throw ReplayMiss("document " + key);
  auto const service = PdfServiceConfig::from_json(cfg.pdf_service);
  if (service.endpoint.empty())
    throw ConfigError("pdf_service.endpoint is not configured");
  auto doc = parse_pdf(pdf_bytes, service, ctx.transport());
  if (cfg.mode == GatewayMode::record)
    write_file_atomic(path, dump_stable(to_json(doc)));
  return doc;
}

/// Lowers the review output budget when prompt + output would overflow the model window.
inline FeedbackConfig fit_output_budget(RunContext &ctx, ParsedDocument const &doc, FeedbackConfig cfg,
                                        std::string const &paper_id)
{
  auto const window = ctx.config().gateway.model_window;
  if (!window)
    return cfg;
  auto const prompt_tokens = count_tokens(prepare_review_prompt(doc, cfg).rendered, ctx.config().tokenizer_id);
  auto const needed        = prompt_tokens + static_cast<std::size_t>(cfg.sampling.max_output_tokens);
  if (needed <= *window)
    return cfg;
  if (prompt_tokens >= *window)
    throw PreconditionError("review prompt alone (" + std::to_string(prompt_tokens) + " tokens) fills the model window");
  cfg.sampling.max_output_tokens = static_cast<int>(*window - prompt_tokens);
  ctx.ledger().warn(paper_id + ": review max_output_tokens lowered to " +
                    std::to_string(cfg.sampling.max_output_tokens) + " to fit the model window");
  return cfg;
}

/// Generates feedback for one document and persists feedback/<paper_id>.json together with
/// the prompt. A parse failure keeps the raw output as feedback/<paper_id>.raw.txt.
inline GeneratedFeedback review_document(RunContext &ctx, std::string const &paper_id, ParsedDocument const &doc,
                                         VenueFlavor flavor)
{
  auto const name = safe_file_name(paper_id);
  auto const cfg  = in_stage("prompt", [&] { return fit_output_budget(ctx, doc, ctx.feedback_config(flavor), paper_id); });
  ctx.write_artifact("feedback/" + name + ".prompt.txt", prepare_review_prompt(doc, cfg).rendered);
  try
  {
    auto generated = generate_feedback(paper_id, doc, cfg, ctx.gateway());
    ctx.ledger().add_keys("review", {generated.transcript_key});
    ctx.write_artifact("feedback/" + name + ".json", dump_stable(to_json(generated)));
    return generated;
  }
  catch (FeedbackParseError const &e)
  {
    ctx.ledger().add_keys("review", {e.transcript_key()});
    ctx.write_artifact("feedback/" + name + ".raw.txt", e.raw());
    throw StageError("review-parse", e.what());
  }
  catch (std::exception const &e)
  {
    throw StageError("review", e.what());
  }
}

/// Extracts and persists comments/<feedback_id>.json.
inline CommentList extract_feedback(RunContext &ctx, std::string const &feedback_id, std::string const &text)
{
  return in_stage("extraction", [&] {
    auto result = extract_comments(feedback_id, text, ctx.gateway(), ctx.extraction_config());
    ctx.ledger().add_keys("extraction", result.transcript_keys);
    ctx.write_artifact("comments/" + safe_file_name(feedback_id) + ".json", dump_stable(to_json(result)));
    return result.comments;
  });
}

/// Raw judge output for list A vs list B, persisted as matches/<a>__vs__<b>.json.
inline MatchOutcome match_lists(RunContext &ctx, CommentList const &a, CommentList const &b)
{
  return in_stage("matching", [&] {
    auto outcome = match_comments(a.with_side("A"), b.with_side("B"), ctx.gateway(), ctx.matching_config());
    ctx.ledger().add_keys("matching", outcome.transcript_keys);
    for (auto const &w : outcome.warnings)
      ctx.ledger().warn(a.feedback_id + " vs " + b.feedback_id + ": " + w);
    ctx.write_artifact("matches/" + safe_file_name(a.feedback_id) + "__vs__" + safe_file_name(b.feedback_id) + ".json",
                       dump_stable(to_json(outcome.set, ctx.config().threshold, a.size(), b.size(),
                                           outcome.transcript_keys, outcome.warnings)));
    return outcome;
  });
}

/// Comment lists of one paper: the LLM feedback and every human review in position order.
struct PaperComments
{
  std::string              paper_id;
  CommentList              llm;
  std::vector<CommentList> humans;
};

inline std::string llm_feedback_id(std::string const &paper_id)
{
  return paper_id + "/llm";
}

/// LLM feedback text: the first LLM review stored in the corpus, otherwise generated from
/// the paper record.
inline std::string llm_feedback_text(RunContext &ctx, CorpusManifest const &corpus, PaperRecord const &paper)
{
  auto const stored = corpus.reviews_of(paper.paper_id, ReviewSource::llm);
  if (!stored.empty())
    return stored.front()->raw_text;
  auto const doc = in_stage("ingest", [&] { return ParsedDocument::from_paper(paper); });
  return review_document(ctx, paper.paper_id, doc, ctx.config().flavor_for(paper.venue)).feedback.raw_text;
}

inline PaperComments load_paper_comments(RunContext &ctx, CorpusManifest const &corpus, PaperRecord const &paper)
{
  PaperComments pc;
  pc.paper_id = paper.paper_id;
  pc.llm      = extract_feedback(ctx, llm_feedback_id(paper.paper_id), llm_feedback_text(ctx, corpus, paper));
  for (auto const *review : corpus.reviews_of(paper.paper_id, ReviewSource::human))
    pc.humans.push_back(extract_feedback(ctx, paper.paper_id + "/" + review->reviewer_id, review->raw_text));
  return pc;
}

// ---------------------------------------------------------------------------
// Overlap analysis

inline constexpr std::string_view kLlmVsHuman        = "llm_vs_human";
inline constexpr std::string_view kHumanVsHuman      = "human_vs_human";
inline constexpr std::string_view kHumanVsHumanCtrl  = "human_vs_human_controlled";

struct PairScore
{
  std::string   paper_id;
  std::string   comparison;
  std::string   list_a;
  std::string   list_b;
  OverlapScores scores;
};

inline json to_json(PairScore const &p)
{
  return json{{"paper_id", p.paper_id},
              {"comparison", p.comparison},
              {"list_a", p.list_a},
              {"list_b", p.list_b},
              {"n_a", p.scores.n_a},
              {"n_b", p.scores.n_b},
              {"m", p.scores.m},
              {"matched_a", p.scores.matched_a_count},
              {"hit_rate", p.scores.hit_rate},
              {"overlap_coefficient", p.scores.overlap_coefficient},
              {"jaccard", p.scores.jaccard},
              {"dice", p.scores.dice}};
}

struct PaperAnalysis
{
  std::string                    paper_id;
  std::vector<PairScore>         pairs;
  std::vector<SkipEntry>         skips;
  std::optional<double>          any_reviewer_hit_rate;
  std::optional<RecallByK>       recall;
  std::vector<std::vector<bool>> positional;
  std::size_t                    attempted = 0;
};

namespace detail {

inline std::optional<OverlapScores> score_or_skip(PaperAnalysis &out, std::string_view comparison,
                                                  std::string const &a_id, std::size_t n_a, std::string const &b_id,
                                                  std::size_t n_b, MatchSet const &thresholded)
{
  ++out.attempted;
  if (n_a == 0 || n_b == 0)
  {
    out.skips.push_back({out.paper_id, std::string(comparison), a_id, b_id, "metrics",
                         std::string(n_a == 0 ? "list A" : "list B") + " is empty"});
    return std::nullopt;
  }
  auto const s = overlap_scores(assign_one_to_one(thresholded), n_a, n_b);
  out.pairs.push_back({out.paper_id, std::string(comparison), a_id, b_id, s});
  return s;
}

}  // namespace detail

/// Scores one paper from its comment lists. `N` for the control is the LLM comment count.
inline PaperAnalysis analyze_paper(RunContext &ctx, PaperComments const &pc)
{
  PaperAnalysis out;
  out.paper_id          = pc.paper_id;
  int const   t         = ctx.config().threshold;
  std::size_t const N   = pc.llm.size();
  bool        complete  = true;
  auto const &llm_id    = pc.llm.feedback_id;

  std::set<int>                  llm_hit;  // LLM ordinals matched to any reviewer
  std::vector<std::set<int>>     human_hit(pc.humans.size());
  for (std::size_t r = 0; r < pc.humans.size(); ++r)
  {
    auto const &h = pc.humans[r];
    if (pc.llm.empty() || h.empty())
    {
      detail::score_or_skip(out, kLlmVsHuman, llm_id, N, h.feedback_id, h.size(), {});
      continue;
    }
    try
    {
      auto const kept = filter_threshold(match_lists(ctx, pc.llm, h).set, t);
      for (auto const &m : kept.matches)
      {
        llm_hit.insert(m.a_ordinal);
        human_hit[r].insert(m.b_ordinal);
      }
      detail::score_or_skip(out, kLlmVsHuman, llm_id, N, h.feedback_id, h.size(), kept);
    }
    catch (StageError const &e)
    {
      ++out.attempted;
      complete = false;
      out.skips.push_back({pc.paper_id, std::string(kLlmVsHuman), llm_id, h.feedback_id, e.stage(), e.what()});
    }
  }
  if (N > 0 && !pc.humans.empty() && complete)
    out.any_reviewer_hit_rate = static_cast<double>(llm_hit.size()) / static_cast<double>(N);

  std::vector<HumanPairMatches> human_matches;
  for (std::size_t i = 0; i < pc.humans.size(); ++i)
  {
    for (std::size_t j = i + 1; j < pc.humans.size(); ++j)
    {
      auto const &hi = pc.humans[i];
      auto const &hj = pc.humans[j];
      MatchSet    kept;
      kept.list_a_id = hi.feedback_id;
      kept.list_b_id = hj.feedback_id;
      kept.threshold_applied = t;
      if (!hi.empty() && !hj.empty())
      {
        try
        {
          kept = filter_threshold(match_lists(ctx, hi, hj).set, t);
        }
        catch (StageError const &e)
        {
          complete = false;
          for (auto const *cmp : {&kHumanVsHuman, &kHumanVsHumanCtrl})
          {
            if (*cmp == kHumanVsHumanCtrl && !ctx.config().control)
              continue;
            out.attempted += 2;
            out.skips.push_back({pc.paper_id, std::string(*cmp), hi.feedback_id, hj.feedback_id, e.stage(), e.what()});
            out.skips.push_back({pc.paper_id, std::string(*cmp), hj.feedback_id, hi.feedback_id, e.stage(), e.what()});
          }
          continue;
        }
      }
      human_matches.push_back({i, j, kept});
      for (auto const &[a, b, dir] : {std::tuple{&hi, &hj, kept}, std::tuple{&hj, &hi, swap_sides(kept)}})
      {
        detail::score_or_skip(out, kHumanVsHuman, a->feedback_id, a->size(), b->feedback_id, b->size(), dir);
        if (!ctx.config().control)
          continue;
        auto const n_ctrl = apply_control(*a, N).size();
        if (n_ctrl == 0)
        {
          ++out.attempted;
          out.skips.push_back({pc.paper_id, std::string(kHumanVsHumanCtrl), a->feedback_id, b->feedback_id, "control",
                               "list A is empty after control (N=" + std::to_string(N) + ")"});
          continue;
        }
        detail::score_or_skip(out, kHumanVsHumanCtrl, a->feedback_id, n_ctrl, b->feedback_id, b->size(),
                              restrict_a(dir, N));
      }
    }
  }

  // Recall by reviewer count and positional rates need every match of the paper, and an
  // LLM list to be hit by.
  if (complete && N > 0 && !pc.humans.empty())
  {
    std::vector<ReviewerComments> reviewers;
    for (std::size_t r = 0; r < pc.humans.size(); ++r)
    {
      reviewers.push_back({pc.humans[r].feedback_id, pc.humans[r].size(), human_hit[r]});
      if (pc.humans[r].empty())
        continue;
      std::vector<bool> hits(pc.humans[r].size(), false);
      for (int o : human_hit[r])
        hits[static_cast<std::size_t>(o) - 1] = true;
      out.positional.push_back(std::move(hits));
    }
    out.recall = recall_by_reviewer_count(reviewers, human_matches);
  }
  return out;
}

namespace detail {

inline constexpr std::array<std::string_view, 4> kMetricNames = {"hit_rate", "overlap_coefficient", "jaccard", "dice"};

inline double metric_value(OverlapScores const &s, std::string_view name)
{
  if (name == "hit_rate")
    return s.hit_rate;
  if (name == "overlap_coefficient")
    return s.overlap_coefficient;
  if (name == "jaccard")
    return s.jaccard;
  return s.dice;
}

/// Mean, bootstrap interval and sample size of per-paper values.
inline json summarize(std::vector<double> const &values, std::uint64_t seed, int resamples)
{
  if (values.empty())
    return json{{"n_papers", 0}, {"mean", nullptr}, {"ci_low", nullptr}, {"ci_high", nullptr}};
  auto const ci = bootstrap_ci(values, seed, resamples);
  return json{{"n_papers", values.size()}, {"mean", mean(values)}, {"ci_low", ci.lo}, {"ci_high", ci.hi}};
}

/// Per-paper mean of `metric` over the paper's pairs of one comparison kind.
inline std::map<std::string, double> per_paper_means(std::vector<PairScore> const &pairs, std::string_view comparison,
                                                     std::string_view metric)
{
  std::map<std::string, std::pair<double, int>> acc;
  for (auto const &p : pairs)
  {
    if (p.comparison != comparison)
      continue;
    auto &a = acc[p.paper_id];
    a.first += metric_value(p.scores, metric);
    a.second += 1;
  }
  std::map<std::string, double> out;
  for (auto const &[paper, a] : acc)
    out[paper] = a.first / a.second;
  return out;
}

}  // namespace detail

/// Summary block of a set of papers: per comparison and metric, the bootstrap summary of
/// per-paper means, plus the any-reviewer hit rate.
inline json summarize_papers(std::vector<PaperAnalysis> const &papers, std::set<std::string> const &ids,
                             std::vector<std::string_view> const &comparisons, std::uint64_t seed, int resamples)
{
  std::vector<PairScore> pairs;
  for (auto const &pa : papers)
    if (ids.contains(pa.paper_id))
      pairs.insert(pairs.end(), pa.pairs.begin(), pa.pairs.end());
  json out;
  for (auto comparison : comparisons)
  {
    for (auto metric : detail::kMetricNames)
    {
      std::vector<double> values;
      for (auto const &[paper, v] : detail::per_paper_means(pairs, comparison, metric))
        values.push_back(v);
      out[std::string(comparison)][std::string(metric)] = detail::summarize(values, seed, resamples);
    }
  }
  std::vector<double> any;
  for (auto const &pa : papers)
    if (ids.contains(pa.paper_id) && pa.any_reviewer_hit_rate)
      any.push_back(*pa.any_reviewer_hit_rate);
  out["llm_vs_any_reviewer"]["hit_rate"] = detail::summarize(any, seed, resamples);
  return out;
}

inline std::vector<std::string_view> analysis_comparisons(RunConfig const &cfg)
{
  std::vector<std::string_view> out{kLlmVsHuman, kHumanVsHuman};
  if (cfg.control)
    out.push_back(kHumanVsHumanCtrl);
  return out;
}

/// Loads and validates the configured corpus.
inline CorpusManifest load_run_corpus(RunContext &ctx)
{
  auto corpus = load_corpus(ctx.config().corpus_path);
  std::sort(corpus.papers.begin(), corpus.papers.end(),
            [](PaperRecord const &a, PaperRecord const &b) { return a.paper_id < b.paper_id; });
  return corpus;
}

/// Comment lists of every paper with at least one human review; failures go to the skip list.
inline std::vector<std::optional<PaperComments>> load_all_comments(RunContext &ctx, CorpusManifest const &corpus)
{
  std::vector<std::optional<PaperComments>> out(corpus.papers.size());
  parallel_for(corpus.papers.size(), static_cast<std::size_t>(ctx.config().gateway.max_in_flight), [&](std::size_t i) {
    auto const &paper = corpus.papers[i];
    if (corpus.reviews_of(paper.paper_id, ReviewSource::human).empty())
    {
      ctx.ledger().warn(paper.paper_id + ": no human reviews; paper left out");
      return;
    }
    try
    {
      out[i] = load_paper_comments(ctx, corpus, paper);
    }
    catch (StageError const &e)
    {
      ctx.ledger().skip({paper.paper_id, "paper", "", "", e.stage(), e.what()});
    }
  });
  return out;
}

/// Overlap analysis of the whole corpus: pair scores, skip report, per-stratum summaries,
/// cross-stratum correlations, recall by reviewer count and positional quartiles.
inline CommandResult cmd_analyze(RunContext &ctx)
{
  auto const &cfg    = ctx.config();
  auto const  seed   = cfg.require_seed("analyze");
  auto const  corpus = in_stage("corpus", [&] { return load_run_corpus(ctx); });
  auto const  lists  = load_all_comments(ctx, corpus);

  std::vector<std::optional<PaperAnalysis>> analyses(lists.size());
  parallel_for(lists.size(), static_cast<std::size_t>(cfg.gateway.max_in_flight), [&](std::size_t i) {
    if (lists[i])
      analyses[i] = analyze_paper(ctx, *lists[i]);
  });

  std::vector<PaperAnalysis> papers;
  for (auto &a : analyses)
    if (a)
      papers.push_back(std::move(*a));

  std::size_t attempted = 0;
  json        pair_rows = json::array();
  std::string pairs_csv = csv_row({"paper_id", "comparison", "list_a", "list_b", "n_a", "n_b", "m", "matched_a",
                                   "hit_rate", "overlap_coefficient", "jaccard", "dice"});
  std::size_t scored = 0;
  RecallByK   recall;
  std::vector<std::vector<bool>> positional;
  for (auto const &pa : papers)
  {
    attempted += pa.attempted;
    for (auto const &s : pa.skips)
      ctx.ledger().skip(s);
    for (auto const &p : pa.pairs)
    {
      ++scored;
      pair_rows.push_back(to_json(p));
      pairs_csv += csv_row({p.paper_id, p.comparison, p.list_a, p.list_b, std::to_string(p.scores.n_a),
                            std::to_string(p.scores.n_b), std::to_string(p.scores.m),
                            std::to_string(p.scores.matched_a_count), format_double(p.scores.hit_rate),
                            format_double(p.scores.overlap_coefficient), format_double(p.scores.jaccard),
                            format_double(p.scores.dice)});
    }
    if (pa.recall)
      recall += *pa.recall;
    positional.insert(positional.end(), pa.positional.begin(), pa.positional.end());
  }

  auto const comparisons = analysis_comparisons(cfg);
  std::set<std::string> all_ids;
  for (auto const &pa : papers)
    all_ids.insert(pa.paper_id);

  json report;
  report["run_id"]    = ctx.ledger().run_id;
  report["threshold"] = cfg.threshold;
  report["control"]   = cfg.control;
  report["seed"]      = seed;
  report["papers"]    = papers.size();
  report["pairs"]     = pair_rows;
  report["overall"]   = summarize_papers(papers, all_ids, comparisons, seed, cfg.bootstrap_resamples);

  std::string strata_csv = csv_row({"stratum_kind", "stratum", "comparison", "metric", "n_papers", "mean", "ci_low",
                                    "ci_high"});
  auto add_strata_rows = [&](std::string const &kind, std::string const &value, json const &summary) {
    for (auto const &[comparison, metrics] : summary.items())
      for (auto const &[metric, s] : metrics.items())
        strata_csv += csv_row({kind, value, comparison, metric, std::to_string(s.at("n_papers").get<std::size_t>()),
                               s.at("mean").is_null() ? "" : format_double(s.at("mean").get<double>()),
                               s.at("ci_low").is_null() ? "" : format_double(s.at("ci_low").get<double>()),
                               s.at("ci_high").is_null() ? "" : format_double(s.at("ci_high").get<double>())});
  };
  add_strata_rows("overall", "all", report["overall"]);

  std::string_view const reference = cfg.control ? kHumanVsHumanCtrl : kHumanVsHuman;
  report["strata"]       = json::object();
  report["correlations"] = json::object();
  for (auto kind : cfg.strata)
  {
    auto const kind_name = std::string(to_string(kind));
    json       block     = json::object();
    std::vector<double> xs, ys;
    for (auto const &[key, ids] : stratify(corpus, kind))
    {
      std::set<std::string> members;
      for (auto const &id : ids)
        if (all_ids.contains(id))
          members.insert(id);
      if (members.empty())
        continue;
      auto const summary = summarize_papers(papers, members, comparisons, seed, cfg.bootstrap_resamples);
      block[key.value]   = summary;
      add_strata_rows(kind_name, key.value, summary);
      auto const &x = summary.at(std::string(kLlmVsHuman)).at("hit_rate").at("mean");
      auto const &y = summary.at(std::string(reference)).at("hit_rate").at("mean");
      if (!x.is_null() && !y.is_null())
      {
        xs.push_back(x.get<double>());
        ys.push_back(y.get<double>());
      }
    }
    report["strata"][kind_name] = block;
    json corr{{"x", std::string(kLlmVsHuman) + ".hit_rate"},
              {"y", std::string(reference) + ".hit_rate"},
              {"n_strata", xs.size()}};
    try
    {
      auto const c = pearson_r(xs, ys, seed, cfg.permutations);
      corr["r"]    = c.r;
      corr["p"]    = c.p;
    }
    catch (PreconditionError const &e)
    {
      corr["r"]         = nullptr;
      corr["p"]         = nullptr;
      corr["undefined"] = e.what();
    }
    report["correlations"][kind_name] = corr;
  }

  json recall_json = json::object();
  for (auto const &[k, c] : recall)
    recall_json[k >= 3 ? "3+" : std::to_string(k)] =
      json{{"hits", c.hits}, {"total", c.total}, {"rate", c.total ? json(c.rate()) : json(nullptr)}};
  report["recall_by_reviewer_count"] = recall_json;
  json quartiles                    = json::array();
  if (!positional.empty())
    for (auto const &q : positional_quartile_rates(positional))
      quartiles.push_back(json{{"hits", q.hits}, {"total", q.total}, {"rate", q.total ? json(q.rate()) : json(nullptr)}});
  report["positional_quartiles"] = quartiles;

  auto const skips = ctx.ledger().skips();
  report["skips"]  = json::array();
  std::string skips_csv = csv_row({"paper_id", "comparison", "list_a", "list_b", "stage", "reason"});
  for (auto const &s : skips)
  {
    report["skips"].push_back(to_json(s));
    skips_csv += csv_row({s.paper_id, s.comparison, s.list_a, s.list_b, s.stage, s.reason});
  }
  report["warnings"] = ctx.ledger().warnings();

  ctx.write_artifact("reports/analysis.json", dump_stable(report));
  ctx.write_artifact("reports/pairs.csv", pairs_csv);
  ctx.write_artifact("reports/strata.csv", strata_csv);
  ctx.write_artifact("reports/skips.csv", skips_csv);

  ExitCode code = ExitCode::ok;
  if (scored == 0)
    code = ExitCode::failure;
  else if (!skips.empty())
    code = ExitCode::partial;
  json summary{{"papers", papers.size()}, {"pairs_scored", scored}, {"pairs_attempted", attempted},
               {"skips", skips.size()},   {"overall", report["overall"]}};
  return {ctx.finish(code), summary};
}

// ---------------------------------------------------------------------------
// Shuffle null model

/// LLM-vs-human overlap under the original pairing and under a seeded within-group
/// derangement of the LLM feedback.
inline CommandResult cmd_shuffle(RunContext &ctx)
{
  auto const &cfg    = ctx.config();
  auto const  seed   = cfg.require_seed("shuffle");
  auto const  corpus = in_stage("corpus", [&] { return load_run_corpus(ctx); });
  auto const  lists  = load_all_comments(ctx, corpus);

  std::map<std::string, PaperComments const *> by_id;
  std::vector<std::string>                     eligible;
  for (auto const &l : lists)
  {
    if (!l)
      continue;
    by_id[l->paper_id] = &*l;
    eligible.push_back(l->paper_id);
  }
  auto const plan = plan_shuffle(corpus, eligible, cfg.shuffle_rule, seed);
  for (auto const &id : plan.excluded)
    ctx.ledger().warn(id + ": only paper in its shuffle group; left out of the comparison");
  if (plan.pairing.empty())
    ctx.ledger().warn("every shuffle group is a singleton; the comparison is empty");

  struct Row
  {
    std::string                  paper_id, donor, reviewer;
    std::optional<OverlapScores> original, shuffled;
  };
  std::vector<std::pair<std::string, std::string>> pairing(plan.pairing.begin(), plan.pairing.end());
  std::vector<std::vector<Row>> rows(pairing.size());
  parallel_for(pairing.size(), static_cast<std::size_t>(cfg.gateway.max_in_flight), [&](std::size_t i) {
    auto const &paper_id = pairing[i].first;
    auto const &donor_id = pairing[i].second;
    auto const &own   = *by_id.at(paper_id);
    auto const &donor = *by_id.at(donor_id);
    for (auto const &h : own.humans)
    {
      Row row{paper_id, donor_id, h.feedback_id, std::nullopt, std::nullopt};
      auto score = [&](CommentList const &llm, std::string const &comparison) -> std::optional<OverlapScores> {
        if (llm.empty() || h.empty())
        {
          ctx.ledger().skip({paper_id, comparison, llm.feedback_id, h.feedback_id, "metrics",
                             std::string(llm.empty() ? "list A" : "list B") + " is empty"});
          return std::nullopt;
        }
        try
        {
          auto const kept = filter_threshold(match_lists(ctx, llm, h).set, cfg.threshold);
          return overlap_scores(assign_one_to_one(kept), llm.size(), h.size());
        }
        catch (StageError const &e)
        {
          ctx.ledger().skip({paper_id, comparison, llm.feedback_id, h.feedback_id, e.stage(), e.what()});
          return std::nullopt;
        }
      };
      row.original = score(own.llm, "original");
      row.shuffled = score(donor.llm, "shuffled");
      rows[i].push_back(std::move(row));
    }
  });

  json        table = json::array();
  std::string csv   = csv_row({"paper_id", "shuffle_group", "donor_paper_id", "reviewer", "original_hit_rate",
                               "shuffled_hit_rate", "original_jaccard", "shuffled_jaccard"});
  std::map<std::string, std::string> group_of;
  for (auto const &[key, members] : plan.groups)
    for (auto const &m : members)
      group_of[m] = key;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_paper;  // hit rates
  std::size_t scored = 0;
  for (auto const &paper_rows : rows)
  {
    for (auto const &r : paper_rows)
    {
      auto num = [](std::optional<OverlapScores> const &s, double OverlapScores::*f) {
        return s ? json(*s.*f) : json(nullptr);
      };
      auto txt = [](std::optional<OverlapScores> const &s, double OverlapScores::*f) {
        return s ? format_double(*s.*f) : std::string();
      };
      table.push_back(json{{"paper_id", r.paper_id},
                           {"shuffle_group", group_of[r.paper_id]},
                           {"donor_paper_id", r.donor},
                           {"reviewer", r.reviewer},
                           {"original_hit_rate", num(r.original, &OverlapScores::hit_rate)},
                           {"shuffled_hit_rate", num(r.shuffled, &OverlapScores::hit_rate)},
                           {"original_jaccard", num(r.original, &OverlapScores::jaccard)},
                           {"shuffled_jaccard", num(r.shuffled, &OverlapScores::jaccard)}});
      csv += csv_row({r.paper_id, group_of[r.paper_id], r.donor, r.reviewer, txt(r.original, &OverlapScores::hit_rate),
                      txt(r.shuffled, &OverlapScores::hit_rate), txt(r.original, &OverlapScores::jaccard),
                      txt(r.shuffled, &OverlapScores::jaccard)});
      if (r.original && r.shuffled)
      {
        ++scored;
        per_paper[r.paper_id].first.push_back(r.original->hit_rate);
        per_paper[r.paper_id].second.push_back(r.shuffled->hit_rate);
      }
    }
  }
  std::vector<double> original, shuffled;
  for (auto const &[paper, v] : per_paper)
  {
    original.push_back(mean(v.first));
    shuffled.push_back(mean(v.second));
  }

  json report;
  report["run_id"]    = ctx.ledger().run_id;
  report["rule"]      = std::string(to_string(plan.rule));
  report["seed"]      = seed;
  report["threshold"] = cfg.threshold;
  json pairing_json   = json::object();
  for (auto const &[p, d] : plan.pairing)
    pairing_json[p] = d;
  report["pairing"]  = pairing_json;
  report["excluded"] = plan.excluded;
  report["summary"]  = json{{"original_hit_rate", detail::summarize(original, seed, cfg.bootstrap_resamples)},
                            {"shuffled_hit_rate", detail::summarize(shuffled, seed, cfg.bootstrap_resamples)}};
  report["rows"]     = table;
  report["skips"]    = json::array();
  for (auto const &s : ctx.ledger().skips())
    report["skips"].push_back(to_json(s));
  report["warnings"] = ctx.ledger().warnings();
  ctx.write_artifact("reports/shuffle.json", dump_stable(report));
  ctx.write_artifact("reports/shuffle.csv", csv);

  ExitCode code = ExitCode::ok;
  if (!pairing.empty() && scored == 0)
    code = ExitCode::failure;
  else if (!ctx.ledger().skips().empty())
    code = ExitCode::partial;
  return {ctx.finish(code), report["summary"]};
}

// ---------------------------------------------------------------------------
// Single-item commands

struct ReviewInput
{
  std::optional<std::string> paper_id;       // from the corpus
  std::optional<std::string> document_path;  // ParsedDocument JSON
  std::optional<std::string> pdf_path;
  std::optional<VenueFlavor> flavor;
};

inline CommandResult cmd_review(RunContext &ctx, ReviewInput const &input)
{
  std::string    paper_id;
  ParsedDocument doc;
  VenueFlavor    flavor = ctx.config().default_flavor;
  if (input.paper_id)
  {
    auto const corpus = in_stage("corpus", [&] { return load_run_corpus(ctx); });
    auto const *paper = corpus.find_paper(*input.paper_id);
    if (!paper)
      throw StageError("corpus", "paper " + *input.paper_id + " is not in the corpus");
    paper_id = paper->paper_id;
    flavor   = ctx.config().flavor_for(paper->venue);
    doc      = in_stage("ingest", [&] { return ParsedDocument::from_paper(*paper); });
  }
  else if (input.document_path)
  {
    paper_id = std::filesystem::path(*input.document_path).stem().string();
    doc      = in_stage("ingest", [&] { return load_parsed_document(*input.document_path); });
  }
  else if (input.pdf_path)
  {
    paper_id = std::filesystem::path(*input.pdf_path).stem().string();
    doc      = in_stage("pdf-parse", [&] { return parse_pdf_recorded(ctx, read_file(*input.pdf_path)); });
  }
  else
    throw PreconditionError("review needs a paper id, a parsed document or a PDF");
  if (input.flavor)
    flavor = *input.flavor;
  ctx.write_artifact("feedback/" + safe_file_name(paper_id) + ".document.json", dump_stable(to_json(doc)));
  try
  {
    auto const generated = review_document(ctx, paper_id, doc, flavor);
    return {ctx.finish(ExitCode::ok), to_json(generated)};
  }
  catch (StageError const &)
  {
    ctx.finish(ExitCode::failure);
    throw;
  }
}

struct ExtractInput
{
  std::vector<std::string> paper_ids;   // empty with no text files: every paper
  std::vector<std::string> text_paths;  // free-standing feedback texts
};

inline CommandResult cmd_extract(RunContext &ctx, ExtractInput const &input)
{
  json summary = json::object();
  std::size_t failures = 0, total = 0;
  for (auto const &path : input.text_paths)
  {
    ++total;
    auto const id = std::filesystem::path(path).stem().string();
    try
    {
      summary[id] = extract_feedback(ctx, id, read_file(path)).size();
    }
    catch (StageError const &e)
    {
      ++failures;
      ctx.ledger().skip({"", "extract", id, "", e.stage(), e.what()});
    }
  }
  if (!input.paper_ids.empty() || input.text_paths.empty())
  {
    auto const corpus = in_stage("corpus", [&] { return load_run_corpus(ctx); });
    std::vector<PaperRecord const *> papers;
    for (auto const &p : corpus.papers)
      if (input.paper_ids.empty() ||
          std::find(input.paper_ids.begin(), input.paper_ids.end(), p.paper_id) != input.paper_ids.end())
        papers.push_back(&p);
    for (auto const &id : input.paper_ids)
      if (!corpus.find_paper(id))
        throw StageError("corpus", "paper " + id + " is not in the corpus");
    std::vector<std::optional<PaperComments>> out(papers.size());
    parallel_for(papers.size(), static_cast<std::size_t>(ctx.config().gateway.max_in_flight), [&](std::size_t i) {
      try
      {
        out[i] = load_paper_comments(ctx, corpus, *papers[i]);
      }
      catch (StageError const &e)
      {
        ctx.ledger().skip({papers[i]->paper_id, "extract", "", "", e.stage(), e.what()});
      }
    });
    for (std::size_t i = 0; i < papers.size(); ++i)
    {
      ++total;
      if (!out[i])
      {
        ++failures;
        continue;
      }
      summary[out[i]->llm.feedback_id] = out[i]->llm.size();
      for (auto const &h : out[i]->humans)
        summary[h.feedback_id] = h.size();
    }
  }
  ExitCode code = failures == 0 ? ExitCode::ok : failures == total ? ExitCode::failure : ExitCode::partial;
  return {ctx.finish(code), summary};
}

inline CommentList load_comment_file(std::string const &path)
{
  try
  {
    return extraction_from_json(json::parse(read_file(path))).comments;
  }
  catch (json::exception const &e)
  {
    throw ParseError(path + ": " + e.what());
  }
}

/// Matches two comment files (the JSON written by extract) and scores the result.
inline CommandResult cmd_match(RunContext &ctx, std::string const &list_a_path, std::string const &list_b_path)
{
  auto const a       = in_stage("load", [&] { return load_comment_file(list_a_path); });
  auto const b       = in_stage("load", [&] { return load_comment_file(list_b_path); });
  auto const outcome = match_lists(ctx, a, b);
  auto       summary = to_json(outcome.set, ctx.config().threshold, a.size(), b.size(), outcome.transcript_keys,
                               outcome.warnings);
  if (!a.empty() && !b.empty())
  {
    auto const s = overlap_scores(assign_one_to_one(filter_threshold(outcome.set, ctx.config().threshold)), a.size(),
                                  b.size());
    summary["scores"] = json{{"hit_rate", s.hit_rate},
                             {"overlap_coefficient", s.overlap_coefficient},
                             {"jaccard", s.jaccard},
                             {"dice", s.dice},
                             {"m", s.m}};
  }
  else
    ctx.ledger().warn("a comment list is empty; no scores");
  return {ctx.finish(ExitCode::ok), summary};
}

// ---------------------------------------------------------------------------
// Validation and aspects

/// Sums confusion counts from a JSON object or line-delimited objects {tp, fp, fn, tn?}.
inline ConfusionCounts load_confusion_counts(std::string const &text)
{
  ConfusionCounts total;
  auto add = [&](json const &j) {
    auto field = [&](char const *name) {
      auto const v = j.value(name, 0LL);
      if (v < 0)
        throw ParseError(std::string("negative count for ") + name);
      return static_cast<std::size_t>(v);
    };
    total += ConfusionCounts{field("tp"), field("fp"), field("fn"), field("tn")};
  };
  try
  {
    auto const trimmed = trim(text);
    if (trimmed.empty())
      throw ParseError("counts file is empty");
    if (auto whole = json::parse(trimmed, nullptr, false); !whole.is_discarded())
    {
      add(whole);
      return total;
    }
    std::size_t start = 0;
    while (start < text.size())
    {
      auto end = text.find('\n', start);
      if (end == std::string::npos)
        end = text.size();
      auto const line = trim(std::string_view(text).substr(start, end - start));
      start           = end + 1;
      if (!line.empty())
        add(json::parse(line));
    }
  }
  catch (json::exception const &e)
  {
    throw ParseError(std::string("counts: ") + e.what());
  }
  return total;
}

struct ValidateInput
{
  std::string              kind;  // extraction | matching
  std::optional<std::string> counts_path;
  std::optional<std::string> annotations_path;
  std::vector<std::string> consensus_paths;
  std::vector<std::string> prediction_paths;  // match JSON written by match/analyze
};

inline CommandResult cmd_validate(RunContext &ctx, ValidateInput const &input)
{
  if (input.kind != "extraction" && input.kind != "matching")
    throw PreconditionError("validate kind must be extraction or matching");
  json report;
  report["kind"] = input.kind;
  bool did_something = false;
  if (input.counts_path)
  {
    auto const counts = in_stage("annotations", [&] { return load_confusion_counts(read_file(*input.counts_path)); });
    report["counts"]  = to_json(counts);
    report["scores"]  = to_json(prf(counts));
    did_something     = true;
  }
  if (input.kind == "matching")
  {
    if (input.consensus_paths.size() != input.prediction_paths.size())
      throw PreconditionError("give one predictions file per consensus file");
    if (!input.consensus_paths.empty())
    {
      ConfusionCounts total;
      for (std::size_t i = 0; i < input.consensus_paths.size(); ++i)
      {
        auto const consensus = in_stage("annotations", [&] { return parse_label_map(read_file(input.consensus_paths[i])); });
        auto const pred      = in_stage("predictions", [&] { return json::parse(read_file(input.prediction_paths[i])); });
        auto const threshold = pred.value("threshold", ctx.config().threshold);
        auto const set       = filter_threshold(match_set_from_json(pred), threshold);
        total += in_stage("annotations", [&] {
          return evaluate_matching(set, consensus, pred.at("n_a").get<std::size_t>(), pred.at("n_b").get<std::size_t>());
        });
      }
      report["counts"] = to_json(total);
      report["scores"] = to_json(prf(total));
      did_something    = true;
    }
    if (input.annotations_path)
    {
      auto const anns = in_stage("annotations", [&] { return parse_match_annotations(read_file(*input.annotations_path)); });
      report["pairwise_agreement"] = pairwise_agreement(anns);
      json per = json::array();
      double f1_sum = 0;
      for (auto const &a : majority_f1(anns))
      {
        per.push_back(json{{"annotator_id", a.annotator_id}, {"counts", to_json(a.counts)}, {"scores", to_json(a.scores)}});
        f1_sum += a.scores.f1;
      }
      report["majority_f1"]      = per;
      report["mean_majority_f1"] = per.empty() ? json(nullptr) : json(f1_sum / static_cast<double>(per.size()));
      did_something              = true;
    }
  }
  if (!did_something)
    throw PreconditionError("validate needs --counts, --annotations, or --consensus with --predictions");
  ctx.write_artifact("reports/validation_" + input.kind + ".json", dump_stable(report));
  return {ctx.finish(ExitCode::ok), report};
}

struct AspectsInput
{
  std::string annotations_path;
  double      smoothing = 0.0;
};

inline CommandResult cmd_aspects(RunContext &ctx, AspectsInput const &input)
{
  auto const schema = ctx.config().aspect_schema_path.empty()
                        ? AspectSchema::defaults()
                        : AspectSchema::from_json(json::parse(read_file(ctx.config().aspect_schema_path)));
  auto const anns   = in_stage("annotations", [&] { return parse_aspect_annotations(read_file(input.annotations_path), schema); });
  auto const llm    = aspect_frequencies(anns, ReviewSource::llm, schema);
  auto const human  = aspect_frequencies(anns, ReviewSource::human, schema);
  auto const ratios = frequency_ratio(llm, human, input.smoothing);

  json        rows = json::array();
  std::string csv  = csv_row({"aspect_id", "label", "llm_frequency", "human_frequency", "ratio"});
  for (auto const &a : schema.aspects())
  {
    auto const &r = ratios.at(a.aspect_id);
    rows.push_back(json{{"aspect_id", a.aspect_id},
                        {"label", a.label},
                        {"llm_frequency", llm.at(a.aspect_id)},
                        {"human_frequency", human.at(a.aspect_id)},
                        {"ratio", r ? json(*r) : json("undefined")}});
    csv += csv_row({a.aspect_id, a.label, format_double(llm.at(a.aspect_id)), format_double(human.at(a.aspect_id)),
                    r ? format_double(*r) : "undefined"});
  }
  json report{{"smoothing", input.smoothing}, {"aspects", rows}};
  ctx.write_artifact("reports/aspects.json", dump_stable(report));
  ctx.write_artifact("reports/aspects.csv", csv);
  return {ctx.finish(ExitCode::ok), report};
}

// ---------------------------------------------------------------------------
// Corpus retrieval

struct FetchInput
{
  std::string    venue;
  int            year = 0;
  DecisionQuotas quotas;
  std::string    output_path;
};

inline CommandResult cmd_fetch(RunContext &ctx, FetchInput const &input)
{
  auto const seed     = ctx.config().require_seed("fetch");
  auto const platform = PlatformConfig::from_json(ctx.config().platform);
  auto const manifest = in_stage("fetch", [&] {
    return fetch_venue_reviews(input.venue, input.year, input.quotas, seed, ctx.transport(), platform);
  });
  for (auto const &w : manifest.provenance.value("warnings", json::array()))
    ctx.ledger().warn(w.get<std::string>());
  write_corpus(manifest, input.output_path);
  json summary{{"papers", manifest.papers.size()}, {"reviews", manifest.reviews.size()}, {"output", input.output_path}};
  return {ctx.finish(ctx.ledger().warnings().empty() ? ExitCode::ok : ExitCode::partial), summary};
}

}  // namespace revmatch
