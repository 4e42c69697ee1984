// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

// revmatch command-line driver.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "revmatch/revmatch.hpp"

namespace {

struct GlobalOptions
{
  std::string                  config_path;
  std::string                  mode;
  std::optional<std::uint64_t> seed;
  std::optional<int>           threshold;
  std::optional<bool>          control;
  std::string                  out;
  std::string                  corpus;
  std::string                  transcripts;
  std::string                  run_id;
};

revmatch::RunConfig make_config(GlobalOptions const &g)
{
  auto cfg = g.config_path.empty() ? revmatch::RunConfig{} : revmatch::RunConfig::load(g.config_path);
  if (!g.mode.empty())
    cfg.mode = revmatch::parse_gateway_mode(g.mode);
  if (g.seed)
    cfg.seed = *g.seed;
  if (g.threshold)
    cfg.threshold = *g.threshold;
  if (g.control)
    cfg.control = *g.control;
  if (!g.out.empty())
    cfg.out_dir = g.out;
  if (!g.corpus.empty())
    cfg.corpus_path = g.corpus;
  if (!g.transcripts.empty())
    cfg.transcripts_dir = g.transcripts;
  return cfg;
}

revmatch::DecisionQuotas parse_quotas(std::vector<std::string> const &specs)
{
  revmatch::DecisionQuotas quotas;
  for (auto const &spec : specs)
  {
    auto const eq = spec.find('=');
    if (eq == std::string::npos)
      throw revmatch::ConfigError("quota '" + spec + "' is not decision=count");
    auto const decision = revmatch::parse_decision(spec.substr(0, eq));
    if (!decision)
      throw revmatch::ConfigError("unknown decision in quota '" + spec + "'");
    quotas[*decision] = std::stoi(spec.substr(eq + 1));
  }
  return quotas;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Generate, extract, match and score review comments"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--mode", g.mode, "Gateway mode")->check(CLI::IsMember({"live", "record", "replay"}));
  app.add_option("--seed", g.seed, "Seed for sampling, shuffles and bootstrap");
  app.add_option("--threshold", g.threshold, "Minimum similarity kept (5-10)");
  app.add_flag("--control,!--no-control", g.control, "Truncate the first list of human pairs to the LLM comment count");
  app.add_option("--out", g.out, "Output root; runs go to <out>/<run_id>");
  app.add_option("--corpus", g.corpus, "Corpus file (JSON lines)");
  app.add_option("--transcripts", g.transcripts, "Transcript directory for record/replay");
  app.add_option("--run-id", g.run_id, "Override the derived run id");

  revmatch::ReviewInput review_in;
  std::string           review_flavor;
  auto *review = app.add_subcommand("review", "Generate structured feedback for one paper");
  review->add_option("--paper", review_in.paper_id, "Paper id from the corpus");
  review->add_option("--document", review_in.document_path, "Pre-parsed document JSON")->check(CLI::ExistingFile);
  review->add_option("--pdf", review_in.pdf_path, "PDF file, parsed by the configured service")->check(CLI::ExistingFile);
  review->add_option("--flavor", review_flavor, "nature_family or ml_conference");

  revmatch::ExtractInput extract_in;
  auto *extract = app.add_subcommand("extract", "Extract comment lists from feedback");
  extract->add_option("--paper", extract_in.paper_ids, "Paper ids (default: all)");
  extract->add_option("--text", extract_in.text_paths, "Feedback text files")->check(CLI::ExistingFile);

  std::string match_a, match_b;
  auto *match = app.add_subcommand("match", "Match two extracted comment lists");
  match->add_option("list_a", match_a, "Comments JSON for side A")->required()->check(CLI::ExistingFile);
  match->add_option("list_b", match_b, "Comments JSON for side B")->required()->check(CLI::ExistingFile);

  auto *analyze = app.add_subcommand("analyze", "Overlap analysis over the corpus");
  auto *shuffle = app.add_subcommand("shuffle", "Shuffled-pairing null comparison");
  std::string rule;
  shuffle->add_option("--rule", rule, "nature_journal_and_category_set or iclr_year");

  revmatch::ValidateInput validate_in;
  auto *validate = app.add_subcommand("validate", "Score the pipeline against human verification");
  validate->add_option("kind", validate_in.kind, "extraction or matching")
    ->required()
    ->check(CLI::IsMember({"extraction", "matching"}));
  validate->add_option("--counts", validate_in.counts_path, "Confusion counts (JSON or JSON lines)")
    ->check(CLI::ExistingFile);
  validate->add_option("--annotations", validate_in.annotations_path, "Per-annotator labels (JSON lines)")
    ->check(CLI::ExistingFile);
  validate->add_option("--consensus", validate_in.consensus_paths, "Consensus labels (JSON lines)")
    ->check(CLI::ExistingFile);
  validate->add_option("--predictions", validate_in.prediction_paths, "Match JSON produced by match/analyze")
    ->check(CLI::ExistingFile);

  revmatch::AspectsInput aspects_in;
  auto *aspects = app.add_subcommand("aspects", "Aspect frequencies, LLM vs human");
  aspects->add_option("annotations", aspects_in.annotations_path, "Aspect annotations (JSON lines)")
    ->required()
    ->check(CLI::ExistingFile);
  aspects->add_option("--smoothing", aspects_in.smoothing, "Additive smoothing for ratios");

  revmatch::FetchInput     fetch_in;
  std::vector<std::string> quota_specs;
  std::string              notes_file;
  auto *fetch = app.add_subcommand("fetch", "Sample a venue's submissions and reviews from the review platform");
  fetch->add_option("--venue", fetch_in.venue)->required();
  fetch->add_option("--year", fetch_in.year)->required();
  fetch->add_option("--quota", quota_specs, "decision=count, repeatable")->required();
  fetch->add_option("--output", fetch_in.output_path, "Corpus file to write")->required();
  fetch->add_option("--notes-file", notes_file, "Serve platform notes from a saved response")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try
  {
    auto cfg = make_config(g);
    if (!rule.empty())
      cfg.shuffle_rule = revmatch::parse_shuffle_rule(rule);
    bool const needs_corpus = analyze->parsed() || shuffle->parsed() || (review->parsed() && review_in.paper_id) ||
                              (extract->parsed() && (!extract_in.paper_ids.empty() || extract_in.text_paths.empty()));
    bool const needs_gateway = analyze->parsed() || shuffle->parsed() || review->parsed() || extract->parsed() ||
                               match->parsed();
    cfg.validate(needs_corpus, needs_gateway);

    std::unique_ptr<revmatch::Transport> transport;
    if (!notes_file.empty())
      transport = std::make_unique<revmatch::NotesFileTransport>(notes_file);
    else
      transport = revmatch::make_http_transport(std::chrono::seconds(cfg.gateway.timeout_s));

    auto *sub = app.get_subcommands().front();
    revmatch::json args = revmatch::json::object();
    for (auto const *opt : sub->get_options())
      if (!opt->get_lnames().empty() && opt->count() > 0)
        args[opt->get_lnames().front()] = opt->results();
    for (auto const *opt : sub->get_options())
      if (opt->get_lnames().empty() && !opt->get_name().empty() && opt->count() > 0)
        args[opt->get_name()] = opt->results();

    std::optional<std::string> run_id;
    if (!g.run_id.empty())
      run_id = g.run_id;
    revmatch::RunContext ctx(cfg, sub->get_name(), args, *transport, nullptr, run_id);

    revmatch::CommandResult result;
    if (review->parsed())
    {
      if (!review_flavor.empty())
        review_in.flavor = revmatch::parse_venue_flavor(review_flavor);
      result = revmatch::cmd_review(ctx, review_in);
    }
    else if (extract->parsed())
      result = revmatch::cmd_extract(ctx, extract_in);
    else if (match->parsed())
      result = revmatch::cmd_match(ctx, match_a, match_b);
    else if (analyze->parsed())
      result = revmatch::cmd_analyze(ctx);
    else if (shuffle->parsed())
      result = revmatch::cmd_shuffle(ctx);
    else if (validate->parsed())
      result = revmatch::cmd_validate(ctx, validate_in);
    else if (aspects->parsed())
      result = revmatch::cmd_aspects(ctx, aspects_in);
    else if (fetch->parsed())
    {
      fetch_in.quotas = parse_quotas(quota_specs);
      result          = revmatch::cmd_fetch(ctx, fetch_in);
    }

    std::cout << result.summary.dump(2) << "\n";
    std::cerr << "run directory: " << ctx.run_dir().string() << "\n";
    for (auto const &w : ctx.ledger().warnings())
      std::cerr << "warning: " << w << "\n";
    for (auto const &s : ctx.ledger().skips())
      std::cerr << "skipped: " << s.paper_id << " " << s.comparison << " " << s.list_a << " " << s.list_b << " ["
                << s.stage << "] " << s.reason << "\n";
    return static_cast<int>(result.code);
  }
  catch (revmatch::ConfigError const &e)
  {
    std::cerr << "configuration error: " << e.what() << "\n";
  }
  catch (revmatch::StageError const &e)
  {
    std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << "\n";
  }
  catch (std::exception const &e)
  {
    std::cerr << "error: " << e.what() << "\n";
  }
  return static_cast<int>(revmatch::ExitCode::failure);
}
