// End-to-end runs over the bundled fixture in replay mode, plus configuration handling.
// Expected fixture numbers are frozen from tests/oracles (fixture_analysis), which derives
// them from the corpus tags without running this code.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "fixture_recording.hpp"

using namespace revmatch;
using namespace revmatch::testing;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path fresh_dir(std::string const &name)
{
  auto const dir = std::filesystem::temp_directory_path() / ("revmatch-pipeline-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

RunConfig replay_config(std::filesystem::path const &out)
{
  auto cfg    = fixture_config();
  cfg.out_dir = out.string();
  return cfg;
}

json read_json(std::filesystem::path const &p)
{
  return json::parse(read_file(p.string()));
}

std::map<std::string, std::string> tree_contents(std::filesystem::path const &root)
{
  std::map<std::string, std::string> out;
  for (auto const &e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out[std::filesystem::relative(e.path(), root).generic_string()] = read_file(e.path().string());
  return out;
}

}  // namespace

TEST_CASE("replay analyze matches the tag-derived expectations", "[pipeline]")
{
  auto const     out = fresh_dir("analyze");
  ProbeTransport probe;
  RunContext     ctx(replay_config(out), "analyze", json::object(), probe);
  auto const     result = cmd_analyze(ctx);

  CHECK(result.code == ExitCode::partial);
  CHECK(probe.requests == 0);
  CHECK(result.summary.at("papers") == 6);
  CHECK(result.summary.at("pairs_scored") == 41);
  CHECK(result.summary.at("pairs_attempted") == 45);
  CHECK(result.summary.at("skips") == 4);

  auto const report  = read_json(ctx.run_dir() / "reports/analysis.json");
  auto const overall = report.at("overall");
  auto       check_summary = [&](std::string const &cmp, double m, double lo, double hi, int n) {
    INFO(cmp);
    auto const &s = overall.at(cmp).at("hit_rate");
    CHECK(s.at("n_papers") == n);
    CHECK(s.at("mean").get<double>() == Approx(m).epsilon(1e-12));
    CHECK(s.at("ci_low").get<double>() == Approx(lo).epsilon(1e-12));
    CHECK(s.at("ci_high").get<double>() == Approx(hi).epsilon(1e-12));
  };
  // oracle: fixture_analysis.hit_rate
  check_summary("llm_vs_human", 0.6166666666666666, 0.4333333333333333, 0.8166666666666667, 5);
  check_summary("human_vs_human", 0.5277777777777778, 0.3194444444444444, 0.7083333333333334, 6);
  check_summary("human_vs_human_controlled", 0.4, 0.2, 0.5, 5);
  CHECK(overall.at("llm_vs_any_reviewer").at("hit_rate").at("mean").get<double>() ==
        Approx(0.8666666666666666).epsilon(1e-12));

  // oracle: fixture_analysis.recall_by_k and quartiles
  auto const &recall = report.at("recall_by_reviewer_count");
  CHECK(recall.at("1").at("hits") == 4);
  CHECK(recall.at("1").at("total") == 11);
  CHECK(recall.at("2").at("hits") == 4);
  CHECK(recall.at("2").at("total") == 8);
  CHECK(recall.at("3+").at("hits") == 3);
  CHECK(recall.at("3+").at("total") == 3);
  std::vector<std::pair<int, int>> const quarters{{9, 11}, {1, 3}, {1, 8}, {0, 0}};
  for (std::size_t q = 0; q < 4; ++q)
  {
    CHECK(report.at("positional_quartiles").at(q).at("hits") == quarters[q].first);
    CHECK(report.at("positional_quartiles").at(q).at("total") == quarters[q].second);
  }

  // Only by_year has three strata; the others report why no correlation exists.
  CHECK(report.at("correlations").at("by_year").at("n_strata") == 3);
  CHECK(report.at("correlations").at("by_year").at("r").is_number());
  CHECK(report.at("correlations").at("by_venue").at("r").is_null());
  CHECK_THAT(report.at("correlations").at("by_venue").at("undefined").get<std::string>(),
             ContainsSubstring("at least 3"));

  auto const ledger = read_json(ctx.run_dir() / "ledger.json");
  CHECK(ledger.at("status") == "partial");
  CHECK(ledger.at("run_id") == ctx.ledger().run_id);
  CHECK(ledger.at("transcript_keys").at("matching").size() > 0);
  std::filesystem::remove_all(out);
}

TEST_CASE("the N=0 control case is reported only as a skip", "[pipeline]")
{
  auto const     out = fresh_dir("skips");
  ProbeTransport probe;
  RunContext     ctx(replay_config(out), "analyze", json::object(), probe);
  (void)cmd_analyze(ctx);
  auto const report = read_json(ctx.run_dir() / "reports/analysis.json");

  for (auto const &p : report.at("pairs"))
    if (p.at("paper_id") == "p6")
      CHECK(p.at("comparison") == "human_vs_human");
  std::size_t control_skips = 0;
  for (auto const &s : report.at("skips"))
  {
    CHECK(s.at("paper_id") == "p6");
    if (s.at("stage") == "control")
    {
      ++control_skips;
      CHECK_THAT(s.at("reason").get<std::string>(), ContainsSubstring("N=0"));
    }
  }
  CHECK(control_skips == 2);
  auto const csv = read_file((ctx.run_dir() / "reports/skips.csv").string());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  std::filesystem::remove_all(out);
}

TEST_CASE("replay runs are byte-identical and offline", "[pipeline]")
{
  auto const     out_a = fresh_dir("det-a");
  auto const     out_b = fresh_dir("det-b");
  ProbeTransport probe;
  std::string    id_a, id_b;
  {
    RunContext ctx(replay_config(out_a), "analyze", json::object(), probe);
    (void)cmd_analyze(ctx);
    id_a = ctx.ledger().run_id;
  }
  {
    auto cfg = replay_config(out_b);
    cfg.gateway.max_in_flight = 1;  // scheduling must not change outputs
    RunContext ctx(cfg, "analyze", json::object(), probe);
    (void)cmd_analyze(ctx);
    id_b = ctx.ledger().run_id;
  }
  // max_in_flight is part of the configuration snapshot, so ids differ; contents must not,
  // apart from the ledger's configuration echo.
  auto a = tree_contents(out_a / id_a);
  auto b = tree_contents(out_b / id_b);
  a.erase("ledger.json");
  b.erase("ledger.json");
  for (auto *t : {&a, &b})
  {
    auto &analysis = (*t)["reports/analysis.json"];
    auto  j        = json::parse(analysis);
    j.erase("run_id");
    analysis = j.dump();
  }
  CHECK(a == b);
  CHECK(probe.requests == 0);

  // Same configuration again: same run id, identical files including the ledger.
  auto const out_c = fresh_dir("det-c");
  {
    RunContext ctx(replay_config(out_c), "analyze", json::object(), probe);
    (void)cmd_analyze(ctx);
    CHECK(ctx.ledger().run_id == id_a);
  }
  CHECK(tree_contents(out_a / id_a) == tree_contents(out_c / id_a));
  for (auto const &d : {out_a, out_b, out_c})
    std::filesystem::remove_all(d);
}

TEST_CASE("shuffled pairings lose the overlap", "[pipeline]")
{
  auto const     out = fresh_dir("shuffle");
  ProbeTransport probe;
  RunContext     ctx(replay_config(out), "shuffle", json::object(), probe);
  auto const     result = cmd_shuffle(ctx);
  CHECK(result.code == ExitCode::ok);
  CHECK(probe.requests == 0);
  CHECK(result.summary.at("original_hit_rate").at("mean").get<double>() == Approx(0.6166666666666666));
  CHECK(result.summary.at("shuffled_hit_rate").at("mean").get<double>() == 0.0);

  auto const report = read_json(ctx.run_dir() / "reports/shuffle.json");
  CHECK(report.at("excluded") == json::array({"p6"}));
  auto const corpus = load_corpus(fixture_config().corpus_path);
  for (auto const &[paper, donor] : report.at("pairing").items())
  {
    CHECK(paper != donor.get<std::string>());
    CHECK(shuffle_group_key(*corpus.find_paper(paper), ShuffleRule::nature_journal_and_category_set) ==
          shuffle_group_key(*corpus.find_paper(donor.get<std::string>()), ShuffleRule::nature_journal_and_category_set));
  }
  CHECK_THAT(ctx.ledger().warnings().front(), ContainsSubstring("p6"));
  std::filesystem::remove_all(out);
}

TEST_CASE("reviews replay from a PDF and from a corpus paper", "[pipeline]")
{
  auto const     out = fresh_dir("review");
  ProbeTransport probe;
  {
    RunContext  ctx(replay_config(out), "review", json{{"pdf", "sample_paper.pdf"}}, probe);
    ReviewInput in;
    in.pdf_path       = (fixtures_dir() / "sample_paper.pdf").string();
    auto const result = cmd_review(ctx, in);
    CHECK(result.code == ExitCode::ok);
    CHECK(result.summary.at("sections").size() == 4);
    CHECK_THAT(result.summary.at("sections").at("reasons_reject").get<std::string>(),
               ContainsSubstring("[s1:coverage]"));
    CHECK(std::filesystem::exists(ctx.run_dir() / "feedback/sample_paper.prompt.txt"));
  }
  {
    RunContext  ctx(replay_config(out), "review", json{{"paper", "p4"}}, probe);
    ReviewInput in;
    in.paper_id       = "p4";
    auto const result = cmd_review(ctx, in);
    CHECK(result.summary.at("paper_id") == "p4");
    CHECK(result.summary.at("flavor") == "nature_family");
  }
  {
    // A flavor that was never recorded is a replay miss, reported against the review stage.
    RunContext  ctx(replay_config(out), "review", json{{"paper", "p4"}, {"flavor", "ml"}}, probe);
    ReviewInput in;
    in.paper_id = "p4";
    in.flavor   = VenueFlavor::ml_conference;
    try
    {
      (void)cmd_review(ctx, in);
      FAIL("expected StageError");
    }
    catch (StageError const &e)
    {
      CHECK(e.stage() == "review");
      CHECK_THAT(e.what(), ContainsSubstring("replay"));
    }
  }
  CHECK(probe.requests == 0);
  std::filesystem::remove_all(out);
}

TEST_CASE("replay misses become skips, not crashes", "[pipeline]")
{
  auto const out = fresh_dir("miss");
  // Edit one human review so its extraction prompt was never recorded.
  auto       corpus = load_corpus(fixture_config().corpus_path);
  for (auto &r : corpus.reviews)
    if (r.paper_id == "p2" && r.reviewer_id == "R2")
      r.raw_text += "- An unrecorded extra concern [p2:extra].\n";
  std::filesystem::create_directories(out);
  write_corpus(corpus, (out / "edited.jsonl").string());

  auto cfg        = replay_config(out / "runs");
  cfg.corpus_path = (out / "edited.jsonl").string();
  ProbeTransport probe;
  RunContext     ctx(cfg, "analyze", json::object(), probe);
  auto const     result = cmd_analyze(ctx);
  CHECK(result.code == ExitCode::partial);
  CHECK(result.summary.at("papers") == 5);
  bool found = false;
  for (auto const &s : ctx.ledger().skips())
    if (s.paper_id == "p2")
    {
      found = true;
      CHECK(s.stage == "extraction");
    }
  CHECK(found);
  CHECK(probe.requests == 0);
  std::filesystem::remove_all(out);
}

TEST_CASE("a fresh recording reproduces the bundled transcripts", "[pipeline]")
{
  auto const dir = fresh_dir("record");
  record_fixture_transcripts(dir / "transcripts", dir / "runs");
  auto const fresh   = tree_contents(dir / "transcripts");
  auto const bundled = tree_contents(fixtures_dir() / "transcripts");
  CHECK(fresh.size() == bundled.size());
  CHECK(fresh == bundled);
  std::filesystem::remove_all(dir);
}

TEST_CASE("record mode only calls the provider for missing transcripts", "[pipeline]")
{
  auto const dir = fresh_dir("record-hit");
  std::filesystem::create_directories(dir);
  std::filesystem::copy(fixtures_dir() / "transcripts", dir / "transcripts", std::filesystem::copy_options::recursive);
  auto cfg            = replay_config(dir / "runs");
  cfg.mode            = GatewayMode::record;
  cfg.transcripts_dir = (dir / "transcripts").string();
  auto           provider = std::make_shared<SyntheticProvider>();
  ProbeTransport probe;
  RunContext     ctx(cfg, "analyze", json::object(), probe, provider);
  (void)cmd_analyze(ctx);
  CHECK(provider->calls == 0);
  CHECK(probe.requests == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("live and record modes need credentials", "[pipeline]")
{
  ::unsetenv("REVMATCH_TEST_MISSING_KEY");
  auto cfg                = replay_config(fresh_dir("creds"));
  cfg.gateway.api_key_env = "REVMATCH_TEST_MISSING_KEY";
  ProbeTransport probe;
  for (auto mode : {GatewayMode::live, GatewayMode::record})
  {
    cfg.mode = mode;
    CHECK_THROWS_WITH(RunContext(cfg, "analyze", json::object(), probe),
                      ContainsSubstring("missing credentials") && ContainsSubstring("REVMATCH_TEST_MISSING_KEY"));
  }
  cfg.mode = GatewayMode::replay;
  CHECK_NOTHROW(RunContext(cfg, "analyze", json::object(), probe));
  CHECK(probe.requests == 0);
}

TEST_CASE("configuration checks and run identity", "[config]")
{
  auto cfg = fixture_config();
  CHECK_NOTHROW(cfg.validate(true));
  cfg.threshold = 4;
  CHECK_THROWS_WITH(cfg.validate(false), ContainsSubstring("threshold must lie in"));
  cfg           = fixture_config();
  cfg.seed      = std::nullopt;
  CHECK_THROWS_AS(cfg.require_seed("analyze"), ConfigError);
  cfg.transcripts_dir = "/nonexistent/transcripts";
  CHECK_THROWS_AS(cfg.validate(false), ConfigError);

  auto a    = fixture_config();
  auto b    = fixture_config();
  b.out_dir = "/somewhere/else";
  CHECK(a.snapshot() == b.snapshot());
  b.threshold = 8;
  CHECK(a.snapshot() != b.snapshot());

  ProbeTransport probe;
  RunContext     x(a, "analyze", json::object(), probe);
  RunContext     y(b, "analyze", json::object(), probe);
  CHECK(x.ledger().run_id != y.ledger().run_id);
  CHECK(x.ledger().run_id.size() == 16);
  CHECK_THROWS_AS(RunContext(a, "analyze", json::object(), probe, nullptr, std::string("../escape")), ConfigError);

  auto const parsed = RunConfig::from_json(json::parse(R"({"threshold": 9, "control": false,
    "sampling": {"review": {"temperature": 0.2, "max_output_tokens": 900}}, "venue_flavors": {"ICLR": "ml_conference"},
    "corpus": "data/c.jsonl"})"),
                                           "/base");
  CHECK(parsed.threshold == 9);
  CHECK_FALSE(parsed.control);
  CHECK(parsed.review_sampling.max_output_tokens == 900);
  CHECK(parsed.flavor_for("ICLR") == VenueFlavor::ml_conference);
  CHECK(parsed.flavor_for("Nature") == VenueFlavor::nature_family);
  CHECK(parsed.corpus_path == "/base/data/c.jsonl");
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"flavor": "poetry"})"), "/"), ConfigError);
}

TEST_CASE("a higher threshold never raises the hit rate", "[pipeline]")
{
  double previous = 2.0;
  for (int t = 5; t <= 10; ++t)
  {
    auto const     out = fresh_dir("threshold");
    auto           cfg = replay_config(out);
    cfg.threshold      = t;
    ProbeTransport probe;
    RunContext     ctx(cfg, "analyze", json::object(), probe);
    auto const     result = cmd_analyze(ctx);
    auto const     m      = result.summary.at("overall").at("llm_vs_human").at("hit_rate").at("mean").get<double>();
    INFO("threshold " << t);
    CHECK(m <= previous);
    previous = m;
    std::filesystem::remove_all(out);
  }
  CHECK(previous == 0.0);  // nothing in the fixture is rated above 8
}

TEST_CASE("extract and match commands", "[pipeline]")
{
  auto const     out = fresh_dir("extract");
  ProbeTransport probe;
  {
    RunContext   ctx(replay_config(out), "extract", json::object(), probe);
    ExtractInput in;
    in.paper_ids = {"p1"};
    auto const result = cmd_extract(ctx, in);
    CHECK(result.code == ExitCode::ok);
    CHECK(result.summary.at("p1/llm") == 3);
    CHECK(result.summary.at("p1/R1") == 3);
    CHECK(result.summary.at("p1/R3") == 2);
  }
  {
    // Free-standing text that was never recorded.
    std::filesystem::create_directories(out);
    write_file_atomic(out / "note.txt", "- a point that nobody recorded\n");
    RunContext   ctx(replay_config(out), "extract", json{{"text", "note"}}, probe);
    ExtractInput in;
    in.text_paths     = {(out / "note.txt").string()};
    auto const result = cmd_extract(ctx, in);
    CHECK(result.code == ExitCode::failure);
    REQUIRE(ctx.ledger().skips().size() == 1);
    CHECK(ctx.ledger().skips()[0].stage == "extraction");
  }
  {
    RunContext analyze_ctx(replay_config(out), "analyze", json::object(), probe);
    (void)cmd_analyze(analyze_ctx);
    auto const comments = analyze_ctx.run_dir() / "comments";
    RunContext ctx(replay_config(out), "match", json::object(), probe);
    auto const result = cmd_match(ctx, (comments / "p1_llm.json").string(), (comments / "p1_R1.json").string());
    CHECK(result.code == ExitCode::ok);
    CHECK(result.summary.at("scores").at("hit_rate").get<double>() == Approx(1.0 / 3.0));  // only [p1:power] is shared
    CHECK(result.summary.at("assignment").size() == 1);
  }
  CHECK(probe.requests == 0);
  std::filesystem::remove_all(out);
}

TEST_CASE("validate command", "[pipeline]")
{
  auto const     out = fresh_dir("validate");
  ProbeTransport probe;
  auto const     vdir = fixtures_dir() / "validation";
  {
    RunContext    ctx(replay_config(out), "validate", json::object(), probe);
    ValidateInput in;
    in.kind        = "extraction";
    in.counts_path = (vdir / "extraction_counts.json").string();
    auto const r   = cmd_validate(ctx, in);
    CHECK(r.summary.at("scores").at("precision").get<double>() == Approx(0.9766407119021134));
    CHECK(std::filesystem::exists(ctx.run_dir() / "reports/validation_extraction.json"));
  }
  {
    std::filesystem::create_directories(out);
    write_file_atomic(out / "consensus.jsonl", R"({"pair_id":"A1-B1","label":"matched"}
{"pair_id":"A1-B2","label":"not_matched"}
{"pair_id":"A2-B1","label":"matched"}
{"pair_id":"A2-B2","label":"not_matched"}
)");
    write_file_atomic(out / "pred.json", R"({"list_a_id":"a","list_b_id":"b","threshold":7,"n_a":2,"n_b":2,
      "matches":[{"a_id":"A1","b_id":"B1","similarity":9},{"a_id":"A2","b_id":"B2","similarity":8},
                 {"a_id":"A2","b_id":"B1","similarity":6}]})");
    write_file_atomic(out / "annotators.jsonl", R"({"pair_id":"A1-B1","annotator_id":"x","label":"matched"}
{"pair_id":"A1-B1","annotator_id":"y","label":"matched"}
{"pair_id":"A1-B1","annotator_id":"z","label":"matched"}
)");
    RunContext    ctx(replay_config(out), "validate", json{{"kind", "matching"}}, probe);
    ValidateInput in;
    in.kind             = "matching";
    in.consensus_paths  = {(out / "consensus.jsonl").string()};
    in.prediction_paths = {(out / "pred.json").string()};
    in.annotations_path = (out / "annotators.jsonl").string();
    auto const r        = cmd_validate(ctx, in);
    // Kept at threshold 7: A1-B1 (tp), A2-B2 (fp); A2-B1 is rated 6 and counts as fn.
    CHECK(r.summary.at("counts") == json{{"tp", 1}, {"fp", 1}, {"fn", 1}, {"tn", 1}});
    CHECK(r.summary.at("pairwise_agreement").get<double>() == 1.0);
  }
  {
    RunContext    ctx(replay_config(out), "validate", json::object(), probe);
    ValidateInput in;
    in.kind = "matching";
    CHECK_THROWS_AS(cmd_validate(ctx, in), PreconditionError);
  }
  CHECK(load_confusion_counts("{\"tp\":1,\"fp\":2}\n{\"tp\":3,\"fn\":4}\n") == ConfusionCounts{4, 2, 4, 0});
  CHECK_THROWS_AS(load_confusion_counts("{\"tp\":-1}"), ParseError);
  std::filesystem::remove_all(out);
}

TEST_CASE("aspects command", "[pipeline]")
{
  auto const     out = fresh_dir("aspects");
  ProbeTransport probe;
  RunContext     ctx(replay_config(out), "aspects", json::object(), probe);
  AspectsInput   in;
  in.annotations_path = (fixtures_dir() / "aspects/annotations.jsonl").string();
  auto const r        = cmd_aspects(ctx, in);
  std::map<std::string, json> by_id;
  for (auto const &row : r.summary.at("aspects"))
    by_id[row.at("aspect_id").get<std::string>()] = row;
  CHECK(by_id.at("ethics").at("ratio") == "undefined");
  CHECK(by_id.at("more_datasets").at("ratio").get<double>() == Approx(3.2));
  auto const csv = read_file((ctx.run_dir() / "reports/aspects.csv").string());
  CHECK_THAT(csv, ContainsSubstring("ethics,Ethical Aspects,0.000000,0.000000,undefined"));
  std::filesystem::remove_all(out);
}
