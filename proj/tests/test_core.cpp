// Corpus, utilities, statistics, metrics, validation and aspects.
// Reference numbers marked "oracle" come from tests/oracles/oracles.py (see expected.json).

#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <sstream>

#include "revmatch/revmatch.hpp"

using namespace revmatch;
using Catch::Approx;

namespace {

std::string fixture(std::string const &rel)
{
  return std::string(REVMATCH_FIXTURES_DIR) + "/" + rel;
}

MatchSet thresholded(std::vector<RawMatch> matches, int t = 7)
{
  MatchSet ms;
  ms.list_a_id = "A";
  ms.list_b_id = "B";
  ms.matches   = std::move(matches);
  return filter_threshold(ms, t);
}

}  // namespace

// ---------------------------------------------------------------------------
// corpus

TEST_CASE("fixture corpus loads and validates", "[corpus]")
{
  auto const corpus = load_corpus(fixture("fixture_corpus.jsonl"));
  REQUIRE(corpus.papers.size() == 6);
  CHECK(corpus.provenance.at("source") == "hand-written fixture");
  auto const *p1 = corpus.find_paper("p1");
  REQUIRE(p1);
  CHECK(p1->venue == "Nature Communications");
  CHECK(p1->year == 2022);
  auto const humans = corpus.reviews_of("p1", ReviewSource::human);
  REQUIRE(humans.size() == 3);
  CHECK(humans[0]->position == 1);
  CHECK(corpus.find_paper("nope") == nullptr);
}

TEST_CASE("corpus round-trips through serialisation", "[corpus]")
{
  auto const        corpus = load_corpus(fixture("fixture_corpus.jsonl"));
  std::istringstream in(serialize_corpus(corpus));
  CHECK(parse_corpus(in) == corpus);
}

TEST_CASE("corpus parse errors carry line numbers", "[corpus]")
{
  std::istringstream bad("{\"kind\":\"paper\",\"paper_id\":\"a\",\"venue\":\"v\",\"year\":1}\n\nnot json\n");
  try
  {
    (void)parse_corpus(bad, "c.jsonl");
    FAIL("expected ParseError");
  }
  catch (ParseError const &e)
  {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("c.jsonl:3"));
  }

  std::istringstream dup(R"({"kind":"paper","paper_id":"a","venue":"v","year":1}
{"kind":"paper","paper_id":"a","venue":"v","year":1})");
  CHECK_THROWS_WITH(parse_corpus(dup), Catch::Matchers::ContainsSubstring("duplicate paper_id 'a'"));

  std::istringstream unknown(R"({"kind":"poster"})");
  CHECK_THROWS_AS(parse_corpus(unknown), ParseError);
}

TEST_CASE("corpus validation reports each broken invariant", "[corpus]")
{
  CorpusManifest m;
  PaperRecord p;
  p.paper_id        = "p";
  p.venue           = "v";
  p.year            = 2020;
  p.root_categories = {"astrology"};
  m.papers.push_back(p);
  p.paper_id        = "lonely";
  p.root_categories = {};
  m.papers.push_back(p);
  m.reviews.push_back({"p", "R1", ReviewSource::human, "text", 1});
  m.reviews.push_back({"p", "R1", ReviewSource::human, "", 3});
  m.reviews.push_back({"ghost", "R1", ReviewSource::human, "text", 1});

  std::set<std::string> rules;
  for (auto const &v : validate_corpus(m))
    rules.insert(v.rule);
  CHECK(rules == std::set<std::string>{"category_vocabulary", "unique_reviewer", "raw_text", "paper_ref",
                                       "position_gap", "no_reviews"});
  auto const v = validate_corpus(m);
  auto const warn =
    std::find_if(v.begin(), v.end(), [](Violation const &x) { return x.rule == "no_reviews"; });
  CHECK(warn->severity == Violation::Severity::warning);
  CHECK(has_errors(v));
}

TEST_CASE("stratification keys", "[corpus]")
{
  auto const corpus = load_corpus(fixture("fixture_corpus.jsonl"));
  auto const venues = stratify(corpus, StratumKind::by_venue);
  CHECK(venues.size() == 3);
  CHECK(venues.at({StratumKind::by_venue, "Nature Communications"}) == std::vector<std::string>{"p1", "p2", "p3"});
  CHECK(category_set_label({}) == "(none)");
  CHECK(category_set_label({"physical sciences", "earth sciences"}) == "earth sciences + physical sciences");
  CHECK(stratify(corpus, StratumKind::by_year).size() == 3);
  CHECK(parse_stratum_kind("by_year") == StratumKind::by_year);
  CHECK_FALSE(parse_stratum_kind("by_colour"));
}

TEST_CASE("decision names round-trip", "[corpus]")
{
  for (auto const &[value, name] : kDecisionNames)
    CHECK(parse_decision(name) == value);
  CHECK_FALSE(parse_decision("maybe"));
}

// ---------------------------------------------------------------------------
// utilities

TEST_CASE("transcript keys match the reference hash", "[hashing]")
{
  // oracle: transcript_keys
  CompletionRequest r{"gpt-4", "Hello, w\xc3\xb6rld", {0.0, 1024}, Purpose::extraction};
  CHECK(canonical_request(r) ==
        "{\"max_output_tokens\":1024,\"model_id\":\"gpt-4\",\"prompt_text\":\"Hello, w\xc3\xb6rld\",\"temperature\":0.0}");
  CHECK(transcript_key(r) == "be405464497805c828faa98fd249c398f511ca1665673513729d805a5d0f8443");

  CompletionRequest q{"gpt-4", "line one\nline \"two\"", {0.7, 1500}, Purpose::review_generation};
  CHECK(transcript_key(q) == "b93da890540d172209e92af4eaa0449745a8c1723c39990d6eab20cf36ea8863");

  // Purpose is not part of the key.
  r.purpose = Purpose::matching;
  CHECK(transcript_key(r) == "be405464497805c828faa98fd249c398f511ca1665673513729d805a5d0f8443");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("json object recovery", "[json]")
{
  auto const rec = recover_first_object("Sure! Here you go:\n```json\n{\"1\": \"a {b}\", \"2\": \"c\",}\n```\nThanks");
  REQUIRE(rec);
  REQUIRE(rec->members.size() == 2);
  CHECK(rec->members[0].key == "1");
  CHECK(detail::strip_trailing_commas("{\"a\": [1,2,],}") == "{\"a\": [1,2]}");
  CHECK(detail::strip_trailing_commas("{\"a\": \",}\"}") == "{\"a\": \",}\"}");
  CHECK_FALSE(recover_first_object("no braces here"));
  CHECK_FALSE(recover_first_object("{\"unterminated\": "));
}

TEST_CASE("atomic writes create parents and replace content", "[json]")
{
  auto const dir = std::filesystem::temp_directory_path() / "revmatch-core-atomic";
  std::filesystem::remove_all(dir);
  write_file_atomic(dir / "a" / "b.txt", "one");
  write_file_atomic(dir / "a" / "b.txt", "two");
  CHECK(read_file((dir / "a" / "b.txt").string()) == "two");
  CHECK(std::distance(std::filesystem::directory_iterator(dir / "a"), {}) == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("seeded draws match the reference engine", "[random]")
{
  // oracle: below_10_seed_42
  SeededRng        rng(42);
  std::vector<int> got;
  for (int i = 0; i < 8; ++i)
    got.push_back(static_cast<int>(rng.below(10)));
  CHECK(got == std::vector<int>{6, 4, 0, 2, 1, 8, 6, 4});
}

// ---------------------------------------------------------------------------
// tokenizers

TEST_CASE("built-in tokenizers", "[tokenize]")
{
  CHECK(count_tokens("  two words ", "whitespace") == 2);
  CHECK(count_tokens("Hello, world!", "simple") == 4);
  CHECK(count_tokens("", "simple") == 0);
  CHECK_THROWS_AS(count_tokens("x", "no-such-tokenizer"), ConfigError);
}

TEST_CASE("simple and whitespace counts are additive under space-joined concatenation", "[tokenize]")
{
  std::vector<std::string> const parts{"alpha, beta", "(gamma)", "d\xc3\xa9j\xc3\xa0 vu", "x-y-z", ""};
  for (auto const *id : {"simple", "whitespace"})
    for (auto const &a : parts)
      for (auto const &b : parts)
        CHECK(count_tokens(a + " " + b, id) == count_tokens(a, id) + count_tokens(b, id));
}

TEST_CASE("wordpiece counts match the reference", "[tokenize]")
{
  register_wordpiece_tokenizer("test-wp", fixture("vocab.txt"));
  // oracle: wordpiece_counts
  CHECK(count_tokens("the models", "test-wp") == 2);
  CHECK(count_tokens("unbelievable tokenizers", "test-wp") == 7);
  CHECK(count_tokens("attention, longer sequences!", "test-wp") == 10);
  CHECK(count_tokens("the xyz model", "test-wp") == 5);
}

// ---------------------------------------------------------------------------
// statistics

TEST_CASE("bootstrap interval matches the reference", "[stats]")
{
  std::vector<double> const v{0.2, 0.5, 0.9, 0.4, 0.7};
  auto const                ci = bootstrap_ci(v, 42, 1000);
  // oracle: bootstrap
  CHECK(ci.lo == Approx(0.34).epsilon(1e-12));
  CHECK(ci.hi == Approx(0.76).epsilon(1e-12));
  CHECK(mean(v) == Approx(0.54));

  std::vector<double> const one{0.3};
  auto const                degenerate = bootstrap_ci(one, 1, 50);
  CHECK(degenerate.lo == 0.3);
  CHECK(degenerate.hi == 0.3);
  CHECK_THROWS_AS(bootstrap_ci(std::vector<double>{}, 1), PreconditionError);
}

TEST_CASE("permutation pearson matches the reference", "[stats]")
{
  std::vector<double> const xs{1, 2, 3, 4}, ys{1, 3, 2, 4};
  auto const                c = pearson_r(xs, ys, 3, 999);
  // oracle: pearson
  CHECK(c.r == Approx(0.8).epsilon(1e-12));
  CHECK(c.p == Approx(0.349).epsilon(1e-12));
  CHECK_THROWS_AS(pearson_r(std::vector<double>{1, 2}, std::vector<double>{1, 2}, 1), PreconditionError);
  CHECK_THROWS_AS(pearson_r(xs, std::vector<double>{2, 2, 2, 2}, 1), PreconditionError);
}

TEST_CASE("percentile interpolation", "[stats]")
{
  std::vector<double> const s{1, 2, 3, 4};
  CHECK(percentile_sorted(s, 0) == 1);
  CHECK(percentile_sorted(s, 100) == 4);
  CHECK(percentile_sorted(s, 50) == Approx(2.5));
}

// ---------------------------------------------------------------------------
// matching helpers and assignment

TEST_CASE("threshold, restriction and side swap", "[matching]")
{
  MatchSet ms;
  ms.matches = {{1, 1, 9, ""}, {1, 2, 6, ""}, {2, 2, 7, ""}, {3, 1, 5, ""}};
  auto const t7 = filter_threshold(ms, 7);
  CHECK(t7.matches.size() == 2);
  CHECK(t7.threshold_applied == 7);
  CHECK_THROWS_AS(filter_threshold(ms, 4), PreconditionError);
  CHECK_THROWS_AS(filter_threshold(ms, 11), PreconditionError);

  auto const r = restrict_a(filter_threshold(ms, 5), 2);
  CHECK(r.matches.size() == 3);
  auto const s = swap_sides(t7);
  REQUIRE(s.matches.size() == 2);
  CHECK(s.matches[0].a_ordinal == 1);
  CHECK(s.matches[1].a_ordinal == 2);
  CHECK(s.matches[1].b_ordinal == 2);
}

TEST_CASE("one-to-one assignment prefers cardinality then similarity then order", "[matching]")
{
  // A1 could take B1 (10) but then A2 has nothing; the maximum has two pairs.
  auto a = assign_one_to_one(thresholded({{1, 1, 10, ""}, {1, 2, 7, ""}, {2, 1, 8, ""}}));
  REQUIRE(a.size() == 2);
  CHECK(a.pairs[0] == AssignedPair{1, 2, 7});
  CHECK(a.pairs[1] == AssignedPair{2, 1, 8});
  CHECK(a.matched_a == std::set<int>{1, 2});

  // Equal-total alternatives resolve to the smallest pair list.
  auto tie = assign_one_to_one(thresholded({{1, 1, 8, ""}, {1, 2, 8, ""}, {2, 1, 8, ""}, {2, 2, 8, ""}}));
  REQUIRE(tie.size() == 2);
  CHECK(tie.pairs[0] == AssignedPair{1, 1, 8});
  CHECK(tie.pairs[1] == AssignedPair{2, 2, 8});

  // One B comment matched by three A comments.
  auto star = assign_one_to_one(thresholded({{1, 4, 7, ""}, {2, 4, 9, ""}, {3, 4, 8, ""}}));
  REQUIRE(star.size() == 1);
  CHECK(star.pairs[0] == AssignedPair{2, 4, 9});
  CHECK(star.matched_a.size() == 3);

  CHECK(assign_one_to_one(thresholded({})).size() == 0);
  MatchSet raw;
  CHECK_THROWS_AS(assign_one_to_one(raw), PreconditionError);
}

// ---------------------------------------------------------------------------
// overlap metrics

TEST_CASE("overlap scores match the reference", "[metrics]")
{
  auto const a = assign_one_to_one(thresholded({{1, 2, 8, ""}, {3, 1, 9, ""}, {4, 5, 7, ""}}));
  auto const s = overlap_scores(a, 5, 8);
  // oracle: overlap
  CHECK(s.hit_rate == Approx(0.6));
  CHECK(s.overlap_coefficient == Approx(0.6));
  CHECK(s.jaccard == Approx(0.3));
  CHECK(s.dice == Approx(0.46153846153846156));
  CHECK(s.m == 3);

  CHECK_THROWS_AS(overlap_scores(0, 0, 0, 3), PreconditionError);
  CHECK_THROWS_AS(overlap_scores(0, 0, 3, 0), PreconditionError);
  CHECK_THROWS_AS(overlap_scores(4, 4, 5, 3), PreconditionError);
  CHECK_THROWS_AS(overlap_scores(2, 1, 5, 3), PreconditionError);
}

TEST_CASE("control truncates to the first n comments", "[metrics]")
{
  auto const list = CommentList::from_texts("f", {"a", "b", "c"}, "A");
  CHECK(apply_control(list, 2).size() == 2);
  CHECK(apply_control(list, 2).comments[1].text == "b");
  CHECK(apply_control(list, 9).size() == 3);
  CHECK(apply_control(list, 0).empty());
}

TEST_CASE("derangements", "[metrics]")
{
  // oracle: derangement_5_seed_11
  SeededRng rng(11);
  CHECK(random_derangement(5, rng) == std::vector<std::size_t>{3, 0, 4, 1, 2});

  // oracle: derangements_of_3; both 3-cycles appear.
  std::set<std::vector<std::size_t>> seen;
  SeededRng                          r3(1);
  for (int i = 0; i < 200; ++i)
    seen.insert(random_derangement(3, r3));
  CHECK(seen == std::set<std::vector<std::size_t>>{{1, 2, 0}, {2, 0, 1}});
}

TEST_CASE("shuffle plans group, exclude singletons and are seed-stable", "[metrics]")
{
  auto const corpus = load_corpus(fixture("fixture_corpus.jsonl"));
  auto const plan   = plan_shuffle(corpus, ShuffleRule::nature_journal_and_category_set, 7);
  CHECK(plan.excluded == std::vector<std::string>{"p6"});
  CHECK(plan.groups.size() == 3);
  for (auto const &[paper, donor] : plan.pairing)
  {
    CHECK(paper != donor);
    CHECK(shuffle_group_key(*corpus.find_paper(paper), plan.rule) ==
          shuffle_group_key(*corpus.find_paper(donor), plan.rule));
  }
  CHECK(plan_shuffle(corpus, ShuffleRule::nature_journal_and_category_set, 7).pairing == plan.pairing);
  CHECK(shuffle_group_key(*corpus.find_paper("p4"), ShuffleRule::iclr_year) == "Nature Physics 2023");
  CHECK(parse_shuffle_rule("iclr") == ShuffleRule::iclr_year);
  CHECK_THROWS_AS(parse_shuffle_rule("random"), ConfigError);
}

TEST_CASE("recall by reviewer count", "[metrics]")
{
  // Three reviewers with 2, 2 and 1 comments. R1#1 ~ R2#1 ~ R3#1 form one cluster (k=3),
  // R1#2 ~ R2#2 (k=2).
  std::vector<ReviewerComments> reviewers{{"R1", 2, {1}}, {"R2", 2, {2}}, {"R3", 1, {}}};
  std::vector<HumanPairMatches> matches{{0, 1, thresholded({{1, 1, 8, ""}, {2, 2, 8, ""}})},
                                        {1, 2, thresholded({{1, 1, 9, ""}})}};
  auto const r = recall_by_reviewer_count(reviewers, matches);
  CHECK(r.size() == 2);
  CHECK(r.at(3).total == 3);
  CHECK(r.at(3).hits == 1);
  CHECK(r.at(2).total == 2);
  CHECK(r.at(2).hits == 1);

  // Without cross matches every comment is k=1.
  auto const lone = recall_by_reviewer_count(reviewers, {});
  CHECK(lone.at(1).total == 5);
  CHECK(lone.at(1).hits == 2);

  std::vector<HumanPairMatches> bad{{0, 1, thresholded({{3, 1, 8, ""}})}};
  CHECK_THROWS_AS(recall_by_reviewer_count(reviewers, bad), PreconditionError);
}

TEST_CASE("positional quartiles", "[metrics]")
{
  CHECK(quarter_of(0, 1) == 0);
  CHECK(quarter_of(4, 5) == 3);
  CHECK(quarter_of(2, 4) == 2);
  CHECK_THROWS_AS(quarter_of(3, 3), PreconditionError);
  auto const q = positional_quartile_rates({{true, false, true, false}, {true}});
  CHECK(q[0].hits == 2);
  CHECK(q[0].total == 2);
  CHECK(q[1].total == 1);
  CHECK(q[2].hits == 1);
  CHECK(q[3].rate() == 0.0);
  CHECK_THROWS_AS(positional_quartile_rates({{}}), PreconditionError);
}

// ---------------------------------------------------------------------------
// validation

TEST_CASE("precision, recall and F1 from verification counts", "[validation]")
{
  // oracle: prf_extraction, prf_matching
  auto const e = prf({.tp = 2634, .fp = 63, .fn = 110});
  CHECK(e.precision == Approx(0.9766407119021134));
  CHECK(e.recall == Approx(0.9599125364431487));
  CHECK(e.f1 == Approx(0.9682043741959199));
  auto const m = prf({.tp = 685, .fp = 197, .fn = 95, .tn = 11058});
  CHECK(m.precision == Approx(0.7766439909297053));
  CHECK(m.recall == Approx(0.8782051282051282));
  CHECK(m.f1 == Approx(0.8243080625752106));

  auto const empty = prf({});
  CHECK(empty.degenerate);
  CHECK(empty.f1 == 0);
}

TEST_CASE("label evaluation over the pair universe", "[validation]")
{
  CHECK(pair_universe(2, 2) == std::vector<std::string>{"A1-B1", "A1-B2", "A2-B1", "A2-B2"});
  LabelMap const consensus{{"A1-B1", MatchLabel::matched},
                           {"A1-B2", MatchLabel::not_matched},
                           {"A2-B1", MatchLabel::not_matched},
                           {"A2-B2", MatchLabel::matched}};
  auto const c = evaluate_matching(thresholded({{1, 1, 8, ""}, {2, 1, 7, ""}}), consensus, 2, 2);
  CHECK(c == ConfusionCounts{.tp = 1, .fp = 1, .fn = 1, .tn = 1});

  LabelMap partial{{"A1-B1", MatchLabel::matched}};
  CHECK_THROWS(evaluate_labels({}, partial, pair_universe(2, 2)));
  LabelMap stray = consensus;
  stray["A9-B9"] = MatchLabel::matched;
  CHECK_THROWS_AS(evaluate_labels({}, stray, pair_universe(2, 2)), ParseError);
}

TEST_CASE("annotator agreement and majority", "[validation]")
{
  auto const anns = parse_match_annotations(R"({"pair_id":"A1-B1","annotator_id":"x","label":"matched"}
{"pair_id":"A1-B1","annotator_id":"y","label":"matched"}
{"pair_id":"A1-B1","annotator_id":"z","label":"not_matched"}
{"pair_id":"A1-B2","annotator_id":"x","label":"not_matched"}
{"pair_id":"A1-B2","annotator_id":"y","label":"not_matched"}
{"pair_id":"A1-B2","annotator_id":"z","label":"not_matched"}
)");
  REQUIRE(anns.size() == 6);
  // Pairs of annotators: (x,y) agree twice, (x,z) and (y,z) once each: 4/6.
  CHECK(pairwise_agreement(anns) == Approx(4.0 / 6.0));
  auto const maj = majority_labels(anns);
  CHECK(maj.at("A1-B1") == MatchLabel::matched);
  CHECK(maj.at("A1-B2") == MatchLabel::not_matched);
  auto const f1 = majority_f1(anns);
  REQUIRE(f1.size() == 3);
  CHECK(f1[2].annotator_id == "z");
  CHECK(f1[2].scores.f1 == 0.0);
  CHECK(f1[0].scores.f1 == 1.0);

  std::vector<MatchAnnotation> even(anns.begin(), anns.begin() + 2);
  CHECK_THROWS_AS(majority_labels(even), PreconditionError);
  CHECK_THROWS_AS(parse_match_annotations(R"({"pair_id":"A1-B1","label":"perhaps"})"), ParseError);
  CHECK(parse_label_map(R"({"pair_id":"A1-B1","label":"matched"})").size() == 1);
}

// ---------------------------------------------------------------------------
// aspects

TEST_CASE("aspect schema", "[aspects]")
{
  auto const s = AspectSchema::defaults();
  CHECK(s.aspects().size() == 9);
  CHECK(s.contains("novelty"));
  CHECK_FALSE(s.contains("vibes"));
  CHECK_THROWS(AspectSchema::from_json(json::parse(R"({"aspects":[{"aspect_id":"a"},{"aspect_id":"a"}]})")));
  auto const custom = AspectSchema::from_json(json::parse(R"({"aspects":[{"aspect_id":"a","label":"A"}]})"));
  CHECK(custom.aspects().size() == 1);
}

TEST_CASE("aspect frequencies and ratios match the reference", "[aspects]")
{
  auto const schema = AspectSchema::defaults();
  auto const anns   = parse_aspect_annotations(read_file(fixture("aspects/annotations.jsonl")), schema);
  auto const llm    = aspect_frequencies(anns, ReviewSource::llm, schema);
  auto const human  = aspect_frequencies(anns, ReviewSource::human, schema);
  // oracle: aspects
  CHECK(llm.at("more_datasets") == Approx(0.4));
  CHECK(llm.at("implications") == Approx(0.2));
  CHECK(human.at("clarity_presentation") == Approx(0.375));
  CHECK(human.at("novelty") == Approx(0.25));
  auto const ratio = frequency_ratio(llm, human);
  CHECK(*ratio.at("more_datasets") == Approx(3.2));
  CHECK(*ratio.at("novelty") == Approx(1.6));
  CHECK(*ratio.at("clarity_presentation") == 0.0);
  CHECK_FALSE(ratio.at("ethics"));
  CHECK_FALSE(ratio.at("implications"));
  CHECK(*frequency_ratio(llm, human, 0.1).at("ethics") == Approx(1.0));

  CHECK_THROWS_AS(parse_aspect_annotations(R"({"feedback_id":"x","ordinal":1,"source":"llm","aspect_ids":["vibes"]})",
                                           schema),
                  ParseError);
  CHECK_THROWS_AS(parse_aspect_annotations(R"({"feedback_id":"x","ordinal":1,"source":"llm"}
{"feedback_id":"x","ordinal":1,"source":"llm"})",
                                           schema),
                  ParseError);
  std::vector<AspectAnnotation> only_llm{{"x", 1, ReviewSource::llm, {}}};
  CHECK_THROWS_AS(aspect_frequencies(only_llm, ReviewSource::human, schema), PreconditionError);
}
