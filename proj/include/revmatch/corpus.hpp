// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Paper/review data model and the line-delimited JSON corpus format.
//
// Each line of a corpus file is one JSON object with a "kind" discriminator:
//   {"kind":"paper", "paper_id", "venue", "year", "title", "abstract", "captions":[...],
//    "body_text", "root_categories":[...], "decision"}
//   {"kind":"review", "paper_id", "reviewer_id", "source", "position", "raw_text"}
// An optional {"kind":"provenance", ...} line carries free-form metadata.

#include <algorithm>
#include <array>
#include <compare>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/json_util.hpp"

namespace revmatch {

enum class Decision
{
  oral,
  spotlight,
  poster,
  rejected,
  withdrawn,
  accepted,
  unknown
};

inline constexpr std::array<std::pair<Decision, std::string_view>, 7> kDecisionNames{{
  {Decision::oral, "oral"},
  {Decision::spotlight, "spotlight"},
  {Decision::poster, "poster"},
  {Decision::rejected, "rejected"},
  {Decision::withdrawn, "withdrawn"},
  {Decision::accepted, "accepted"},
  {Decision::unknown, "unknown"},
}};

inline std::string_view to_string(Decision d)
{
  for (auto const &[value, name] : kDecisionNames)
    if (value == d)
      return name;
  return "unknown";
}

inline std::optional<Decision> parse_decision(std::string_view name)
{
  for (auto const &[value, text] : kDecisionNames)
    if (text == name)
      return value;
  return std::nullopt;
}

enum class ReviewSource
{
  human,
  llm
};

inline std::string_view to_string(ReviewSource s)
{
  return s == ReviewSource::human ? "human" : "llm";
}

/// Default vocabulary of top-level subject categories for journal papers.
inline std::vector<std::string> default_category_vocabulary()
{
  return {"physical sciences", "earth and environmental sciences", "biological sciences", "health sciences",
          "scientific community and society"};
}

struct PaperRecord
{
  std::string              paper_id;
  std::string              venue;
  int                      year = 0;
  std::string              title;
  std::string              abstract;
  std::vector<std::string> captions;
  std::string              body_text;
  std::set<std::string>    root_categories;
  Decision                 decision = Decision::unknown;

  bool operator==(PaperRecord const &) const = default;
};

struct ReviewRecord
{
  std::string  paper_id;
  std::string  reviewer_id;
  ReviewSource source   = ReviewSource::human;
  std::string  raw_text;
  int          position = 1;

  bool operator==(ReviewRecord const &) const = default;
};

struct CorpusManifest
{
  std::vector<PaperRecord>  papers;
  std::vector<ReviewRecord> reviews;
  json                      provenance = json::object();

  bool operator==(CorpusManifest const &) const = default;

  PaperRecord const *find_paper(std::string_view id) const
  {
    auto it = std::find_if(papers.begin(), papers.end(), [&](PaperRecord const &p) { return p.paper_id == id; });
    return it == papers.end() ? nullptr : &*it;
  }

  /// Reviews of one paper and source, ordered by position.
  std::vector<ReviewRecord const *> reviews_of(std::string_view paper_id, ReviewSource source) const
  {
    std::vector<ReviewRecord const *> out;
    for (auto const &r : reviews)
      if (r.paper_id == paper_id && r.source == source)
        out.push_back(&r);
    std::stable_sort(out.begin(), out.end(),
                     [](ReviewRecord const *a, ReviewRecord const *b) { return a->position < b->position; });
    return out;
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

inline json to_json(PaperRecord const &p)
{
  json j;
  j["kind"]            = "paper";
  j["paper_id"]        = p.paper_id;
  j["venue"]           = p.venue;
  j["year"]            = p.year;
  j["title"]           = p.title;
  j["abstract"]        = p.abstract;
  j["captions"]        = p.captions;
  j["body_text"]       = p.body_text;
  j["root_categories"] = p.root_categories;
  j["decision"]        = std::string(to_string(p.decision));
  return j;
}

inline json to_json(ReviewRecord const &r)
{
  json j;
  j["kind"]        = "review";
  j["paper_id"]    = r.paper_id;
  j["reviewer_id"] = r.reviewer_id;
  j["source"]      = std::string(to_string(r.source));
  j["position"]    = r.position;
  j["raw_text"]    = r.raw_text;
  return j;
}

inline PaperRecord paper_from_json(json const &j)
{
  PaperRecord p;
  p.paper_id  = j.at("paper_id").get<std::string>();
  p.venue     = j.value("venue", "");
  p.year      = j.value("year", 0);
  p.title     = j.value("title", "");
  p.abstract  = j.value("abstract", "");
  p.body_text = j.value("body_text", "");
  if (j.contains("captions"))
    p.captions = j.at("captions").get<std::vector<std::string>>();
  if (j.contains("root_categories"))
    for (auto const &c : j.at("root_categories"))
      p.root_categories.insert(c.get<std::string>());
  auto const decision = j.value("decision", "unknown");
  auto const parsed   = parse_decision(decision);
  if (!parsed)
    throw ParseError("unknown decision '" + decision + "'");
  p.decision = *parsed;
  return p;
}

inline ReviewRecord review_from_json(json const &j)
{
  ReviewRecord r;
  r.paper_id    = j.at("paper_id").get<std::string>();
  r.reviewer_id = j.at("reviewer_id").get<std::string>();
  auto const source = j.value("source", "human");
  if (source == "human")
    r.source = ReviewSource::human;
  else if (source == "llm")
    r.source = ReviewSource::llm;
  else
    throw ParseError("unknown review source '" + source + "'");
  r.position = j.at("position").get<int>();
  r.raw_text = j.at("raw_text").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation
{
  enum class Severity
  {
    error,
    warning
  };
  Severity    severity = Severity::error;
  std::string record;  // e.g. "paper p1" or "review p1/R2"
  std::string rule;
  std::string message;

  std::string describe() const
  {
    return std::string(severity == Severity::error ? "error" : "warning") + " [" + rule + "] " + record + ": " +
           message;
  }
};

/// Checks every record invariant. Papers without reviews are reported as warnings.
inline std::vector<Violation> validate_corpus(CorpusManifest const &manifest,
                                              std::vector<std::string> const &category_vocabulary =
                                                default_category_vocabulary())
{
  using S = Violation::Severity;
  std::vector<Violation>                   out;
  std::set<std::string> const              vocab(category_vocabulary.begin(), category_vocabulary.end());
  std::map<std::string, int>               paper_count;
  for (auto const &p : manifest.papers)
  {
    std::string const rec = "paper " + p.paper_id;
    if (p.paper_id.empty())
      out.push_back({S::error, rec, "paper_id", "paper_id is empty"});
    if (++paper_count[p.paper_id] == 2)
      out.push_back({S::error, rec, "unique_paper_id", "paper_id appears more than once"});
    for (auto const &c : p.root_categories)
      if (!vocab.empty() && !vocab.contains(c))
        out.push_back({S::error, rec, "category_vocabulary", "category '" + c + "' not in vocabulary"});
  }

  std::set<std::pair<std::string, std::string>> reviewer_keys;
  std::map<std::string, std::vector<int>>       positions;
  for (auto const &r : manifest.reviews)
  {
    std::string const rec = "review " + r.paper_id + "/" + r.reviewer_id;
    if (!paper_count.contains(r.paper_id))
      out.push_back({S::error, rec, "paper_ref", "paper_id '" + r.paper_id + "' does not resolve to a paper"});
    if (!reviewer_keys.insert({r.paper_id, r.reviewer_id}).second)
      out.push_back({S::error, rec, "unique_reviewer", "duplicate (paper_id, reviewer_id)"});
    if (r.raw_text.empty())
      out.push_back({S::error, rec, "raw_text", "raw_text is empty"});
    if (r.position < 1)
      out.push_back({S::error, rec, "position", "position must be >= 1"});
    positions[r.paper_id].push_back(r.position);
  }
  for (auto &[paper_id, list] : positions)
  {
    std::sort(list.begin(), list.end());
    for (std::size_t i = 0; i < list.size(); ++i)
    {
      if (list[i] != static_cast<int>(i) + 1)
      {
        std::string seen;
        for (int v : list)
          seen += (seen.empty() ? "" : ",") + std::to_string(v);
        out.push_back({S::error, "paper " + paper_id, "position_gap",
                       "review positions {" + seen + "} do not form 1.." + std::to_string(list.size())});
        break;
      }
    }
  }
  for (auto const &p : manifest.papers)
    if (!positions.contains(p.paper_id))
      out.push_back({S::warning, "paper " + p.paper_id, "no_reviews", "paper has no reviews; analyses skip it"});
  return out;
}

inline bool has_errors(std::vector<Violation> const &violations)
{
  return std::any_of(violations.begin(), violations.end(),
                     [](Violation const &v) { return v.severity == Violation::Severity::error; });
}

// ---------------------------------------------------------------------------
// File I/O

/// Parses corpus lines. Blank lines are ignored; errors carry the 1-based line number.
inline CorpusManifest parse_corpus(std::istream &in, std::string const &origin = "<stream>")
{
  CorpusManifest                     manifest;
  std::unordered_map<std::string, int> paper_lines;
  std::string                        line;
  int                                line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    std::string const where = origin + ":" + std::to_string(line_no);
    json              j;
    try
    {
      j = json::parse(line);
    }
    catch (json::exception const &e)
    {
      throw ParseError(where + ": malformed JSON: " + e.what(), line);
    }
    if (!j.is_object())
      throw ParseError(where + ": record is not a JSON object", line);
    auto const kind = j.value("kind", "");
    try
    {
      if (kind == "paper")
      {
        PaperRecord p = paper_from_json(j);
        auto [it, inserted] = paper_lines.emplace(p.paper_id, line_no);
        if (!inserted)
          throw ParseError(origin + ": duplicate paper_id '" + p.paper_id + "' on lines " +
                             std::to_string(it->second) + " and " + std::to_string(line_no),
                           line);
        manifest.papers.push_back(std::move(p));
      }
      else if (kind == "review")
        manifest.reviews.push_back(review_from_json(j));
      else if (kind == "provenance")
      {
        j.erase("kind");
        manifest.provenance = std::move(j);
      }
      else
        throw ParseError(where + ": unknown record kind '" + kind + "'", line);
    }
    catch (json::exception const &e)
    {
      throw ParseError(where + ": bad field: " + e.what(), line);
    }
  }
  return manifest;
}

/// Loads and validates a corpus file. Any error-severity violation is thrown.
inline CorpusManifest load_corpus(std::string const &path,
                                  std::vector<std::string> const &category_vocabulary = default_category_vocabulary())
{
  std::ifstream in(path);
  if (!in)
    throw Error("corpus file not found: " + path);
  CorpusManifest manifest   = parse_corpus(in, path);
  auto const     violations = validate_corpus(manifest, category_vocabulary);
  if (has_errors(violations))
  {
    std::string msg = path + ": corpus failed validation:";
    for (auto const &v : violations)
      if (v.severity == Violation::Severity::error)
        msg += "\n  " + v.describe();
    throw ParseError(msg);
  }
  return manifest;
}

inline std::string serialize_corpus(CorpusManifest const &manifest)
{
  std::string out;
  if (!manifest.provenance.empty())
  {
    json p = json::object();
    p["kind"] = "provenance";
    for (auto const &[k, v] : manifest.provenance.items())
      p[k] = v;
    out += p.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  }
  for (auto const &p : manifest.papers)
    out += to_json(p).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  for (auto const &r : manifest.reviews)
    out += to_json(r).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  return out;
}

inline void write_corpus(CorpusManifest const &manifest, std::string const &path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write corpus file: " + path);
  out << serialize_corpus(manifest);
}

// ---------------------------------------------------------------------------
// Stratification

enum class StratumKind
{
  by_venue,
  by_decision,
  by_category_set,
  by_year
};

inline std::string_view to_string(StratumKind k)
{
  switch (k)
  {
  case StratumKind::by_venue: return "by_venue";
  case StratumKind::by_decision: return "by_decision";
  case StratumKind::by_category_set: return "by_category_set";
  case StratumKind::by_year: return "by_year";
  }
  return "by_venue";
}

inline std::optional<StratumKind> parse_stratum_kind(std::string_view s)
{
  for (auto k : {StratumKind::by_venue, StratumKind::by_decision, StratumKind::by_category_set, StratumKind::by_year})
    if (to_string(k) == s)
      return k;
  return std::nullopt;
}

struct StratumKey
{
  StratumKind kind = StratumKind::by_venue;
  std::string value;

  auto operator<=>(StratumKey const &) const = default;
};

/// Category sets are keyed by their sorted members joined with " + "; the empty set is "(none)".
inline std::string category_set_label(std::set<std::string> const &categories)
{
  if (categories.empty())
    return "(none)";
  std::string out;
  for (auto const &c : categories)
    out += (out.empty() ? "" : " + ") + c;
  return out;
}

inline StratumKey stratum_of(PaperRecord const &p, StratumKind kind)
{
  switch (kind)
  {
  case StratumKind::by_venue: return {kind, p.venue};
  case StratumKind::by_decision: return {kind, std::string(to_string(p.decision))};
  case StratumKind::by_category_set: return {kind, category_set_label(p.root_categories)};
  case StratumKind::by_year: return {kind, std::to_string(p.year)};
  }
  return {kind, ""};
}

/// Partitions paper ids by stratum; ids keep corpus order within each group.
inline std::map<StratumKey, std::vector<std::string>> stratify(CorpusManifest const &manifest, StratumKind kind)
{
  std::map<StratumKey, std::vector<std::string>> groups;
  for (auto const &p : manifest.papers)
    groups[stratum_of(p, kind)].push_back(p.paper_id);
  return groups;
}

}  // namespace revmatch
