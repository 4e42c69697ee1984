// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Client for an OpenReview-style review platform: lists the submissions of a venue/year
// with their replies, maps decisions, and draws a seeded per-decision sample.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/http.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/random.hpp"

namespace revmatch {

/// How one venue/year is laid out on the platform.
struct VenueMapping
{
  std::string              venue;
  int                      year = 0;
  std::string              submission_invitation;
  std::string              review_suffix    = "Official_Review";
  std::string              decision_suffix  = "Decision";
  std::string              withdrawn_suffix = "Withdrawn_Submission";
  std::vector<std::string> review_fields    = {"summary_of_the_paper", "main_review", "strength_and_weaknesses",
                                               "clarity,_quality,_novelty_and_reproducibility",
                                               "summary_of_the_review", "review"};
  // Case-insensitive substring rules, first match wins.
  std::vector<std::pair<std::string, Decision>> decision_rules = {
    {"withdraw", Decision::withdrawn}, {"reject", Decision::rejected},      {"oral", Decision::oral},
    {"top 5%", Decision::oral},        {"top-5%", Decision::oral},         {"spotlight", Decision::spotlight},
    {"top 25%", Decision::spotlight},  {"top-25%", Decision::spotlight},   {"poster", Decision::poster},
    {"accept", Decision::accepted},
  };
};

/// Venue mappings keyed by (venue, year), as declared in the config file under "platform.venues":
///   {"ICLR": {"2023": {"submission_invitation": "...", "review_fields": [...]}}}
class PlatformConfig
{
public:
  std::string  endpoint;
  int          page_size = 1000;
  RetryPolicy  retry;

  void add(VenueMapping mapping) { venues_[{mapping.venue, mapping.year}] = std::move(mapping); }

  VenueMapping const &mapping(std::string const &venue, int year) const
  {
    auto it = venues_.find({venue, year});
    if (it == venues_.end())
      throw ConfigError("unknown venue: " + venue + " " + std::to_string(year) + " (no platform mapping configured)");
    return it->second;
  }

  static PlatformConfig from_json(json const &j)
  {
    PlatformConfig cfg;
    cfg.endpoint  = j.value("endpoint", "https://api2.openreview.net");
    cfg.page_size = j.value("page_size", 1000);
    if (j.contains("venues"))
    {
      for (auto const &[venue, years] : j.at("venues").items())
      {
        for (auto const &[year, spec] : years.items())
        {
          VenueMapping m;
          m.venue                 = venue;
          m.year                  = std::stoi(year);
          m.submission_invitation = spec.at("submission_invitation").get<std::string>();
          m.review_suffix         = spec.value("review_suffix", m.review_suffix);
          m.decision_suffix       = spec.value("decision_suffix", m.decision_suffix);
          m.withdrawn_suffix      = spec.value("withdrawn_suffix", m.withdrawn_suffix);
          if (spec.contains("review_fields"))
            m.review_fields = spec.at("review_fields").get<std::vector<std::string>>();
          if (spec.contains("decision_rules"))
          {
            m.decision_rules.clear();
            for (auto const &rule : spec.at("decision_rules"))
            {
              auto const d = parse_decision(rule.at(1).get<std::string>());
              if (!d)
                throw ConfigError("bad decision in decision_rules: " + rule.dump());
              m.decision_rules.emplace_back(rule.at(0).get<std::string>(), *d);
            }
          }
          cfg.add(std::move(m));
        }
      }
    }
    return cfg;
  }

private:
  std::map<std::pair<std::string, int>, VenueMapping> venues_;
};

using DecisionQuotas = std::map<Decision, int>;

namespace detail {

inline std::string url_encode(std::string const &s)
{
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string           out;
  for (unsigned char c : s)
  {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~')
      out.push_back(static_cast<char>(c));
    else
    {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xf]);
    }
  }
  return out;
}

inline std::string lower(std::string s)
{
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool ends_with(std::string const &s, std::string const &suffix)
{
  return !suffix.empty() && s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Platform content values are either plain ("v") or wrapped ({"value": "v"}).
inline std::optional<json> content_value(json const &note, std::string const &field)
{
  if (!note.contains("content") || !note.at("content").contains(field))
    return std::nullopt;
  json const &v = note.at("content").at(field);
  if (v.is_object() && v.contains("value"))
    return v.at("value");
  return v;
}

inline std::string content_text(json const &note, std::string const &field)
{
  auto v = content_value(note, field);
  if (!v)
    return {};
  if (v->is_string())
    return v->get<std::string>();
  if (v->is_array())
  {
    std::string out;
    for (auto const &e : *v)
      if (e.is_string())
        out += (out.empty() ? "" : ", ") + e.get<std::string>();
    return out;
  }
  return v->dump();
}

inline std::vector<std::string> invitations_of(json const &note)
{
  std::vector<std::string> out;
  if (note.contains("invitation") && note.at("invitation").is_string())
    out.push_back(note.at("invitation").get<std::string>());
  if (note.contains("invitations") && note.at("invitations").is_array())
    for (auto const &i : note.at("invitations"))
      out.push_back(i.get<std::string>());
  return out;
}

inline bool has_invitation_suffix(json const &note, std::string const &suffix)
{
  auto const invs = invitations_of(note);
  return std::any_of(invs.begin(), invs.end(), [&](std::string const &i) { return ends_with(i, suffix); });
}

inline Decision classify_decision(std::string const &text, VenueMapping const &m)
{
  auto const t = lower(text);
  for (auto const &[needle, decision] : m.decision_rules)
    if (t.find(lower(needle)) != std::string::npos)
      return decision;
  return Decision::unknown;
}

inline std::vector<json> replies_of(json const &note)
{
  std::vector<json> out;
  if (note.contains("details") && note.at("details").contains("replies"))
    for (auto const &r : note.at("details").at("replies"))
      out.push_back(r);
  return out;
}

}  // namespace detail

/// One submission as seen on the platform, before sampling.
struct PlatformSubmission
{
  PaperRecord               paper;
  std::vector<ReviewRecord> reviews;
};

/// Maps a platform note (with details.replies) to a paper and its position-ordered reviews.
/// Reviews are ordered by creation time (cdate), ties broken by note id.
inline PlatformSubmission map_submission(json const &note, VenueMapping const &m)
{
  PlatformSubmission s;
  s.paper.paper_id = note.at("id").get<std::string>();
  s.paper.venue    = m.venue;
  s.paper.year     = m.year;
  s.paper.title    = detail::content_text(note, "title");
  s.paper.abstract = detail::content_text(note, "abstract");

  auto replies = detail::replies_of(note);

  std::string decision_text;
  bool        withdrawn = detail::has_invitation_suffix(note, m.withdrawn_suffix);
  for (auto const &r : replies)
  {
    if (detail::has_invitation_suffix(r, m.decision_suffix))
      decision_text = detail::content_text(r, "decision");
    if (detail::has_invitation_suffix(r, m.withdrawn_suffix))
      withdrawn = true;
  }
  if (decision_text.empty())
    decision_text = detail::content_text(note, "venue");
  s.paper.decision = withdrawn ? Decision::withdrawn : detail::classify_decision(decision_text, m);

  std::vector<json> reviews;
  for (auto const &r : replies)
    if (detail::has_invitation_suffix(r, m.review_suffix))
      reviews.push_back(r);
  std::stable_sort(reviews.begin(), reviews.end(), [](json const &a, json const &b) {
    auto const ca = a.value("cdate", std::int64_t{0});
    auto const cb = b.value("cdate", std::int64_t{0});
    if (ca != cb)
      return ca < cb;
    return a.value("id", "") < b.value("id", "");
  });

  int position = 0;
  for (auto const &r : reviews)
  {
    std::string text;
    for (auto const &field : m.review_fields)
    {
      auto const value = detail::content_text(r, field);
      if (!value.empty())
        text += (text.empty() ? "" : "\n\n") + field + ": " + value;
    }
    if (text.empty())
      continue;
    ReviewRecord rec;
    rec.paper_id = s.paper.paper_id;
    rec.reviewer_id = r.value("id", "review" + std::to_string(position + 1));
    if (r.contains("signatures") && r.at("signatures").is_array() && !r.at("signatures").empty())
    {
      auto const sig = r.at("signatures").at(0).get<std::string>();
      rec.reviewer_id = sig.substr(sig.rfind('/') + 1);
    }
    rec.source   = ReviewSource::human;
    rec.position = ++position;
    rec.raw_text = std::move(text);
    s.reviews.push_back(std::move(rec));
  }
  return s;
}

/// Lists all submissions of a venue/year, paging through the platform's notes endpoint.
inline std::vector<json> list_submission_notes(Transport &transport, PlatformConfig const &cfg,
                                               VenueMapping const &m)
{
  std::vector<json> notes;
  for (int offset = 0;; offset += cfg.page_size)
  {
    HttpRequest req;
    req.method = "GET";
    req.url = cfg.endpoint + "/notes?invitation=" + detail::url_encode(m.submission_invitation) +
              "&details=replies&offset=" + std::to_string(offset) + "&limit=" + std::to_string(cfg.page_size);
    auto const response = send_with_retries(transport, req, cfg.retry);
    json       page;
    try
    {
      page = json::parse(response.body);
    }
    catch (json::exception const &e)
    {
      throw ParseError("platform returned malformed JSON: " + std::string(e.what()), response.body);
    }
    auto const &batch = page.at("notes");
    for (auto const &n : batch)
      notes.push_back(n);
    if (static_cast<int>(batch.size()) < cfg.page_size)
      break;
  }
  return notes;
}

/// Seeded reservoir sample of `k` items from `items` (order of `items` defines the stream).
template <typename T>
std::vector<T> reservoir_sample(std::vector<T> const &items, std::size_t k, SeededRng &rng)
{
  std::vector<T> reservoir;
  for (std::size_t i = 0; i < items.size(); ++i)
  {
    if (i < k)
      reservoir.push_back(items[i]);
    else
    {
      auto const j = static_cast<std::size_t>(rng.below(i + 1));
      if (j < k)
        reservoir[j] = items[i];
    }
  }
  return reservoir;
}

/// Fetches and samples a venue/year: for every decision bucket with a quota, a seeded
/// reservoir sample of that many submissions (all of them, with a warning, when fewer exist).
/// Output papers are sorted by paper_id; warnings land in provenance["warnings"].
inline CorpusManifest fetch_venue_reviews(std::string const &venue, int year, DecisionQuotas const &quotas,
                                          std::uint64_t seed, Transport &transport, PlatformConfig const &cfg)
{
  for (auto const &[decision, quota] : quotas)
    if (quota < 0)
      throw PreconditionError("quota for " + std::string(to_string(decision)) + " is negative");
  VenueMapping const &m = cfg.mapping(venue, year);

  CorpusManifest manifest;
  json           warnings = json::array();
  manifest.provenance["source"] = cfg.endpoint;
  manifest.provenance["venue"]  = venue;
  manifest.provenance["year"]   = year;
  manifest.provenance["seed"]   = seed;
  json q = json::object();
  for (auto const &[decision, quota] : quotas)
    q[std::string(to_string(decision))] = quota;
  manifest.provenance["quotas"] = q;

  bool const any_quota = std::any_of(quotas.begin(), quotas.end(), [](auto const &kv) { return kv.second > 0; });
  if (!any_quota)
  {
    manifest.provenance["warnings"] = warnings;
    return manifest;
  }

  auto const notes = list_submission_notes(transport, cfg, m);
  std::map<Decision, std::vector<PlatformSubmission>> buckets;
  for (auto const &n : notes)
  {
    auto s = map_submission(n, m);
    buckets[s.paper.decision].push_back(std::move(s));
  }

  SeededRng                       rng(seed);
  std::vector<PlatformSubmission> chosen;
  for (auto const &[decision, quota] : quotas)
  {
    if (quota == 0)
      continue;
    auto bucket = buckets[decision];
    std::sort(bucket.begin(), bucket.end(),
              [](PlatformSubmission const &a, PlatformSubmission const &b) { return a.paper.paper_id < b.paper.paper_id; });
    if (static_cast<int>(bucket.size()) < quota)
      warnings.push_back("quota " + std::to_string(quota) + " for " + std::string(to_string(decision)) +
                         " exceeds the " + std::to_string(bucket.size()) + " available papers");
    auto sample = reservoir_sample(bucket, static_cast<std::size_t>(quota), rng);
    chosen.insert(chosen.end(), sample.begin(), sample.end());
  }
  std::sort(chosen.begin(), chosen.end(),
            [](PlatformSubmission const &a, PlatformSubmission const &b) { return a.paper.paper_id < b.paper.paper_id; });
  for (auto &s : chosen)
  {
    manifest.papers.push_back(std::move(s.paper));
    for (auto &r : s.reviews)
      manifest.reviews.push_back(std::move(r));
  }
  manifest.provenance["warnings"] = warnings;
  return manifest;
}

/// Serves a saved platform response (a JSON document with a "notes" array) for offline runs,
/// honouring the offset/limit query parameters of list requests.
class NotesFileTransport final : public Transport
{
public:
  explicit NotesFileTransport(std::string const &path)
    : notes_(json::parse(read_file(path)).at("notes"))
  {}

  HttpResponse send(HttpRequest const &request) override
  {
    auto const offset = query_int(request.url, "offset", 0);
    auto const limit  = query_int(request.url, "limit", static_cast<int>(notes_.size()));
    json page;
    page["notes"] = json::array();
    for (int i = offset; i < static_cast<int>(notes_.size()) && i < offset + limit; ++i)
      page["notes"].push_back(notes_.at(i));
    page["count"] = notes_.size();
    return {200, page.dump()};
  }

private:
  static int query_int(std::string const &url, std::string const &name, int fallback)
  {
    auto const pos = url.find(name + "=");
    if (pos == std::string::npos || (pos > 0 && url[pos - 1] != '?' && url[pos - 1] != '&'))
      return fallback;
    return std::stoi(url.substr(pos + name.size() + 1));
  }

  json notes_;
};

}  // namespace revmatch
