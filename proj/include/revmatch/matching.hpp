// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Similarity-rated matching between two comment lists and the derived one-to-one assignment.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/extraction.hpp"
#include "revmatch/feedback.hpp"
#include "revmatch/gateway.hpp"
#include "revmatch/json_util.hpp"

namespace revmatch {

inline constexpr int kMinSimilarity     = 5;
inline constexpr int kMaxSimilarity     = 10;
inline constexpr int kDefaultThreshold  = 7;

struct RawMatch
{
  int         a_ordinal  = 0;
  int         b_ordinal  = 0;
  int         similarity = kMinSimilarity;
  std::string rationale;

  std::string a_id() const { return "A" + std::to_string(a_ordinal); }
  std::string b_id() const { return "B" + std::to_string(b_ordinal); }

  bool operator==(RawMatch const &) const = default;
};

struct MatchSet
{
  std::string           list_a_id;
  std::string           list_b_id;
  std::vector<RawMatch> matches;  // sorted by (a_ordinal, b_ordinal), no duplicate pairs
  std::optional<int>    threshold_applied;

  bool operator==(MatchSet const &) const = default;
};

inline constexpr std::string_view kReviewAPlaceholder = "<Review_A>";
inline constexpr std::string_view kReviewBPlaceholder = "<Review_B>";

inline constexpr std::string_view kMatchingTemplate =
  "Your task is to carefully analyze and accurately match the key concerns raised in two reviews, ensuring a strong "
  "correspondence between the matched points. Examine the verbatim closely.\n"
  "====Review A:\n"
  "<Review_A>\n"
  "=====Review B:\n"
  "<Review_B>\n"
  "Please follow the example JSON format below for matching points. For instance, if point 1 from review A is nearly "
  "identical to point 2 from review B, it should look like this:\n"
  "{\n"
  "\"A1-B2\": {\"rationale\": \"<explain why A1 and B2 are nearly identical>\", \"similarity\": \"<5-10, only an "
  "integer>\"},\n"
  "}\n"
  "Note that you should only match points with a significant degree of similarity in their concerns. Refrain from "
  "matching points with only superficial similarities or weak connections. For each matched pair, rate the "
  "similarity on a scale of 5-10.\n"
  "5. Somewhat Related: Points address similar themes but from different angles.\n"
  "6. Moderately Related: Points share a common theme but with different perspectives or suggestions.\n"
  "7. Strongly Related: Points are largely aligned but differ in some details or nuances.\n"
  "8. Very Strongly Related: Points offer similar suggestions or concerns, with slight differences.\n"
  "9. Almost Identical: Points are nearly the same, with minor differences in wording or presentation.\n"
  "10. Identical: Points are exactly the same in terms of concerns, suggestions, or praises.\n"
  "If no match is found, output an empty JSON object. Provide your output as JSON only.\n";

inline constexpr std::string_view kMatchingRepairTemplate =
  "The output below was supposed to be a JSON object whose keys are pairs of matching point IDs such as \"A1-B2\" "
  "and whose values have the form {\"rationale\": \"...\", \"similarity\": \"<5-10, only an integer>\"}, but no "
  "JSON object could be read from it.\n"
  "====Output:\n"
  "<Malformed_output>\n"
  "====\n"
  "Rewrite it as a single valid JSON object in that format, keeping the same matches. If there are no matches, "
  "output an empty JSON object. Provide your output as JSON only.\n";

inline std::string build_matching_prompt(CommentList const &list_a, CommentList const &list_b)
{
  if (list_a.empty() || list_b.empty())
    throw PreconditionError("matching needs two non-empty comment lists");
  auto const a = comments_as_object(list_a).dump(2, ' ', false, json::error_handler_t::replace);
  auto const b = comments_as_object(list_b).dump(2, ' ', false, json::error_handler_t::replace);
  return substitute(kMatchingTemplate, {{kReviewAPlaceholder, a}, {kReviewBPlaceholder, b}});
}

namespace detail {

// "A12-B3" (case-insensitive, spaces allowed around the dash) -> (12, 3).
inline std::optional<std::pair<int, int>> parse_pair_key(std::string_view key)
{
  std::string k;
  for (char c : key)
    if (!std::isspace(static_cast<unsigned char>(c)))
      k.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  auto const dash = k.find('-');
  if (dash == std::string::npos || dash < 2 || k[0] != 'A' || dash + 1 >= k.size() || k[dash + 1] != 'B')
    return std::nullopt;
  auto digits = [](std::string const &s) -> std::optional<int> {
    if (s.empty() || s.size() > 6 || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::nullopt;
    return std::stoi(s);
  };
  auto const a = digits(k.substr(1, dash - 1));
  auto const b = digits(k.substr(dash + 2));
  if (!a || !b)
    return std::nullopt;
  return std::pair{*a, *b};
}

inline std::optional<int> parse_similarity(json const &v)
{
  if (v.is_number_integer())
    return v.get<int>();
  if (v.is_number_float())
  {
    double const d = v.get<double>();
    if (std::isfinite(d) && std::floor(d) == d && std::abs(d) < 1e6)
      return static_cast<int>(d);
    return std::nullopt;
  }
  if (v.is_string())
  {
    auto const s = trim(v.get<std::string>());
    if (s.empty() || s.size() > 6 || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
      return std::nullopt;
    return std::stoi(s);
  }
  return std::nullopt;
}

}  // namespace detail

struct MatchParse
{
  MatchSet                 set;
  std::vector<std::string> warnings;
};

/// Reads the judge's {"A<i>-B<j>": {"rationale", "similarity"}} object. Entries with unknown
/// ids or a similarity that is not an integer in [5, 10] are dropped with a warning; a
/// repeated pair keeps its highest similarity.
inline MatchParse parse_match_json(std::string_view raw, CommentList const &list_a, CommentList const &list_b)
{
  auto recovered = recover_first_object(raw);
  if (!recovered)
    throw ParseError("no balanced JSON object in matching output", std::string(raw));

  MatchParse out;
  out.set.list_a_id = list_a.feedback_id;
  out.set.list_b_id = list_b.feedback_id;
  std::map<std::pair<int, int>, RawMatch> kept;
  int const n_a = static_cast<int>(list_a.size());
  int const n_b = static_cast<int>(list_b.size());
  for (auto const &m : recovered->members)
  {
    auto const ids = detail::parse_pair_key(m.key);
    if (!ids)
    {
      out.warnings.push_back("dropped \"" + m.key + "\": key is not of the form A<i>-B<j>");
      continue;
    }
    auto const [a, b] = *ids;
    if (a < 1 || a > n_a || b < 1 || b > n_b)
    {
      out.warnings.push_back("dropped \"" + m.key + "\": unknown comment id (|A|=" + std::to_string(n_a) +
                             ", |B|=" + std::to_string(n_b) + ")");
      continue;
    }
    if (!m.value.is_object() || !m.value.contains("similarity"))
    {
      out.warnings.push_back("dropped \"" + m.key + "\": no similarity rating");
      continue;
    }
    auto const similarity = detail::parse_similarity(m.value.at("similarity"));
    if (!similarity)
    {
      out.warnings.push_back("dropped \"" + m.key + "\": similarity " + m.value.at("similarity").dump() +
                             " is not an integer");
      continue;
    }
    if (*similarity < kMinSimilarity || *similarity > kMaxSimilarity)
    {
      out.warnings.push_back("dropped \"" + m.key + "\": similarity " + std::to_string(*similarity) +
                             " outside [5, 10]");
      continue;
    }
    std::string rationale;
    if (m.value.contains("rationale") && m.value.at("rationale").is_string())
      rationale = m.value.at("rationale").get<std::string>();
    RawMatch match{a, b, *similarity, std::move(rationale)};
    auto [it, inserted] = kept.emplace(std::pair{a, b}, match);
    if (!inserted)
    {
      out.warnings.push_back("duplicate pair \"" + match.a_id() + "-" + match.b_id() + "\": kept the higher similarity");
      if (match.similarity > it->second.similarity)
        it->second = std::move(match);
    }
  }
  for (auto &[key, match] : kept)
    out.set.matches.push_back(std::move(match));
  return out;
}

/// Matches with similarity >= t.
inline MatchSet filter_threshold(MatchSet const &ms, int t)
{
  if (t < kMinSimilarity || t > kMaxSimilarity)
    throw PreconditionError("similarity threshold " + std::to_string(t) + " outside [5, 10]");
  MatchSet out = ms;
  out.matches.clear();
  for (auto const &m : ms.matches)
    if (m.similarity >= t)
      out.matches.push_back(m);
  out.threshold_applied = t;
  return out;
}

/// Keeps only matches whose A-side ordinal is <= n (used by the comment-count control).
inline MatchSet restrict_a(MatchSet const &ms, std::size_t n)
{
  MatchSet out = ms;
  out.matches.clear();
  for (auto const &m : ms.matches)
    if (static_cast<std::size_t>(m.a_ordinal) <= n)
      out.matches.push_back(m);
  return out;
}

/// The same matches seen from the other side (A and B exchanged).
inline MatchSet swap_sides(MatchSet const &ms)
{
  MatchSet out;
  out.list_a_id         = ms.list_b_id;
  out.list_b_id         = ms.list_a_id;
  out.threshold_applied = ms.threshold_applied;
  for (auto const &m : ms.matches)
    out.matches.push_back({m.b_ordinal, m.a_ordinal, m.similarity, m.rationale});
  std::sort(out.matches.begin(), out.matches.end(), [](RawMatch const &x, RawMatch const &y) {
    return std::tie(x.a_ordinal, x.b_ordinal) < std::tie(y.a_ordinal, y.b_ordinal);
  });
  return out;
}

// ---------------------------------------------------------------------------
// One-to-one assignment

struct AssignedPair
{
  int a_ordinal  = 0;
  int b_ordinal  = 0;
  int similarity = 0;

  bool operator==(AssignedPair const &) const = default;
};

struct AssignedMatching
{
  std::vector<AssignedPair> pairs;      // sorted by a_ordinal
  std::set<int>             matched_a;  // A ordinals with at least one retained match
  std::set<int>             matched_b;

  std::size_t size() const noexcept { return pairs.size(); }
};

namespace detail {

// Maximum-weight assignment on a rows x cols matrix (rows <= cols) of non-negative integer
// weights; returns the optimum and, per row, the chosen column. O(rows^2 * cols).
inline long long max_weight_assignment(std::vector<std::vector<long long>> const &w, std::vector<int> *choice = nullptr)
{
  std::size_t const n = w.size();
  if (n == 0)
    return 0;
  std::size_t const m = w.front().size();
  long long         max_w = 0;
  for (auto const &row : w)
    for (auto v : row)
      max_w = std::max(max_w, v);
  // Minimise cost = max_w - weight with the classic potentials-based Hungarian method.
  constexpr long long      inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long>   u(n + 1, 0), v(m + 1, 0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i)
  {
    p[0]            = i;
    std::size_t j0  = 0;
    std::vector<long long> minv(m + 1, inf);
    std::vector<bool>      used(m + 1, false);
    do
    {
      used[j0]             = true;
      std::size_t const i0 = p[j0];
      long long         delta = inf;
      std::size_t       j1    = 0;
      for (std::size_t j = 1; j <= m; ++j)
      {
        if (used[j])
          continue;
        long long const cur = (max_w - w[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cur < minv[j])
        {
          minv[j] = cur;
          way[j]  = j0;
        }
        if (minv[j] < delta)
        {
          delta = minv[j];
          j1    = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j)
      {
        if (used[j])
        {
          u[p[j]] += delta;
          v[j] -= delta;
        }
        else
          minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do
    {
      std::size_t const j1 = way[j0];
      p[j0]                = p[j1];
      j0                   = j1;
    } while (j0);
  }
  long long total = 0;
  if (choice)
    choice->assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
  {
    if (p[j] == 0)
      continue;
    total += w[p[j] - 1][j - 1];
    if (choice)
      (*choice)[p[j] - 1] = static_cast<int>(j - 1);
  }
  return total;
}

}  // namespace detail

/// Maximum-cardinality one-to-one assignment over the retained matches; among those, maximal
/// total similarity; remaining ties go to the lexicographically smallest pair list, comparing
/// ids by ordinal.
inline AssignedMatching assign_one_to_one(MatchSet const &ms)
{
  if (!ms.threshold_applied)
    throw PreconditionError("assign_one_to_one needs a thresholded MatchSet");
  AssignedMatching out;
  for (auto const &m : ms.matches)
  {
    out.matched_a.insert(m.a_ordinal);
    out.matched_b.insert(m.b_ordinal);
  }
  if (ms.matches.empty())
    return out;

  // Compress to the comments that take part in some match.
  std::vector<int> rows(out.matched_a.begin(), out.matched_a.end());
  std::vector<int> cols(out.matched_b.begin(), out.matched_b.end());
  bool const       transpose = rows.size() > cols.size();
  if (transpose)
    std::swap(rows, cols);
  auto index_of = [](std::vector<int> const &v, int x) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };

  // Cardinality dominates: each edge weighs bonus + similarity with bonus > any similarity total.
  long long const bonus = 1 + static_cast<long long>(kMaxSimilarity) * static_cast<long long>(rows.size() + 1);
  std::vector<std::vector<long long>> weight(rows.size(), std::vector<long long>(cols.size(), 0));
  struct Edge
  {
    int         a, b, similarity;
    std::size_t r, c;
  };
  std::vector<Edge> edges;
  for (auto const &m : ms.matches)
  {
    std::size_t const r = index_of(rows, transpose ? m.b_ordinal : m.a_ordinal);
    std::size_t const c = index_of(cols, transpose ? m.a_ordinal : m.b_ordinal);
    weight[r][c]        = bonus + m.similarity;
    edges.push_back({m.a_ordinal, m.b_ordinal, m.similarity, r, c});
  }
  std::sort(edges.begin(), edges.end(),
            [](Edge const &x, Edge const &y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });

  long long const optimum = detail::max_weight_assignment(weight);

  // Optimum of the sub-problem without the given rows/columns.
  std::vector<bool> row_used(rows.size(), false), col_used(cols.size(), false);
  auto residual = [&]() {
    std::vector<std::size_t> free_rows, free_cols;
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (!row_used[r])
        free_rows.push_back(r);
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (!col_used[c])
        free_cols.push_back(c);
    if (free_rows.empty() || free_cols.empty())
      return 0LL;
    bool const flip = free_rows.size() > free_cols.size();
    std::vector<std::vector<long long>> sub(flip ? free_cols.size() : free_rows.size(),
                                            std::vector<long long>(flip ? free_rows.size() : free_cols.size()));
    for (std::size_t i = 0; i < free_rows.size(); ++i)
      for (std::size_t j = 0; j < free_cols.size(); ++j)
        (flip ? sub[j][i] : sub[i][j]) = weight[free_rows[i]][free_cols[j]];
    return detail::max_weight_assignment(sub);
  };

  long long committed = 0;
  for (auto const &e : edges)
  {
    if (row_used[e.r] || col_used[e.c])
      continue;
    row_used[e.r] = col_used[e.c] = true;
    long long const with_edge     = committed + weight[e.r][e.c] + residual();
    if (with_edge == optimum)
    {
      committed += weight[e.r][e.c];
      out.pairs.push_back({e.a, e.b, e.similarity});
    }
    else
      row_used[e.r] = col_used[e.c] = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running the judge

struct MatchingConfig
{
  std::string model_id = "gpt-4";
  Sampling    sampling{0.0, 1024};
};

struct MatchOutcome
{
  MatchSet                 set;  // raw, unthresholded
  std::vector<std::string> warnings;
  std::vector<std::string> transcript_keys;
};

/// Anything that can rate pairs of comments from two lists.
class CommentMatcher
{
public:
  virtual ~CommentMatcher()                                                      = default;
  virtual MatchOutcome match(CommentList const &list_a, CommentList const &list_b) = 0;
};

/// One judge call (plus one repair call if no JSON object can be read). Empty lists
/// short-circuit to an empty MatchSet without any call.
inline MatchOutcome match_comments(CommentList const &list_a, CommentList const &list_b, Gateway &gateway,
                                   MatchingConfig const &cfg)
{
  MatchOutcome out;
  out.set.list_a_id = list_a.feedback_id;
  out.set.list_b_id = list_b.feedback_id;
  if (list_a.empty() || list_b.empty())
    return out;
  CompletionRequest request{cfg.model_id, build_matching_prompt(list_a, list_b), cfg.sampling, Purpose::matching};
  auto const        first = gateway.complete(request);
  out.transcript_keys.push_back(first.transcript_key);
  try
  {
    auto parsed  = parse_match_json(first.text, list_a, list_b);
    out.set      = std::move(parsed.set);
    out.warnings = std::move(parsed.warnings);
    return out;
  }
  catch (ParseError const &)
  {
    CompletionRequest repair{cfg.model_id, substitute(kMatchingRepairTemplate, {{"<Malformed_output>", first.text}}),
                             cfg.sampling, Purpose::matching};
    auto const second = gateway.complete(repair);
    out.transcript_keys.push_back(second.transcript_key);
    try
    {
      auto parsed  = parse_match_json(second.text, list_a, list_b);
      out.set      = std::move(parsed.set);
      out.warnings = std::move(parsed.warnings);
      return out;
    }
    catch (ParseError const &again)
    {
      throw ParseError("matching " + list_a.feedback_id + " vs " + list_b.feedback_id +
                         " failed after repair: " + again.what(),
                       second.text);
    }
  }
}

class LlmMatcher final : public CommentMatcher
{
public:
  LlmMatcher(Gateway &gateway, MatchingConfig cfg)
    : gateway_(gateway)
    , cfg_(std::move(cfg))
  {}

  MatchOutcome match(CommentList const &list_a, CommentList const &list_b) override
  {
    return match_comments(list_a, list_b, gateway_, cfg_);
  }

private:
  Gateway       &gateway_;
  MatchingConfig cfg_;
};

inline json to_json(MatchSet const &raw, int threshold, std::size_t n_a, std::size_t n_b,
                    std::vector<std::string> const &transcript_keys = {},
                    std::vector<std::string> const &warnings        = {})
{
  auto const assignment = assign_one_to_one(filter_threshold(raw, threshold));
  json       j;
  j["list_a_id"] = raw.list_a_id;
  j["list_b_id"] = raw.list_b_id;
  j["threshold"] = threshold;
  j["n_a"]       = n_a;
  j["n_b"]       = n_b;
  j["matches"]   = json::array();
  for (auto const &m : raw.matches)
    j["matches"].push_back(
      json{{"a_id", m.a_id()}, {"b_id", m.b_id()}, {"similarity", m.similarity}, {"rationale", m.rationale}});
  j["assignment"] = json::array();
  for (auto const &p : assignment.pairs)
    j["assignment"].push_back(
      json{{"a_id", "A" + std::to_string(p.a_ordinal)}, {"b_id", "B" + std::to_string(p.b_ordinal)}});
  j["transcript_keys"] = transcript_keys;
  j["warnings"]        = warnings;
  return j;
}

/// Reads a persisted MatchSet (all raw matches; threshold not applied).
inline MatchSet match_set_from_json(json const &j)
{
  MatchSet ms;
  ms.list_a_id = j.value("list_a_id", "");
  ms.list_b_id = j.value("list_b_id", "");
  for (auto const &m : j.at("matches"))
  {
    auto const ids = detail::parse_pair_key(m.at("a_id").get<std::string>() + "-" + m.at("b_id").get<std::string>());
    if (!ids)
      throw ParseError("bad match ids in " + m.dump());
    ms.matches.push_back({ids->first, ids->second, m.at("similarity").get<int>(), m.value("rationale", "")});
  }
  std::sort(ms.matches.begin(), ms.matches.end(), [](RawMatch const &x, RawMatch const &y) {
    return std::tie(x.a_ordinal, x.b_ordinal) < std::tie(y.a_ordinal, y.b_ordinal);
  });
  return ms;
}

}  // namespace revmatch
