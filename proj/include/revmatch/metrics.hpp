// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Overlap metrics between comment sets, the comment-count control, the shuffle null plan,
// recall by number of reviewers and positional quartile rates.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/extraction.hpp"
#include "revmatch/matching.hpp"
#include "revmatch/random.hpp"

namespace revmatch {

/// Hit rate uses the A comments with at least one retained match; the symmetric metrics use
/// the one-to-one assignment size m.
struct OverlapScores
{
  double      hit_rate            = 0;
  double      overlap_coefficient = 0;
  double      jaccard             = 0;
  double      dice                = 0;
  std::size_t m                   = 0;
  std::size_t n_a                 = 0;
  std::size_t n_b                 = 0;
  std::size_t matched_a_count     = 0;
};

inline OverlapScores overlap_scores(std::size_t m, std::size_t matched_a_count, std::size_t n_a, std::size_t n_b)
{
  if (n_a == 0 || n_b == 0)
    throw PreconditionError("overlap metrics need non-empty comment sets (n_a=" + std::to_string(n_a) +
                            ", n_b=" + std::to_string(n_b) + ")");
  if (m > std::min(n_a, n_b) || matched_a_count > n_a || m > matched_a_count)
    throw PreconditionError("assignment inconsistent with comment set sizes");
  OverlapScores s;
  s.m                   = m;
  s.n_a                 = n_a;
  s.n_b                 = n_b;
  s.matched_a_count     = matched_a_count;
  auto const dm         = static_cast<double>(m);
  s.hit_rate            = static_cast<double>(matched_a_count) / static_cast<double>(n_a);
  s.overlap_coefficient = dm / static_cast<double>(std::min(n_a, n_b));
  s.jaccard             = dm / static_cast<double>(n_a + n_b - m);
  s.dice                = 2.0 * dm / static_cast<double>(n_a + n_b);
  return s;
}

inline OverlapScores overlap_scores(AssignedMatching const &assignment, std::size_t n_a, std::size_t n_b)
{
  return overlap_scores(assignment.size(), assignment.matched_a.size(), n_a, n_b);
}

// ---------------------------------------------------------------------------
// Control for the number of comments

enum class ControlSource
{
  gpt_comment_count
};

struct ControlPolicy
{
  bool          enabled  = true;
  ControlSource n_source = ControlSource::gpt_comment_count;
};

/// First min(n, |list|) comments. An empty result means the pair must be skipped.
inline CommentList apply_control(CommentList const &list_a, std::size_t n)
{
  return list_a.prefix(n);
}

// ---------------------------------------------------------------------------
// Shuffle null model

enum class ShuffleRule
{
  nature_journal_and_category_set,
  iclr_year
};

inline std::string_view to_string(ShuffleRule r)
{
  return r == ShuffleRule::iclr_year ? "iclr_year" : "nature_journal_and_category_set";
}

inline ShuffleRule parse_shuffle_rule(std::string_view s)
{
  if (s == "nature_journal_and_category_set" || s == "nature")
    return ShuffleRule::nature_journal_and_category_set;
  if (s == "iclr_year" || s == "iclr")
    return ShuffleRule::iclr_year;
  throw ConfigError("unknown shuffle rule '" + std::string(s) + "'");
}

struct ShufflePlan
{
  ShuffleRule                        rule = ShuffleRule::nature_journal_and_category_set;
  std::uint64_t                      seed = 0;
  std::map<std::string, std::string> pairing;   // paper -> paper whose LLM feedback it receives
  std::vector<std::string>           excluded;  // members of singleton groups
  std::map<std::string, std::vector<std::string>> groups;
};

inline std::string shuffle_group_key(PaperRecord const &p, ShuffleRule rule)
{
  if (rule == ShuffleRule::iclr_year)
    return p.venue + " " + std::to_string(p.year);
  return p.venue + " / " + category_set_label(p.root_categories);
}

/// Uniform derangement of 0..n-1 (n >= 2) by rejection sampling over seeded shuffles.
inline std::vector<std::size_t> random_derangement(std::size_t n, SeededRng &rng)
{
  std::vector<std::size_t> perm(n);
  for (;;)
  {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    bool fixed = false;
    for (std::size_t i = 0; i < n && !fixed; ++i)
      fixed = perm[i] == i;
    if (!fixed)
      return perm;
  }
}

/// Groups `paper_ids` by the rule's key and draws a derangement inside every group of two or
/// more. Groups are visited in key order and members in paper_id order, so the plan is a
/// function of (papers, rule, seed).
inline ShufflePlan plan_shuffle(CorpusManifest const &corpus, std::vector<std::string> const &paper_ids,
                                ShuffleRule rule, std::uint64_t seed)
{
  ShufflePlan plan;
  plan.rule = rule;
  plan.seed = seed;
  for (auto const &id : paper_ids)
  {
    auto const *p = corpus.find_paper(id);
    if (!p)
      throw PreconditionError("shuffle plan references unknown paper " + id);
    plan.groups[shuffle_group_key(*p, rule)].push_back(id);
  }
  SeededRng rng(seed);
  for (auto &[key, members] : plan.groups)
  {
    std::sort(members.begin(), members.end());
    if (members.size() < 2)
    {
      plan.excluded.insert(plan.excluded.end(), members.begin(), members.end());
      continue;
    }
    auto const perm = random_derangement(members.size(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      plan.pairing[members[i]] = members[perm[i]];
  }
  std::sort(plan.excluded.begin(), plan.excluded.end());
  return plan;
}

inline ShufflePlan plan_shuffle(CorpusManifest const &corpus, ShuffleRule rule, std::uint64_t seed)
{
  std::vector<std::string> ids;
  for (auto const &p : corpus.papers)
    ids.push_back(p.paper_id);
  return plan_shuffle(corpus, ids, rule, seed);
}

// ---------------------------------------------------------------------------
// Recall by the number of reviewers raising a comment

/// One reviewer's comments on a paper, with the ordinals that some LLM comment matched.
struct ReviewerComments
{
  std::string   reviewer_id;
  std::size_t   n_comments = 0;
  std::set<int> llm_hits;
};

/// Thresholded matches between reviewer `a` (A side) and reviewer `b` (B side) of the same paper.
struct HumanPairMatches
{
  std::size_t a = 0;
  std::size_t b = 0;
  MatchSet    matches;
};

struct HitCount
{
  std::size_t hits  = 0;
  std::size_t total = 0;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total); }
  HitCount &operator+=(HitCount const &o)
  {
    hits += o.hits;
    total += o.total;
    return *this;
  }
};

/// Buckets 1, 2 and 3 (= three or more reviewers).
using RecallByK = std::map<int, HitCount>;

inline RecallByK &operator+=(RecallByK &lhs, RecallByK const &rhs)
{
  for (auto const &[k, c] : rhs)
    lhs[k] += c;
  return lhs;
}

/// Clusters human comments by connected components of cross-reviewer matches; a comment's k is
/// the number of distinct reviewers in its cluster. Every human comment is counted once and is
/// a hit when some LLM comment matched it.
inline RecallByK recall_by_reviewer_count(std::vector<ReviewerComments> const &reviewers,
                                          std::vector<HumanPairMatches> const &human_matches)
{
  std::vector<std::size_t> offset(reviewers.size() + 1, 0);
  for (std::size_t r = 0; r < reviewers.size(); ++r)
    offset[r + 1] = offset[r] + reviewers[r].n_comments;
  std::vector<std::size_t> parent(offset.back());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto const &pm : human_matches)
  {
    if (pm.a >= reviewers.size() || pm.b >= reviewers.size())
      throw PreconditionError("human match references an unknown reviewer index");
    if (pm.a == pm.b)
      continue;
    for (auto const &m : pm.matches.matches)
    {
      if (m.a_ordinal < 1 || static_cast<std::size_t>(m.a_ordinal) > reviewers[pm.a].n_comments ||
          m.b_ordinal < 1 || static_cast<std::size_t>(m.b_ordinal) > reviewers[pm.b].n_comments)
        throw PreconditionError("human match references an unknown comment");
      auto const x = find(offset[pm.a] + static_cast<std::size_t>(m.a_ordinal) - 1);
      auto const y = find(offset[pm.b] + static_cast<std::size_t>(m.b_ordinal) - 1);
      if (x != y)
        parent[std::max(x, y)] = std::min(x, y);
    }
  }
  std::map<std::size_t, std::set<std::size_t>> reviewers_of_cluster;
  for (std::size_t r = 0; r < reviewers.size(); ++r)
    for (std::size_t c = offset[r]; c < offset[r + 1]; ++c)
      reviewers_of_cluster[find(c)].insert(r);

  RecallByK out;
  for (std::size_t r = 0; r < reviewers.size(); ++r)
  {
    for (std::size_t c = offset[r]; c < offset[r + 1]; ++c)
    {
      int const k = static_cast<int>(std::min<std::size_t>(reviewers_of_cluster[find(c)].size(), 3));
      auto     &bucket = out[k];
      ++bucket.total;
      if (reviewers[r].llm_hits.contains(static_cast<int>(c - offset[r]) + 1))
        ++bucket.hits;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Position of a comment within its reviewer's list

/// Quarter of zero-based index i in an n-comment list: floor(4 i / n).
inline std::size_t quarter_of(std::size_t i, std::size_t n)
{
  if (n == 0 || i >= n)
    throw PreconditionError("quarter_of needs 0 <= i < n");
  return 4 * i / n;
}

/// Pooled hit counts per quarter; `lists[k][i]` says whether comment i of list k was hit.
inline std::array<HitCount, 4> positional_quartile_rates(std::vector<std::vector<bool>> const &lists)
{
  std::array<HitCount, 4> out{};
  for (auto const &hits : lists)
  {
    if (hits.empty())
      throw PreconditionError("positional quartiles need lists with at least one comment");
    for (std::size_t i = 0; i < hits.size(); ++i)
    {
      auto &q = out[quarter_of(i, hits.size())];
      ++q.total;
      if (hits[i])
        ++q.hits;
    }
  }
  return out;
}

}  // namespace revmatch
