// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Human-verification arithmetic: precision/recall/F1, agreement between annotators and F1
// against the majority label.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/matching.hpp"

namespace revmatch {

struct ConfusionCounts
{
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  bool operator==(ConfusionCounts const &) const = default;

  ConfusionCounts &operator+=(ConfusionCounts const &o)
  {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

struct Prf
{
  double precision = 0;
  double recall    = 0;
  double f1        = 0;
  bool   degenerate = false;  // some ratio had a zero denominator and was reported as 0
};

inline Prf prf(ConfusionCounts const &c)
{
  Prf out;
  auto const tp = static_cast<double>(c.tp);
  if (c.tp + c.fp == 0)
    out.degenerate = true;
  else
    out.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn == 0)
    out.degenerate = true;
  else
    out.recall = tp / static_cast<double>(c.tp + c.fn);
  if (out.precision + out.recall == 0)
    out.degenerate = out.degenerate || c.tp == 0;
  else
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

enum class MatchLabel
{
  matched,
  not_matched
};

inline MatchLabel parse_match_label(std::string const &s)
{
  if (s == "matched")
    return MatchLabel::matched;
  if (s == "not_matched")
    return MatchLabel::not_matched;
  throw ParseError("unknown match label '" + s + "' (expected matched or not_matched)");
}

struct MatchAnnotation
{
  std::string pair_id;
  std::string annotator_id;
  MatchLabel  label = MatchLabel::not_matched;
};

/// Consensus (or prediction) labels keyed by pair_id.
using LabelMap = std::map<std::string, MatchLabel>;

/// Pair ids of the candidate universe for lists of sizes n_a x n_b: "A<i>-B<j>".
inline std::vector<std::string> pair_universe(std::size_t n_a, std::size_t n_b)
{
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n_a; ++i)
    for (std::size_t j = 1; j <= n_b; ++j)
      out.push_back("A" + std::to_string(i) + "-B" + std::to_string(j));
  return out;
}

/// Confusion counts of predicted labels against consensus labels over `universe`. Pairs
/// absent from `predicted` count as predicted not-matched.
inline ConfusionCounts evaluate_labels(LabelMap const &predicted, LabelMap const &consensus,
                                       std::vector<std::string> const &universe)
{
  std::set<std::string> const known(universe.begin(), universe.end());
  for (auto const &[pair_id, label] : consensus)
    if (!known.contains(pair_id))
      throw ParseError("annotation references unknown pair_id '" + pair_id + "'");
  for (auto const &[pair_id, label] : predicted)
    if (!known.contains(pair_id))
      throw ParseError("prediction references unknown pair_id '" + pair_id + "'");
  ConfusionCounts c;
  for (auto const &id : universe)
  {
    auto const it = consensus.find(id);
    if (it == consensus.end())
      throw PreconditionError("annotations do not cover pair_id '" + id + "'");
    auto const p     = predicted.find(id);
    bool const pred  = p != predicted.end() && p->second == MatchLabel::matched;
    bool const truth = it->second == MatchLabel::matched;
    if (pred && truth)
      ++c.tp;
    else if (pred)
      ++c.fp;
    else if (truth)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

/// Pipeline matches (already thresholded) versus consensus labels over the full n_a x n_b grid.
inline ConfusionCounts evaluate_matching(MatchSet const &predicted, LabelMap const &consensus, std::size_t n_a,
                                         std::size_t n_b)
{
  LabelMap labels;
  for (auto const &m : predicted.matches)
    labels[m.a_id() + "-" + m.b_id()] = MatchLabel::matched;
  return evaluate_labels(labels, consensus, pair_universe(n_a, n_b));
}

namespace detail {

inline std::map<std::string, std::map<std::string, MatchLabel>> by_annotator(std::vector<MatchAnnotation> const &anns)
{
  std::map<std::string, std::map<std::string, MatchLabel>> out;
  for (auto const &a : anns)
    if (!out[a.annotator_id].emplace(a.pair_id, a.label).second)
      throw ParseError("annotator '" + a.annotator_id + "' labels pair '" + a.pair_id + "' more than once");
  return out;
}

}  // namespace detail

/// Fraction of (item, annotator pair) comparisons with equal labels, over items that both
/// annotators of the pair labelled.
inline double pairwise_agreement(std::vector<MatchAnnotation> const &annotations)
{
  auto const labels = detail::by_annotator(annotations);
  if (labels.size() < 2)
    throw PreconditionError("pairwise agreement needs at least two annotators");
  std::size_t agree = 0, total = 0;
  for (auto i = labels.begin(); i != labels.end(); ++i)
  {
    for (auto j = std::next(i); j != labels.end(); ++j)
    {
      for (auto const &[pair_id, label] : i->second)
      {
        auto const other = j->second.find(pair_id);
        if (other == j->second.end())
          continue;
        ++total;
        if (other->second == label)
          ++agree;
      }
    }
  }
  if (total == 0)
    throw PreconditionError("annotators share no labelled pairs");
  return static_cast<double>(agree) / static_cast<double>(total);
}

/// Majority label per pair over an odd number of annotators who all labelled the same pairs.
inline LabelMap majority_labels(std::vector<MatchAnnotation> const &annotations)
{
  auto const labels = detail::by_annotator(annotations);
  if (labels.empty() || labels.size() % 2 == 0)
    throw PreconditionError("majority vote needs an odd number of annotators (got " + std::to_string(labels.size()) +
                            ")");
  std::map<std::string, std::pair<int, int>> votes;
  for (auto const &[annotator, items] : labels)
    for (auto const &[pair_id, label] : items)
      (label == MatchLabel::matched ? votes[pair_id].first : votes[pair_id].second) += 1;
  LabelMap out;
  for (auto const &[pair_id, v] : votes)
  {
    if (v.first + v.second != static_cast<int>(labels.size()))
      throw PreconditionError("pair '" + pair_id + "' is not labelled by every annotator");
    out[pair_id] = v.first > v.second ? MatchLabel::matched : MatchLabel::not_matched;
  }
  return out;
}

struct AnnotatorF1
{
  std::string     annotator_id;
  ConfusionCounts counts;
  Prf             scores;
};

/// Each annotator's labels scored against the majority label ("matched" is the positive class).
inline std::vector<AnnotatorF1> majority_f1(std::vector<MatchAnnotation> const &annotations)
{
  auto const majority = majority_labels(annotations);
  auto const labels   = detail::by_annotator(annotations);
  std::vector<std::string> universe;
  for (auto const &[pair_id, label] : majority)
    universe.push_back(pair_id);
  std::vector<AnnotatorF1> out;
  for (auto const &[annotator, items] : labels)
  {
    LabelMap const mine(items.begin(), items.end());
    auto const     counts = evaluate_labels(mine, majority, universe);
    out.push_back({annotator, counts, prf(counts)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

/// Line-delimited {pair_id, annotator_id, label}.
inline std::vector<MatchAnnotation> parse_match_annotations(std::string const &text)
{
  std::vector<MatchAnnotation> out;
  std::size_t                  start = 0;
  int                          line_no = 0;
  while (start < text.size())
  {
    auto end = text.find('\n', start);
    if (end == std::string::npos)
      end = text.size();
    ++line_no;
    auto const line = trim(std::string_view(text).substr(start, end - start));
    start           = end + 1;
    if (line.empty())
      continue;
    try
    {
      auto const j = json::parse(line);
      out.push_back({j.at("pair_id").get<std::string>(), j.value("annotator_id", "consensus"),
                     parse_match_label(j.at("label").get<std::string>())});
    }
    catch (json::exception const &e)
    {
      throw ParseError("annotation line " + std::to_string(line_no) + ": " + e.what(), line);
    }
  }
  return out;
}

/// Line-delimited {pair_id, label}.
inline LabelMap parse_label_map(std::string const &text)
{
  LabelMap out;
  for (auto const &a : parse_match_annotations(text))
    if (!out.emplace(a.pair_id, a.label).second)
      throw ParseError("pair '" + a.pair_id + "' appears twice");
  return out;
}

inline json to_json(ConfusionCounts const &c)
{
  return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline json to_json(Prf const &p)
{
  return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}, {"degenerate", p.degenerate}};
}

}  // namespace revmatch
