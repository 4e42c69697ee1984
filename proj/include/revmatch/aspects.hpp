// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Comment-aspect taxonomy, aspect annotations and LLM-vs-human frequency comparison.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/ingest.hpp"
#include "revmatch/json_util.hpp"

namespace revmatch {

struct Aspect
{
  std::string aspect_id;
  std::string label;
  std::string description;
};

class AspectSchema
{
public:
  AspectSchema() = default;

  explicit AspectSchema(std::vector<Aspect> aspects) : aspects_(std::move(aspects))
  {
    std::set<std::string> seen;
    for (auto const &a : aspects_)
    {
      if (a.aspect_id.empty())
        throw ConfigError("aspect schema has an entry without aspect_id");
      if (!seen.insert(a.aspect_id).second)
        throw ConfigError("aspect schema repeats aspect_id '" + a.aspect_id + "'");
    }
  }

  /// The nine aspects that can be named from published material. Deployments that need the
  /// full taxonomy supply it through from_json.
  static AspectSchema defaults()
  {
    return AspectSchema({
      {"clarity_presentation", "Clarity and Presentation", ""},
      {"comparison_previous", "Comparison to Previous Studies", ""},
      {"theoretical_soundness", "Theoretical Soundness", ""},
      {"novelty", "Novelty", ""},
      {"reproducibility", "Reproducibility", ""},
      {"ablations", "Add ablations experiments", ""},
      {"implications", "Implications of the Research", ""},
      {"ethics", "Ethical Aspects", ""},
      {"more_datasets", "Add experiments on more datasets", ""},
    });
  }

  /// {"aspects": [{"aspect_id", "label", "description"?}, ...]}
  static AspectSchema from_json(json const &j)
  {
    std::vector<Aspect> out;
    try
    {
      for (auto const &a : j.at("aspects"))
        out.push_back({a.at("aspect_id").get<std::string>(), a.value("label", a.at("aspect_id").get<std::string>()),
                       a.value("description", "")});
    }
    catch (json::exception const &e)
    {
      throw ConfigError(std::string("aspect schema: ") + e.what());
    }
    return AspectSchema(std::move(out));
  }

  std::vector<Aspect> const &aspects() const noexcept { return aspects_; }

  bool contains(std::string const &id) const
  {
    for (auto const &a : aspects_)
      if (a.aspect_id == id)
        return true;
    return false;
  }

private:
  std::vector<Aspect> aspects_;
};

struct AspectAnnotation
{
  std::string           feedback_id;
  int                   ordinal = 1;
  ReviewSource          source  = ReviewSource::human;
  std::set<std::string> aspect_ids;
};

/// Line-delimited {feedback_id, ordinal, source: "human"|"llm", aspect_ids: [...]}. Every
/// aspect id must belong to `schema`, and a comment may be annotated only once.
inline std::vector<AspectAnnotation> parse_aspect_annotations(std::string const &text, AspectSchema const &schema)
{
  std::vector<AspectAnnotation>            out;
  std::set<std::pair<std::string, int>>    seen;
  std::size_t                              start   = 0;
  int                                      line_no = 0;
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
    auto const where = "aspect annotation line " + std::to_string(line_no) + ": ";
    AspectAnnotation a;
    try
    {
      auto const j  = json::parse(line);
      a.feedback_id = j.at("feedback_id").get<std::string>();
      a.ordinal     = j.at("ordinal").get<int>();
      auto const s  = j.at("source").get<std::string>();
      if (s == "human")
        a.source = ReviewSource::human;
      else if (s == "llm")
        a.source = ReviewSource::llm;
      else
        throw ParseError(where + "unknown source '" + s + "'", line);
      for (auto const &id : j.value("aspect_ids", json::array()))
        a.aspect_ids.insert(id.get<std::string>());
    }
    catch (json::exception const &e)
    {
      throw ParseError(where + e.what(), line);
    }
    if (a.ordinal < 1)
      throw ParseError(where + "ordinal must be >= 1", line);
    for (auto const &id : a.aspect_ids)
      if (!schema.contains(id))
        throw ParseError(where + "aspect '" + id + "' is not in the schema", line);
    if (!seen.emplace(a.feedback_id, a.ordinal).second)
      throw ParseError(where + "comment " + a.feedback_id + "#" + std::to_string(a.ordinal) + " annotated twice", line);
    out.push_back(std::move(a));
  }
  return out;
}

using AspectFrequencies = std::map<std::string, double>;

/// Share of `source` comments carrying each schema aspect.
inline AspectFrequencies aspect_frequencies(std::vector<AspectAnnotation> const &annotations, ReviewSource source,
                                            AspectSchema const &schema)
{
  std::map<std::string, std::size_t> counts;
  std::size_t                        total = 0;
  for (auto const &a : annotations)
  {
    if (a.source != source)
      continue;
    ++total;
    for (auto const &id : a.aspect_ids)
      ++counts[id];
  }
  if (total == 0)
    throw PreconditionError("no " + std::string(to_string(source)) + " annotations to compute aspect frequencies");
  AspectFrequencies out;
  for (auto const &aspect : schema.aspects())
    out[aspect.aspect_id] = static_cast<double>(counts[aspect.aspect_id]) / static_cast<double>(total);
  return out;
}

/// nullopt is the undefined marker: zero denominator after smoothing.
using AspectRatios = std::map<std::string, std::optional<double>>;

/// (llm + s) / (human + s) per aspect.
inline AspectRatios frequency_ratio(AspectFrequencies const &llm, AspectFrequencies const &human,
                                    double smoothing = 0.0)
{
  if (smoothing < 0)
    throw PreconditionError("smoothing must be non-negative");
  AspectRatios out;
  for (auto const &[id, lf] : llm)
  {
    auto const h = human.find(id);
    if (h == human.end())
      throw PreconditionError("aspect '" + id + "' missing from human frequencies");
    double const den = h->second + smoothing;
    out[id]          = den == 0 ? std::nullopt : std::optional<double>((lf + smoothing) / den);
  }
  if (human.size() != llm.size())
    throw PreconditionError("llm and human frequencies use different schemas");
  return out;
}

}  // namespace revmatch
