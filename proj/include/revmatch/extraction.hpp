// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Extraction of ordinal-keyed criticism points from a feedback text.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/feedback.hpp"
#include "revmatch/gateway.hpp"
#include "revmatch/json_util.hpp"

namespace revmatch {

struct Comment
{
  std::string local_id;  // side prefix + ordinal, e.g. "A3"
  int         ordinal = 1;
  std::string text;

  bool operator==(Comment const &) const = default;
};

struct CommentList
{
  std::string          feedback_id;
  std::string          side_label;  // "A", "B" or empty outside matching
  std::vector<Comment> comments;

  bool operator==(CommentList const &) const = default;

  std::size_t size() const noexcept { return comments.size(); }
  bool        empty() const noexcept { return comments.empty(); }

  /// Builds a list with dense ordinals 1..n from texts in order.
  static CommentList from_texts(std::string feedback_id, std::vector<std::string> const &texts,
                                std::string side_label = {})
  {
    CommentList list;
    list.feedback_id = std::move(feedback_id);
    list.side_label  = std::move(side_label);
    for (std::size_t i = 0; i < texts.size(); ++i)
    {
      int const ordinal = static_cast<int>(i) + 1;
      list.comments.push_back({list.side_label + std::to_string(ordinal), ordinal, texts[i]});
    }
    return list;
  }

  /// Same comments, re-labelled for one side of a matching.
  CommentList with_side(std::string label) const
  {
    CommentList out = *this;
    out.side_label  = std::move(label);
    for (auto &c : out.comments)
      c.local_id = out.side_label + std::to_string(c.ordinal);
    return out;
  }

  /// First min(n, size) comments, order kept.
  CommentList prefix(std::size_t n) const
  {
    CommentList out = *this;
    if (out.comments.size() > n)
      out.comments.resize(n);
    return out;
  }
};

/// The list as the JSON object handed to the matching judge: {"1": "...", "2": "..."}.
inline json comments_as_object(CommentList const &list)
{
  json j = json::object();
  for (auto const &c : list.comments)
    j[std::to_string(c.ordinal)] = c.text;
  return j;
}

inline constexpr std::string_view kFeedbackPlaceholder = "<Feedback_text>";

inline constexpr std::string_view kDefaultExtractionTemplate =
  "Your task is to carefully read the scientific feedback below and extract the key points of criticism it raises, "
  "such as concerns, weaknesses, requests and suggestions for improvement. Leave out praise and summaries of the "
  "paper.\n"
  "====Feedback:\n"
  "<Feedback_text>\n"
  "====\n"
  "Provide your output as a JSON object in which each key is an integer ID starting from 1 and each value is a "
  "concise but complete statement of one point, for example:\n"
  "{\"1\": \"<first point>\", \"2\": \"<second point>\"}\n"
  "Extract every distinct point exactly once, in the order in which it appears in the feedback. If the feedback "
  "raises no criticism, output an empty JSON object. Provide your output as JSON only.\n";

inline constexpr std::string_view kExtractionRepairTemplate =
  "The output below was supposed to be a JSON object that maps integer IDs (\"1\", \"2\", ...) to the text of each "
  "extracted point, but it could not be used: <Parse_error>\n"
  "====Output:\n"
  "<Malformed_output>\n"
  "====\n"
  "Rewrite it as a single valid JSON object whose keys are consecutive integer IDs starting from \"1\" and whose "
  "values are strings. Keep the points and their order unchanged. If there are no points, output an empty JSON "
  "object. Provide your output as JSON only.\n";

inline std::string build_extraction_prompt(std::string_view feedback_text,
                                           std::string_view tmpl = kDefaultExtractionTemplate)
{
  if (trim(feedback_text).empty())
    throw PreconditionError("cannot extract comments from empty feedback text");
  return substitute(tmpl, {{kFeedbackPlaceholder, feedback_text}});
}

namespace detail {

inline std::optional<long long> parse_integer_key(std::string_view key)
{
  auto const t = trim(key);
  if (t.empty() || t.size() > 9 || !std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }))
    return std::nullopt;
  return std::stoll(t);
}

}  // namespace detail

/// Reads the first balanced JSON object in `raw` as {integer key: point text}. Keys are
/// sorted numerically and renumbered 1..n; empty texts are dropped.
inline CommentList parse_comment_json(std::string_view raw, std::string feedback_id = {})
{
  auto recovered = recover_first_object(raw);
  if (!recovered)
    throw ParseError("no balanced JSON object in extraction output", std::string(raw));

  std::vector<std::pair<long long, std::string>> entries;
  for (auto const &m : recovered->members)
  {
    auto const key = detail::parse_integer_key(m.key);
    if (!key)
      throw ParseError("extraction output has a non-integer key \"" + m.key + "\"", std::string(raw));
    if (!m.value.is_string())
      throw ParseError("extraction output value for key \"" + m.key + "\" is not a string", std::string(raw));
    entries.emplace_back(*key, m.value.get<std::string>());
  }
  std::stable_sort(entries.begin(), entries.end(), [](auto const &a, auto const &b) { return a.first < b.first; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].first == entries[i - 1].first)
      throw ParseError("extraction output repeats key \"" + std::to_string(entries[i].first) + "\"", std::string(raw));

  std::vector<std::string> texts;
  for (auto &[key, text] : entries)
  {
    auto cleaned = trim(text);
    if (!cleaned.empty())
      texts.push_back(std::move(cleaned));
  }
  return CommentList::from_texts(std::move(feedback_id), texts);
}

struct ExtractionConfig
{
  std::string model_id = "gpt-4";
  Sampling    sampling{0.0, 1024};
  std::string prompt_template = std::string(kDefaultExtractionTemplate);
};

struct ExtractionResult
{
  CommentList              comments;
  std::vector<std::string> transcript_keys;
};

/// One extraction call; on a parse failure, one repair call that restates the format.
inline ExtractionResult extract_comments(std::string const &feedback_id, std::string_view feedback_text,
                                         Gateway &gateway, ExtractionConfig const &cfg, std::string side_label = {})
{
  ExtractionResult  result;
  CompletionRequest request{cfg.model_id, build_extraction_prompt(feedback_text, cfg.prompt_template), cfg.sampling,
                            Purpose::extraction};
  auto const first = gateway.complete(request);
  result.transcript_keys.push_back(first.transcript_key);
  try
  {
    result.comments = parse_comment_json(first.text, feedback_id).with_side(side_label);
    return result;
  }
  catch (ParseError const &e)
  {
    CompletionRequest repair{cfg.model_id,
                             substitute(kExtractionRepairTemplate,
                                        {{"<Parse_error>", e.what()}, {"<Malformed_output>", first.text}}),
                             cfg.sampling, Purpose::extraction};
    auto const second = gateway.complete(repair);
    result.transcript_keys.push_back(second.transcript_key);
    try
    {
      result.comments = parse_comment_json(second.text, feedback_id).with_side(side_label);
      return result;
    }
    catch (ParseError const &again)
    {
      throw ParseError("extraction for " + feedback_id + " failed after repair: " + again.what(), second.text);
    }
  }
}

inline json to_json(ExtractionResult const &r)
{
  json j;
  j["feedback_id"] = r.comments.feedback_id;
  j["comments"]    = json::array();
  for (auto const &c : r.comments.comments)
    j["comments"].push_back(json{{"ordinal", c.ordinal}, {"text", c.text}});
  j["transcript_keys"] = r.transcript_keys;
  return j;
}

inline ExtractionResult extraction_from_json(json const &j)
{
  ExtractionResult r;
  std::vector<std::pair<int, std::string>> items;
  for (auto const &c : j.at("comments"))
    items.emplace_back(c.at("ordinal").get<int>(), c.at("text").get<std::string>());
  std::sort(items.begin(), items.end());
  std::vector<std::string> texts;
  for (auto &[ordinal, text] : items)
    texts.push_back(std::move(text));
  r.comments        = CommentList::from_texts(j.at("feedback_id").get<std::string>(), texts);
  r.transcript_keys = j.value("transcript_keys", std::vector<std::string>{});
  return r;
}

}  // namespace revmatch
