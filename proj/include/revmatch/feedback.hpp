// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Review-outline generation: prompt templates, the single completion call, and parsing of
// the four-section outline.

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/gateway.hpp"
#include "revmatch/ingest.hpp"
#include "revmatch/json_util.hpp"

namespace revmatch {

enum class VenueFlavor
{
  nature_family,
  ml_conference
};

inline std::string_view to_string(VenueFlavor f)
{
  return f == VenueFlavor::nature_family ? "nature_family" : "ml_conference";
}

inline VenueFlavor parse_venue_flavor(std::string_view s)
{
  if (s == "nature_family")
    return VenueFlavor::nature_family;
  if (s == "ml_conference")
    return VenueFlavor::ml_conference;
  throw ConfigError("unknown venue flavor '" + std::string(s) + "' (expected nature_family or ml_conference)");
}

inline constexpr std::string_view kTitlePlaceholder   = "<Title>";
inline constexpr std::string_view kContentPlaceholder = "<Paper_content>";

inline constexpr std::string_view kNatureReviewTemplate =
  "Your task now is to draft a high-quality review outline for a Nature family journal for a submission titled "
  "<Title>:\n"
  "<Paper_content>\n"
  "_____\n"
  "Your task:\n"
  "Compose a high-quality peer review of a paper submitted to a Nature family journal.\n"
  "Start by \"Review outline:\".\n"
  "And then:\n"
  "\"1. Significance and novelty\"\n"
  "\"2. Potential reasons for acceptance\"\n"
  "\"3. Potential reasons for rejection\", List multiple key reasons. For each key reason, use **>=2 sub bullet "
  "points** to further clarify and support your arguments in painstaking details. Be as specific and detailed as "
  "possible.\n"
  "\"4. Suggestions for improvement\", List multiple key suggestions. Be as specific and detailed as possible.\n"
  "Be thoughtful and constructive. Write Outlines only.\n";

inline constexpr std::string_view kMlConferenceReviewTemplate =
  "Your task now is to draft a high-quality review outline for a top-tier Machine Learning (ML) conference for a "
  "submission titled <Title>:\n"
  "<Paper_content>\n"
  "_____\n"
  "Your task:\n"
  "Compose a high-quality peer review of an ML paper submitted to a top-tier ML conference on OpenReview.\n"
  "Start by \"Review outline:\".\n"
  "And then:\n"
  "\"1. Significance and novelty\"\n"
  "\"2. Potential reasons for acceptance\"\n"
  "\"3. Potential reasons for rejection\", List multiple key reasons. For each key reason, use **>=2 sub bullet "
  "points** to further clarify and support your arguments in painstaking details. Be as specific and detailed as "
  "possible.\n"
  "\"4. Suggestions for improvement\", List multiple key suggestions. Be as specific and detailed as possible.\n"
  "Be thoughtful and constructive. Write Outlines only.\n";

struct ReviewPrompt
{
  VenueFlavor venue_flavor = VenueFlavor::nature_family;
  std::string title;
  std::string paper_content;
  std::string rendered;
};

/// Replaces every occurrence of `placeholder` in a single left-to-right pass, so substituted
/// text is never rescanned.
inline std::string substitute(std::string_view tmpl, std::vector<std::pair<std::string_view, std::string_view>> const &values)
{
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size())
  {
    bool replaced = false;
    for (auto const &[placeholder, value] : values)
    {
      if (tmpl.compare(i, placeholder.size(), placeholder) == 0)
      {
        out += value;
        i += placeholder.size();
        replaced = true;
        break;
      }
    }
    if (!replaced)
      out.push_back(tmpl[i++]);
  }
  return out;
}

inline ReviewPrompt build_review_prompt(std::string_view title, std::string_view content, VenueFlavor flavor)
{
  if (title.empty())
    throw PreconditionError("review prompt needs a non-empty title");
  if (content.empty())
    throw PreconditionError("review prompt needs non-empty paper content");
  auto const tmpl = flavor == VenueFlavor::nature_family ? kNatureReviewTemplate : kMlConferenceReviewTemplate;
  ReviewPrompt p;
  p.venue_flavor  = flavor;
  p.title         = std::string(title);
  p.paper_content = std::string(content);
  p.rendered      = substitute(tmpl, {{kTitlePlaceholder, title}, {kContentPlaceholder, content}});
  return p;
}

// ---------------------------------------------------------------------------

struct StructuredFeedback
{
  std::string significance_novelty;
  std::string reasons_accept;
  std::string reasons_reject;
  std::string suggestions;
  std::string raw_text;

  bool operator==(StructuredFeedback const &) const = default;

  std::array<std::string const *, 4> sections() const
  {
    return {&significance_novelty, &reasons_accept, &reasons_reject, &suggestions};
  }
};

inline constexpr std::array<std::string_view, 4> kSectionTitles = {
  "Significance and novelty", "Potential reasons for acceptance", "Potential reasons for rejection",
  "Suggestions for improvement"};

inline constexpr std::array<std::string_view, 4> kSectionKeys = {"significance_novelty", "reasons_accept",
                                                                 "reasons_reject", "suggestions"};

/// Canonical rendering: numbered headers, each followed by its section text.
inline std::string render_sections(StructuredFeedback const &f)
{
  std::string out;
  auto const  sections = f.sections();
  for (std::size_t i = 0; i < 4; ++i)
  {
    if (i > 0)
      out += "\n\n";
    out += std::to_string(i + 1) + ". " + std::string(kSectionTitles[i]) + "\n" + *sections[i];
  }
  return out;
}

namespace detail {

// Skips markdown emphasis, heading marks, quotes (ASCII and curly) and whitespace.
inline std::size_t skip_decoration(std::string_view s, std::size_t i)
{
  while (i < s.size())
  {
    char const c = s[i];
    if (c == ' ' || c == '\t' || c == '#' || c == '*' || c == '_' || c == '"' || c == '\'' || c == '`' || c == '>')
    {
      ++i;
      continue;
    }
    // U+2018, U+2019, U+201C, U+201D
    if (i + 2 < s.size() && static_cast<unsigned char>(c) == 0xe2 && static_cast<unsigned char>(s[i + 1]) == 0x80)
    {
      auto const third = static_cast<unsigned char>(s[i + 2]);
      if (third == 0x98 || third == 0x99 || third == 0x9c || third == 0x9d)
      {
        i += 3;
        continue;
      }
    }
    break;
  }
  return i;
}

struct HeaderHit
{
  int         section = -1;  // 0..3
  std::string rest;          // text following the header on the same line
};

inline std::optional<HeaderHit> match_header(std::string_view line)
{
  std::string lower(line);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::size_t i = skip_decoration(lower, 0);

  std::optional<int> number;
  std::size_t        j = i;
  bool const         paren = j < lower.size() && lower[j] == '(';
  if (paren)
    ++j;
  if (j < lower.size() && lower[j] >= '1' && lower[j] <= '9')
  {
    int const n = lower[j] - '0';
    ++j;
    if (j < lower.size() && (lower[j] == '.' || lower[j] == ')' || lower[j] == ':'))
    {
      ++j;
      number = n;
      i      = j;
    }
  }
  i = skip_decoration(lower, i);

  for (int s = 0; s < 4; ++s)
  {
    std::string title(kSectionTitles[s]);
    std::transform(title.begin(), title.end(), title.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower.compare(i, title.size(), title) != 0)
      continue;
    std::size_t after = skip_decoration(lower, i + title.size());
    while (after < lower.size() && (lower[after] == ':' || lower[after] == ',' || lower[after] == '-'))
      after = skip_decoration(lower, after + 1);
    std::string rest = trim(line.substr(std::min(after, line.size())));
    // Without a number the header must stand alone, otherwise prose starting with a title phrase would match.
    if (!number && !rest.empty())
      return std::nullopt;
    if (number && (*number < 1 || *number > 4))
      return std::nullopt;
    return HeaderHit{s, std::move(rest)};
  }
  return std::nullopt;
}

}  // namespace detail

/// Splits outline text on the four numbered section headers. Anything before the first
/// header (such as a "Review outline:" line) is dropped.
inline StructuredFeedback parse_feedback_sections(std::string const &text)
{
  struct Found
  {
    int         section;
    std::size_t line_index;
    std::string rest;
  };
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= text.size())
    {
      auto end = text.find('\n', start);
      if (end == std::string::npos)
        end = text.size();
      std::string l = text.substr(start, end - start);
      if (!l.empty() && l.back() == '\r')
        l.pop_back();
      lines.push_back(std::move(l));
      start = end + 1;
    }
  }

  std::vector<Found> found;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (auto hit = detail::match_header(lines[i]))
      found.push_back({hit->section, i, std::move(hit->rest)});

  std::array<int, 4> seen{};
  for (auto const &f : found)
    ++seen[f.section];
  std::string duplicated;
  std::string missing;
  for (int s = 0; s < 4; ++s)
  {
    if (seen[s] > 1)
      duplicated += (duplicated.empty() ? "" : ", ") + std::string("\"") + std::to_string(s + 1) + ". " +
                    std::string(kSectionTitles[s]) + "\"";
    if (seen[s] == 0)
      missing += (missing.empty() ? "" : ", ") + std::string("\"") + std::to_string(s + 1) + ". " +
                 std::string(kSectionTitles[s]) + "\"";
  }
  if (!duplicated.empty())
    throw ParseError("feedback has duplicated section headers: " + duplicated, text);
  if (!missing.empty())
    throw ParseError("feedback is missing section headers: " + missing, text);
  for (std::size_t k = 0; k + 1 < found.size(); ++k)
    if (found[k].section > found[k + 1].section)
      throw ParseError("feedback section headers out of order: section " + std::to_string(found[k].section + 1) +
                         " appears before section " + std::to_string(found[k + 1].section + 1),
                       text);

  StructuredFeedback out;
  out.raw_text = text;
  std::array<std::string *, 4> targets = {&out.significance_novelty, &out.reasons_accept, &out.reasons_reject,
                                          &out.suggestions};
  for (std::size_t k = 0; k < found.size(); ++k)
  {
    std::size_t const end = k + 1 < found.size() ? found[k + 1].line_index : lines.size();
    std::string       body = found[k].rest;
    for (std::size_t i = found[k].line_index + 1; i < end; ++i)
      body += "\n" + lines[i];
    *targets[found[k].section] = trim(body);
    if (targets[found[k].section]->empty())
      throw ParseError("feedback section \"" + std::string(kSectionTitles[found[k].section]) + "\" is empty", text);
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Outline parsing failed after a paid completion; the raw text and its key are kept.
class FeedbackParseError : public ParseError
{
public:
  FeedbackParseError(std::string const &what, std::string raw, std::string key)
    : ParseError(what, std::move(raw))
    , transcript_key_(std::move(key))
  {}

  std::string const &transcript_key() const noexcept { return transcript_key_; }

private:
  std::string transcript_key_;
};

struct FeedbackConfig
{
  VenueFlavor       flavor = VenueFlavor::nature_family;
  std::string       model_id = "gpt-4";
  Sampling          sampling{0.0, 1500};
  TokenBudgetConfig budget;
};

struct GeneratedFeedback
{
  std::string        paper_id;
  VenueFlavor        flavor = VenueFlavor::nature_family;
  std::string        transcript_key;
  StructuredFeedback feedback;
};

/// Assembles, truncates and renders the prompt for a document.
inline ReviewPrompt prepare_review_prompt(ParsedDocument const &doc, FeedbackConfig const &cfg)
{
  auto const content = truncate_to_budget(assemble_prompt_text(doc), cfg.budget);
  return build_review_prompt(doc.title, content, cfg.flavor);
}

/// One completion call, parsed into four sections.
inline GeneratedFeedback generate_feedback(std::string const &paper_id, ParsedDocument const &doc,
                                           FeedbackConfig const &cfg, Gateway &gateway)
{
  auto const        prompt = prepare_review_prompt(doc, cfg);
  CompletionRequest request{cfg.model_id, prompt.rendered, cfg.sampling, Purpose::review_generation};
  auto const        response = gateway.complete(request);
  if (response.finish_state == FinishState::refused)
    throw FeedbackParseError("provider refused to generate feedback", response.text, response.transcript_key);
  try
  {
    return GeneratedFeedback{paper_id, cfg.flavor, response.transcript_key, parse_feedback_sections(response.text)};
  }
  catch (ParseError const &e)
  {
    throw FeedbackParseError(e.what(), response.text, response.transcript_key);
  }
}

inline json to_json(GeneratedFeedback const &g)
{
  json j;
  j["paper_id"]       = g.paper_id;
  j["flavor"]         = std::string(to_string(g.flavor));
  j["transcript_key"] = g.transcript_key;
  auto const sections = g.feedback.sections();
  for (std::size_t i = 0; i < 4; ++i)
    j["sections"][std::string(kSectionKeys[i])] = *sections[i];
  j["raw_text"] = g.feedback.raw_text;
  return j;
}

}  // namespace revmatch
