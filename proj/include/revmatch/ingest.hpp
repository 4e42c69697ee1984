// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Turns a parsed paper into prompt-ready text within a token budget.

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/http.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/tokenize.hpp"

namespace revmatch {

/// Removes C0 control characters (except tab and newline), DEL and carriage returns.
inline std::string strip_control(std::string_view text)
{
  std::string out;
  out.reserve(text.size());
  for (char ch : text)
  {
    auto const c = static_cast<unsigned char>(ch);
    if ((c < 0x20 && c != '\n' && c != '\t') || c == 0x7f)
      continue;
    out.push_back(ch);
  }
  return out;
}

inline std::string trim(std::string_view s)
{
  auto const first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos)
    return {};
  auto const last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

struct ParsedDocument
{
  std::string              title;
  std::string              abstract;
  std::vector<std::string> captions;
  std::string              body_text;

  bool operator==(ParsedDocument const &) const = default;

  /// Normalises all fields and enforces a non-empty title.
  static ParsedDocument make(std::string title, std::string abstract, std::vector<std::string> captions,
                             std::string body)
  {
    ParsedDocument doc;
    doc.title    = trim(strip_control(title));
    doc.abstract = trim(strip_control(abstract));
    for (auto const &c : captions)
    {
      auto cleaned = trim(strip_control(c));
      if (!cleaned.empty())
        doc.captions.push_back(std::move(cleaned));
    }
    doc.body_text = trim(strip_control(body));
    if (doc.title.empty())
      throw ParseError("document unusable: no title");
    return doc;
  }

  static ParsedDocument from_paper(PaperRecord const &p)
  {
    return make(p.title, p.abstract, p.captions, p.body_text);
  }
};

inline json to_json(ParsedDocument const &d)
{
  json j;
  j["title"]     = d.title;
  j["abstract"]  = d.abstract;
  j["captions"]  = d.captions;
  j["body_text"] = d.body_text;
  return j;
}

inline ParsedDocument parsed_document_from_json(json const &j)
{
  return ParsedDocument::make(j.value("title", ""), j.value("abstract", ""),
                              j.value("captions", std::vector<std::string>{}), j.value("body_text", ""));
}

/// Reads a pre-parsed document file (the ParsedDocument JSON shape).
inline ParsedDocument load_parsed_document(std::string const &path)
{
  try
  {
    return parsed_document_from_json(json::parse(read_file(path)));
  }
  catch (json::exception const &e)
  {
    throw ParseError(path + ": " + e.what());
  }
}

struct TokenBudgetConfig
{
  std::size_t input_budget = 6500;
  std::size_t model_window = 8192;
  std::string tokenizer_id = std::string(kDefaultTokenizer);

  static TokenBudgetConfig make(std::size_t input_budget, std::size_t model_window, std::string tokenizer_id)
  {
    if (input_budget == 0 || input_budget >= model_window)
      throw ConfigError("token budget must satisfy 0 < input_budget (" + std::to_string(input_budget) +
                        ") < model_window (" + std::to_string(model_window) + ")");
    if (!TokenizerRegistry::instance().contains(tokenizer_id))
      throw ConfigError("unknown tokenizer_id '" + tokenizer_id + "'");
    return {input_budget, model_window, std::move(tokenizer_id)};
  }
};

/// Title, abstract, labelled captions and body, separated by single blank lines. Empty
/// fields are left out.
inline std::string assemble_prompt_text(ParsedDocument const &doc)
{
  std::vector<std::string> blocks;
  blocks.push_back(doc.title);
  if (!doc.abstract.empty())
    blocks.push_back(doc.abstract);
  for (std::size_t i = 0; i < doc.captions.size(); ++i)
    blocks.push_back("Figure " + std::to_string(i + 1) + " Caption: " + doc.captions[i]);
  if (!doc.body_text.empty())
    blocks.push_back(doc.body_text);
  std::string out;
  for (auto const &b : blocks)
  {
    if (!out.empty())
      out += "\n\n";
    out += b;
  }
  return out;
}

/// Longest token-boundary prefix of `text` holding at most `budget.input_budget` tokens.
inline std::string truncate_to_budget(std::string_view text, TokenBudgetConfig const &budget)
{
  auto const spans = tokenize(text, budget.tokenizer_id);
  if (spans.size() <= budget.input_budget)
    return std::string(text);
  return std::string(text.substr(0, spans[budget.input_budget - 1].end));
}

// ---------------------------------------------------------------------------
// PDF parsing service

/// Where the parsing service lives and how its response maps onto ParsedDocument.
/// `format` is "json" (dotted field paths below), "jats" or "tei" (XML).
struct PdfServiceConfig
{
  std::string endpoint;
  std::string format        = "jats";
  std::string title_path    = "title";
  std::string abstract_path = "abstract";
  std::string captions_path = "captions";
  std::string body_path     = "body_text";
  RetryPolicy retry;

  static PdfServiceConfig from_json(json const &j)
  {
    PdfServiceConfig c;
    c.endpoint = j.value("endpoint", "");
    c.format   = j.value("format", c.format);
    if (j.contains("fields"))
    {
      auto const &f   = j.at("fields");
      c.title_path    = f.value("title", c.title_path);
      c.abstract_path = f.value("abstract", c.abstract_path);
      c.captions_path = f.value("captions", c.captions_path);
      c.body_path     = f.value("body", c.body_path);
    }
    return c;
  }
};

namespace detail {

inline json const *lookup_path(json const &root, std::string const &path)
{
  json const *node = &root;
  std::size_t start = 0;
  while (start <= path.size())
  {
    auto end = path.find('.', start);
    if (end == std::string::npos)
      end = path.size();
    auto const key = path.substr(start, end - start);
    if (!node->is_object() || !node->contains(key))
      return nullptr;
    node  = &node->at(key);
    start = end + 1;
  }
  return node;
}

// Strings stay as-is, arrays join with blank lines, objects contribute their "text" member.
inline std::string flatten_text(json const &node)
{
  if (node.is_string())
    return node.get<std::string>();
  if (node.is_array())
  {
    std::string out;
    for (auto const &e : node)
    {
      auto part = flatten_text(e);
      if (!part.empty())
        out += (out.empty() ? "" : "\n\n") + part;
    }
    return out;
  }
  if (node.is_object())
  {
    for (auto const *key : {"text", "caption", "content", "value"})
      if (node.contains(key))
        return flatten_text(node.at(key));
  }
  return {};
}

inline std::string decode_entities(std::string_view s)
{
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i)
  {
    if (s[i] != '&')
    {
      out.push_back(s[i]);
      continue;
    }
    auto const semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10)
    {
      out.push_back('&');
      continue;
    }
    auto const entity = s.substr(i + 1, semi - i - 1);
    std::uint32_t cp = 0;
    if (entity == "lt")
      cp = '<';
    else if (entity == "gt")
      cp = '>';
    else if (entity == "amp")
      cp = '&';
    else if (entity == "quot")
      cp = '"';
    else if (entity == "apos")
      cp = '\'';
    else if (!entity.empty() && entity[0] == '#')
    {
      try
      {
        cp = entity.size() > 1 && (entity[1] == 'x' || entity[1] == 'X')
               ? static_cast<std::uint32_t>(std::stoul(std::string(entity.substr(2)), nullptr, 16))
               : static_cast<std::uint32_t>(std::stoul(std::string(entity.substr(1))));
      }
      catch (std::exception const &)
      {
        cp = 0;
      }
    }
    if (cp == 0)
    {
      out.push_back('&');
      continue;
    }
    if (cp < 0x80)
      out.push_back(static_cast<char>(cp));
    else if (cp < 0x800)
    {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    else if (cp < 0x10000)
    {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    else
    {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    i = semi;
  }
  return out;
}

// Drops markup, turning paragraph-like closing tags into line breaks, and tidies whitespace.
inline std::string xml_text(std::string_view xml)
{
  std::string raw;
  for (std::size_t i = 0; i < xml.size(); ++i)
  {
    if (xml[i] != '<')
    {
      raw.push_back(xml[i] == '\n' ? ' ' : xml[i]);
      continue;
    }
    auto const close = xml.find('>', i);
    if (close == std::string_view::npos)
      break;
    auto const tag = xml.substr(i + 1, close - i - 1);
    for (auto const *block : {"/p", "/title", "/head", "/sec", "/div", "/caption", "/figDesc", "/abstract", "br"})
      if (tag.rfind(block, 0) == 0)
      {
        raw += "\n\n";
        break;
      }
    i = close;
  }
  std::string const decoded = decode_entities(raw);
  std::string       out;
  int               newlines = 0;
  bool              space    = false;
  for (char c : decoded)
  {
    if (c == '\n')
    {
      ++newlines;
      space = false;
      continue;
    }
    if (c == ' ' || c == '\t')
    {
      space = true;
      continue;
    }
    if (!out.empty())
    {
      if (newlines > 0)
        out += newlines > 1 ? "\n\n" : "\n";
      else if (space)
        out.push_back(' ');
    }
    newlines = 0;
    space    = false;
    out.push_back(c);
  }
  return out;
}

// Inner XML of every <name ...>...</name> element in document order (no nesting of the same name).
inline std::vector<std::string> xml_elements(std::string_view xml, std::string const &name)
{
  std::vector<std::string> out;
  std::size_t              pos = 0;
  for (;;)
  {
    auto open = xml.find("<" + name, pos);
    if (open == std::string_view::npos)
      break;
    auto const after = open + name.size() + 1;
    if (after < xml.size() && xml[after] != '>' && xml[after] != ' ' && xml[after] != '/' && xml[after] != '\n')
    {
      pos = after;
      continue;
    }
    auto const open_end = xml.find('>', open);
    if (open_end == std::string_view::npos)
      break;
    if (xml[open_end - 1] == '/')
    {
      pos = open_end + 1;
      continue;
    }
    auto const close = xml.find("</" + name + ">", open_end);
    if (close == std::string_view::npos)
      break;
    out.emplace_back(xml.substr(open_end + 1, close - open_end - 1));
    pos = close + name.size() + 3;
  }
  return out;
}

inline std::string remove_elements(std::string xml, std::string const &name)
{
  for (;;)
  {
    auto open = xml.find("<" + name);
    if (open == std::string::npos)
      return xml;
    auto close = xml.find("</" + name + ">", open);
    if (close == std::string::npos)
      return xml;
    xml.erase(open, close + name.size() + 3 - open);
  }
}

}  // namespace detail

/// Maps a parsing-service response body onto a ParsedDocument according to `cfg.format`.
inline ParsedDocument map_parser_response(std::string const &body, PdfServiceConfig const &cfg)
{
  if (cfg.format == "json")
  {
    json root;
    try
    {
      root = json::parse(body);
    }
    catch (json::exception const &e)
    {
      throw ParseError("parser service returned malformed JSON: " + std::string(e.what()), body);
    }
    auto text_at = [&](std::string const &path) {
      auto const *node = detail::lookup_path(root, path);
      return node ? detail::flatten_text(*node) : std::string{};
    };
    std::vector<std::string> captions;
    if (auto const *node = detail::lookup_path(root, cfg.captions_path); node && node->is_array())
      for (auto const &c : *node)
        captions.push_back(detail::flatten_text(c));
    return ParsedDocument::make(text_at(cfg.title_path), text_at(cfg.abstract_path), captions,
                                text_at(cfg.body_path));
  }
  if (cfg.format == "jats" || cfg.format == "tei")
  {
    bool const  jats        = cfg.format == "jats";
    auto const  titles      = detail::xml_elements(body, jats ? "article-title" : "title");
    auto const  abstracts   = detail::xml_elements(body, "abstract");
    auto const  caption_els = detail::xml_elements(body, jats ? "caption" : "figDesc");
    auto const  bodies      = detail::xml_elements(body, "body");
    std::vector<std::string> captions;
    for (auto const &c : caption_els)
      captions.push_back(detail::xml_text(c));
    std::string body_text;
    if (!bodies.empty())
    {
      auto const stripped = detail::remove_elements(detail::remove_elements(bodies.front(), jats ? "fig" : "figure"),
                                                    jats ? "table-wrap" : "table");
      body_text = detail::xml_text(stripped);
    }
    return ParsedDocument::make(titles.empty() ? "" : detail::xml_text(titles.front()),
                                abstracts.empty() ? "" : detail::xml_text(abstracts.front()), captions, body_text);
  }
  throw ConfigError("unknown parser response format '" + cfg.format + "'");
}

/// Sends the PDF to the parsing service and maps its structured output.
inline ParsedDocument parse_pdf(std::string const &pdf_bytes, PdfServiceConfig const &cfg, Transport &transport)
{
  if (cfg.endpoint.empty())
    throw ConfigError("PDF parser endpoint not configured");
  if (pdf_bytes.rfind("%PDF", 0) != 0)
    throw PreconditionError("input is not a PDF (missing %PDF header)");
  HttpRequest req;
  req.method       = "POST";
  req.url          = cfg.endpoint;
  req.body         = pdf_bytes;
  req.content_type = "application/pdf";
  auto const response = send_with_retries(transport, req, cfg.retry);
  return map_parser_response(response.body, cfg);
}

}  // namespace revmatch
