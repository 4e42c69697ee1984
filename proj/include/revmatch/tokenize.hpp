// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Pluggable tokenizers used for prompt budgeting.
//
// Built-in ids:
//   "whitespace" - maximal runs of non-space bytes
//   "simple"     - runs of letters/digits (non-ASCII bytes count as letters), every other
//                  visible character is its own token. This is the default approximation.
// A greedy longest-match subword tokenizer can be registered from a vocabulary file with
// register_wordpiece_tokenizer(); continuation pieces are written "##piece".

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "revmatch/error.hpp"
#include "revmatch/json_util.hpp"

namespace revmatch {

/// Byte range [begin, end) of one token.
struct TokenSpan
{
  std::size_t begin = 0;
  std::size_t end   = 0;
};

using Tokenizer = std::function<std::vector<TokenSpan>(std::string_view)>;

inline constexpr std::string_view kDefaultTokenizer = "simple";

namespace detail {

inline bool is_space(unsigned char c)
{
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_word_byte(unsigned char c)
{
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline std::size_t utf8_length(unsigned char lead)
{
  if (lead < 0x80)
    return 1;
  if ((lead >> 5) == 0x6)
    return 2;
  if ((lead >> 4) == 0xe)
    return 3;
  if ((lead >> 3) == 0x1e)
    return 4;
  return 1;
}

inline std::vector<TokenSpan> whitespace_spans(std::string_view text)
{
  std::vector<TokenSpan> out;
  std::size_t            i = 0;
  while (i < text.size())
  {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i])))
      ++i;
    if (i == text.size())
      break;
    std::size_t const start = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i])))
      ++i;
    out.push_back({start, i});
  }
  return out;
}

inline std::vector<TokenSpan> simple_spans(std::string_view text)
{
  std::vector<TokenSpan> out;
  std::size_t            i = 0;
  while (i < text.size())
  {
    auto const c = static_cast<unsigned char>(text[i]);
    if (is_space(c))
    {
      ++i;
      continue;
    }
    std::size_t const start = i;
    if (is_word_byte(c))
    {
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i])))
        ++i;
    }
    else
      ++i;
    out.push_back({start, i});
  }
  return out;
}

class WordPiece
{
public:
  explicit WordPiece(std::vector<std::string> const &vocab)
  {
    for (auto const &piece : vocab)
    {
      if (piece.empty())
        continue;
      pieces_.insert(piece);
      max_len_ = std::max(max_len_, piece.size());
    }
  }

  std::vector<TokenSpan> operator()(std::string_view text) const
  {
    std::vector<TokenSpan> out;
    for (auto const word : simple_spans(text))
    {
      if (word.end - word.begin == 1 && !is_word_byte(static_cast<unsigned char>(text[word.begin])))
      {
        out.push_back(word);
        continue;
      }
      std::size_t pos = word.begin;
      while (pos < word.end)
      {
        std::string const prefix = pos == word.begin ? "" : "##";
        std::size_t       best   = 0;
        for (std::size_t len = std::min(max_len_, word.end - pos); len > 0; --len)
        {
          if (pieces_.contains(prefix + std::string(text.substr(pos, len))))
          {
            best = len;
            break;
          }
        }
        if (best == 0)
          best = std::min(utf8_length(static_cast<unsigned char>(text[pos])), word.end - pos);
        out.push_back({pos, pos + best});
        pos += best;
      }
    }
    return out;
  }

private:
  std::unordered_set<std::string> pieces_;
  std::size_t                     max_len_ = 0;
};

}  // namespace detail

/// Process-wide registry of tokenizers, keyed by id.
class TokenizerRegistry
{
public:
  static TokenizerRegistry &instance()
  {
    static TokenizerRegistry registry;
    return registry;
  }

  void add(std::string const &id, Tokenizer tokenizer)
  {
    std::scoped_lock lock(mutex_);
    tokenizers_[id] = std::move(tokenizer);
  }

  bool contains(std::string_view id) const
  {
    std::scoped_lock lock(mutex_);
    return tokenizers_.find(std::string(id)) != tokenizers_.end();
  }

  Tokenizer get(std::string_view id) const
  {
    std::scoped_lock lock(mutex_);
    auto it = tokenizers_.find(std::string(id));
    if (it == tokenizers_.end())
      throw ConfigError("unknown tokenizer_id '" + std::string(id) + "'");
    return it->second;
  }

private:
  TokenizerRegistry()
  {
    tokenizers_["whitespace"] = detail::whitespace_spans;
    tokenizers_["simple"]     = detail::simple_spans;
  }

  mutable std::mutex               mutex_;
  std::map<std::string, Tokenizer> tokenizers_;
};

/// Registers a greedy longest-match subword tokenizer; `vocab_path` holds one piece per line.
inline void register_wordpiece_tokenizer(std::string const &id, std::string const &vocab_path)
{
  std::vector<std::string> vocab;
  std::string              content = read_file(vocab_path);
  std::size_t              start   = 0;
  while (start <= content.size())
  {
    auto end = content.find('\n', start);
    if (end == std::string::npos)
      end = content.size();
    std::string piece = content.substr(start, end - start);
    if (!piece.empty() && piece.back() == '\r')
      piece.pop_back();
    if (!piece.empty())
      vocab.push_back(std::move(piece));
    start = end + 1;
  }
  TokenizerRegistry::instance().add(id, detail::WordPiece(vocab));
}

inline std::vector<TokenSpan> tokenize(std::string_view text, std::string_view tokenizer_id = kDefaultTokenizer)
{
  return TokenizerRegistry::instance().get(tokenizer_id)(text);
}

inline std::size_t count_tokens(std::string_view text, std::string_view tokenizer_id = kDefaultTokenizer)
{
  return tokenize(text, tokenizer_id).size();
}

}  // namespace revmatch
