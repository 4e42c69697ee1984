// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Recovery of JSON objects embedded in free-form model output.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "revmatch/error.hpp"

namespace revmatch {

using json = nlohmann::ordered_json;

namespace detail {

// End offset (exclusive) of the balanced object starting at `open`, or npos.
inline std::size_t balanced_object_end(std::string_view text, std::size_t open)
{
  int  depth     = 0;
  bool in_string = false;
  bool escaped   = false;
  for (std::size_t i = open; i < text.size(); ++i)
  {
    char const c = text[i];
    if (in_string)
    {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}')
    {
      if (--depth == 0)
        return i + 1;
    }
  }
  return std::string_view::npos;
}

// Drops commas that directly precede a closing bracket (outside strings).
inline std::string strip_trailing_commas(std::string_view text)
{
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  bool escaped   = false;
  for (std::size_t i = 0; i < text.size(); ++i)
  {
    char const c = text[i];
    if (in_string)
    {
      out.push_back(c);
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    if (c == ',')
    {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\n' || text[j] == '\r' || text[j] == '\t'))
        ++j;
      if (j < text.size() && (text[j] == '}' || text[j] == ']'))
        continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// One top-level member of a JSON object, in source order. Duplicated keys are kept.
struct JsonMember
{
  std::string key;
  json        value;
};

/// A recovered JSON object with its members in source order.
struct RecoveredObject
{
  std::vector<JsonMember> members;
  std::string             source;  // the exact substring that parsed
};

/// Parses `text` as a JSON object, keeping duplicate top-level keys. Returns nullopt on failure.
inline std::optional<std::vector<JsonMember>> parse_object_members(std::string_view text)
{
  std::vector<JsonMember> members;
  std::string             current_key;
  auto callback = [&](int depth, json::parse_event_t event, json &parsed) {
    if (depth == 1 && event == json::parse_event_t::key)
      current_key = parsed.get<std::string>();
    else if (depth == 1 && event == json::parse_event_t::value)
      members.push_back({current_key, parsed});
    else if (depth == 1 && (event == json::parse_event_t::object_end || event == json::parse_event_t::array_end))
      members.push_back({current_key, parsed});
    return true;
  };
  try
  {
    json whole = json::parse(text.begin(), text.end(), callback);
    if (!whole.is_object())
      return std::nullopt;
  }
  catch (json::exception const &)
  {
    return std::nullopt;
  }
  return members;
}

/// Finds the first balanced `{...}` in `text` that parses as a JSON object, tolerating code
/// fences, surrounding prose and trailing commas.
inline std::optional<RecoveredObject> recover_first_object(std::string_view text)
{
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1))
  {
    std::size_t const end = detail::balanced_object_end(text, open);
    if (end == std::string_view::npos)
      continue;
    std::string_view candidate = text.substr(open, end - open);
    if (auto members = parse_object_members(candidate))
      return RecoveredObject{std::move(*members), std::string(candidate)};
    std::string repaired = detail::strip_trailing_commas(candidate);
    if (auto members = parse_object_members(repaired))
      return RecoveredObject{std::move(*members), std::move(repaired)};
  }
  return std::nullopt;
}

inline std::string read_file(std::string const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `content` to a sibling temp file and renames it over `path`, creating parent
/// directories. Readers never observe a partially written file.
inline void write_file_atomic(std::filesystem::path const &path, std::string_view content)
{
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << "." << std::random_device{}();
  auto const tmp = std::filesystem::path(path.string() + suffix.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
      throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Serialises with stable formatting (2-space indent, UTF-8 kept as-is, trailing newline).
inline std::string dump_stable(json const &value)
{
  return value.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace revmatch
