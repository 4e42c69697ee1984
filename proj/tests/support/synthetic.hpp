// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Deterministic stand-ins for the chat model and the network, used by tests and by the
// fixture recorder.
//
// Text fed to the synthetic model carries tags like "[p1:power]". Review prompts produce one
// rejection bullet per tag found in the paper; extraction returns every "- " bullet line;
// matching rates two comments 8 when they share a tag and 5 when they only share the paper.

#include <atomic>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "revmatch/revmatch.hpp"

namespace revmatch::testing {

struct Tag
{
  std::string paper;
  std::string topic;

  auto operator<=>(Tag const &) const = default;
};

inline std::vector<Tag> tags_in(std::string const &text)
{
  static std::regex const pattern(R"(\[([A-Za-z0-9_]+):([A-Za-z0-9_]+)\])");
  std::vector<Tag>        out;
  std::set<Tag>           seen;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern); it != std::sregex_iterator(); ++it)
  {
    Tag t{(*it)[1].str(), (*it)[2].str()};
    if (seen.insert(t).second)
      out.push_back(t);
  }
  return out;
}

class SyntheticProvider final : public ChatProvider
{
public:
  ProviderReply complete(CompletionRequest const &request) override
  {
    ++calls;
    switch (request.purpose)
    {
    case Purpose::review_generation: return {review(request.prompt_text), FinishState::complete};
    case Purpose::extraction: return {extraction(request.prompt_text), FinishState::complete};
    case Purpose::matching: return {matching(request.prompt_text), FinishState::complete};
    default: break;
    }
    return {"{}", FinishState::complete};
  }

  std::atomic<int> calls{0};

private:
  static std::string review(std::string const &prompt)
  {
    std::string out = "Review outline:\n\n1. Significance and novelty\nThe submission addresses a relevant question.\n\n"
                      "2. Potential reasons for acceptance\nThe study is clearly motivated.\n\n"
                      "3. Potential reasons for rejection\n";
    auto const tags = tags_in(prompt);
    if (tags.empty())
      out += "No major concerns were identified.\n";
    for (auto const &t : tags)
      out += "- The treatment of [" + t.paper + ":" + t.topic + "] needs stronger evidence.\n";
    out += "\n4. Suggestions for improvement\nClarify the presentation of the main results.\n";
    return out;
  }

  static std::string extraction(std::string const &prompt)
  {
    json        points = json::object();
    std::size_t start  = 0;
    int         n      = 0;
    while (start < prompt.size())
    {
      auto end = prompt.find('\n', start);
      if (end == std::string::npos)
        end = prompt.size();
      auto const line = prompt.substr(start, end - start);
      start           = end + 1;
      if (line.rfind("- ", 0) == 0)
        points[std::to_string(++n)] = line.substr(2);
    }
    return "Here are the extracted points:\n```json\n" + points.dump(2) + "\n```\n";
  }

  static json list_after(std::string const &prompt, std::string const &marker)
  {
    auto const pos = prompt.find(marker);
    if (pos == std::string::npos)
      return json::object();
    auto obj = recover_first_object(std::string_view(prompt).substr(pos + marker.size()));
    return obj ? json::parse(obj->source) : json::object();
  }

  static std::string matching(std::string const &prompt)
  {
    auto const a   = list_after(prompt, "====Review A:\n");
    auto const b   = list_after(prompt, "=====Review B:\n");
    json       out = json::object();
    for (auto const &[ka, va] : a.items())
    {
      auto const ta = tags_in(va.get<std::string>());
      for (auto const &[kb, vb] : b.items())
      {
        auto const tb     = tags_in(vb.get<std::string>());
        int        rating = 0;
        for (auto const &x : ta)
          for (auto const &y : tb)
            rating = std::max(rating, x == y ? 8 : x.paper == y.paper ? 5 : 0);
        if (rating > 0)
          out["A" + ka + "-B" + kb] = json{{"rationale", rating == 8 ? "same concern" : "same paper, other concern"},
                                           {"similarity", std::to_string(rating)}};
      }
    }
    return out.dump(2);
  }
};

/// Transport that records every request and refuses it.
class ProbeTransport final : public Transport
{
public:
  HttpResponse send(HttpRequest const &request) override
  {
    ++requests;
    throw NetworkError("probe transport: unexpected network request to " + request.url, 0, false);
  }

  std::atomic<int> requests{0};
};

}  // namespace revmatch::testing
