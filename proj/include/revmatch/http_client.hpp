// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// cpp-httplib backed Transport. Kept apart from http.hpp because httplib.h is heavy.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <chrono>
#include <memory>
#include <string>

#include "revmatch/http.hpp"

namespace revmatch {

namespace detail {

// Splits "https://host:port/path?q" into ("https://host:port", "/path?q").
inline std::pair<std::string, std::string> split_url(std::string const &url)
{
  auto const scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("URL lacks a scheme: " + url);
  auto const path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos)
    return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

class HttpTransport final : public Transport
{
public:
  explicit HttpTransport(std::chrono::seconds timeout)
    : timeout_(timeout)
  {}

  HttpResponse send(HttpRequest const &request) override
  {
    auto const [origin, path] = detail::split_url(request.url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    client.set_follow_location(true);

    httplib::Headers headers;
    for (auto const &[name, value] : request.headers)
      headers.emplace(name, value);

    httplib::Result result;
    if (request.method == "GET")
      result = client.Get(path, headers);
    else if (request.method == "POST")
      result = client.Post(path, headers, request.body, request.content_type);
    else
      throw ConfigError("unsupported HTTP method " + request.method);

    if (!result)
      throw NetworkError(request.method + " " + request.url + ": " + httplib::to_string(result.error()), 0, true);
    return HttpResponse{result->status, result->body};
  }

private:
  std::chrono::seconds timeout_;
};

inline std::unique_ptr<Transport> make_http_transport(std::chrono::seconds timeout)
{
  return std::make_unique<HttpTransport>(timeout);
}

}  // namespace revmatch
