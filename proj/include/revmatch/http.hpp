// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

// Minimal HTTP abstraction shared by the review-platform client, the PDF parsing
// service client and the chat-completion provider. Tests substitute a fake Transport.

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "revmatch/error.hpp"

namespace revmatch {

struct HttpRequest
{
  std::string                                      method = "GET";
  std::string                                      url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string                                      body;
  std::string                                      content_type;
};

struct HttpResponse
{
  int         status = 0;
  std::string body;
};

/// Sends one request. Implementations throw NetworkError when no response was received.
class Transport
{
public:
  virtual ~Transport()                                  = default;
  virtual HttpResponse send(HttpRequest const &request) = 0;
};

/// Transport that refuses every request; used to prove offline operation.
class OfflineTransport final : public Transport
{
public:
  HttpResponse send(HttpRequest const &request) override
  {
    throw NetworkError("network access disabled (offline): " + request.method + " " + request.url, 0, false);
  }
};

struct RetryPolicy
{
  int                       max_retries = 3;
  std::chrono::milliseconds base_delay{500};
};

inline bool is_transient_status(int status)
{
  return status == 408 || status == 429 || status >= 500;
}

/// Sends `request`, retrying transient failures with exponential backoff. A 2xx response is
/// returned; anything else ends in NetworkError carrying the last status and body.
inline HttpResponse send_with_retries(Transport &transport, HttpRequest const &request, RetryPolicy const &policy)
{
  std::string last_error;
  int         last_status = 0;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt)
  {
    if (attempt > 0 && policy.base_delay.count() > 0)
      std::this_thread::sleep_for(policy.base_delay * (1 << (attempt - 1)));
    try
    {
      HttpResponse response = transport.send(request);
      if (response.status >= 200 && response.status < 300)
        return response;
      last_status = response.status;
      last_error  = "HTTP " + std::to_string(response.status) + ": " + response.body;
      if (!is_transient_status(response.status))
        throw NetworkError(request.method + " " + request.url + " failed: " + last_error, response.status, false);
    }
    catch (NetworkError const &e)
    {
      if (!e.retryable())
        throw;
      last_error  = e.what();
      last_status = e.status();
    }
  }
  throw NetworkError(request.method + " " + request.url + " failed after " + std::to_string(policy.max_retries) +
                       " retries: " + last_error,
                     last_status, true);
}

}  // namespace revmatch
