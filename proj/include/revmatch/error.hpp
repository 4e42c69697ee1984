// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace revmatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (empty title, threshold out of range, ...).
class PreconditionError : public Error
{
public:
  using Error::Error;
};

/// Invalid or incomplete configuration detected before any work starts.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Input data could not be parsed. `raw` keeps the offending text when there is one.
class ParseError : public Error
{
public:
  ParseError(std::string const &what, std::string raw = {})
    : Error(what)
    , raw_(std::move(raw))
  {}

  std::string const &raw() const noexcept { return raw_; }

private:
  std::string raw_;
};

/// Transport or remote-service failure. `retryable` marks transient failures.
class NetworkError : public Error
{
public:
  NetworkError(std::string const &what, int status = 0, bool retryable = true)
    : Error(what)
    , status_(status)
    , retryable_(retryable)
  {}

  int  status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

private:
  int  status_;
  bool retryable_;
};

/// Replay mode asked for a transcript that is not in the store.
class ReplayMiss : public Error
{
public:
  explicit ReplayMiss(std::string key)
    : Error("replay miss: no transcript for key " + key)
    , key_(std::move(key))
  {}

  std::string const &key() const noexcept { return key_; }

private:
  std::string key_;
};

/// Error raised while a named pipeline stage was running.
class StageError : public Error
{
public:
  StageError(std::string stage, std::string const &what)
    : Error(stage + ": " + what)
    , stage_(std::move(stage))
  {}

  std::string const &stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

}  // namespace revmatch
