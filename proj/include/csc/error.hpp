#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csc {

/// Base of every exception thrown by the platform. `code()` is a stable,
/// machine-readable identifier (e.g. "PhaseGap") used by the CLI and the
/// HTTP layer; `what()` carries the human message.
class Error : public std::runtime_error
{
public:
  Error(std::string code, const std::string& message)
    : std::runtime_error(message)
    , code_(std::move(code))
  {
  }

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

class BundleError : public Error
{
public:
  using Error::Error;
};

class SandboxError : public Error
{
public:
  using Error::Error;
};

class AssessmentError : public Error
{
public:
  using Error::Error;
};

class CoachError : public Error
{
public:
  using Error::Error;
};

class GameError : public Error
{
public:
  using Error::Error;
};

class StorageError : public Error
{
public:
  using Error::Error;
};

class AnalyticsError : public Error
{
public:
  using Error::Error;
};

} // namespace csc
