#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace valence {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kDependency = 3,
  kBackend = 4,
};

/// Base of every error raised by the library. Carries the exit code the CLI
/// maps it to.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kValidation)
      : std::runtime_error(what), code_(code) {}

  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Input violates a documented invariant or closed value set.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

/// Operation precondition not met (e.g. k > |chunks|, empty input).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what, ExitCode::kValidation) {}
};

/// Malformed input file; `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what,
              ExitCode::kValidation),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A pipeline stage was invoked before the stage producing its input.
class DependencyError : public Error {
 public:
  explicit DependencyError(const std::string& what) : Error(what, ExitCode::kDependency) {}
};

}  // namespace valence
