#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace opgan {

/// Base for every error the library raises. `kind()` is a short stable token
/// used by the CLI to print machine-parseable diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// Shapes or hyperparameters that cannot work together.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// API misuse, e.g. backward() on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "usage"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

/// Malformed binary container. Carries the byte offset where decoding failed.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  const char* kind() const noexcept override { return "decode"; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Malformed text input; names the file and 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}
  const char* kind() const noexcept override { return "parse"; }
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Segment with max == min; cannot be mapped onto [-1, 1].
class DegenerateSegment : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate"; }
};

/// A loss turned NaN/Inf during training.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "diverged"; }
};

}  // namespace opgan
