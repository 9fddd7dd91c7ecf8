#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cforge {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found)
      : Error(make_message(offset, expected, found)), offset_(offset), expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  static std::string make_message(std::size_t offset, const std::vector<std::string>& expected,
                                  const std::string& found) {
    std::string msg = "parse error at offset " + std::to_string(offset) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    msg += ", found " + found;
    return msg;
  }

  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownFunction : public Error {
 public:
  UnknownFunction(std::string name, std::size_t offset)
      : Error("unknown function '" + name + "' at offset " + std::to_string(offset)),
        name_(std::move(name)),
        offset_(offset) {}
  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string name_;
  std::size_t offset_;
};

class UnboundSymbol : public Error {
 public:
  explicit UnboundSymbol(std::string name)
      : Error("unbound symbol '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// Evaluation left the real domain of an operation. Carries the offending
// subexpression when one is known.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpression = {})
      : Error(subexpression.empty() ? what : what + " in '" + subexpression + "'"),
        subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

class ChartMismatch : public Error {
 public:
  using Error::Error;
};
class DegreeOverflow : public Error {
 public:
  using Error::Error;
};
class ArityMismatch : public Error {
 public:
  using Error::Error;
};
class DimensionLimit : public Error {
 public:
  using Error::Error;
};
class DerivativeDepthExceeded : public Error {
 public:
  DerivativeDepthExceeded() : Error("derivative nesting deeper than three levels") {}
};
class SingularSystem : public Error {
 public:
  using Error::Error;
};
class DegenerateVolume : public Error {
 public:
  using Error::Error;
};
class StepSizeUnderflow : public Error {
 public:
  using Error::Error;
};
class LeftDomain : public Error {
 public:
  using Error::Error;
};
class BracketFailure : public Error {
 public:
  using Error::Error;
};
class DegenerateParametrization : public Error {
 public:
  using Error::Error;
};
class UnknownKind : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line, std::size_t column)
      : Error("config error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace cforge
