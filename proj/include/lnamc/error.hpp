#pragma once

#include <stdexcept>
#include <string>

namespace lnamc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ill-formed network or system setup.
class ModelError : public Error {
 public:
  using Error::Error;
};

struct SourceLocation {
  std::size_t line = 1;
  std::size_t column = 1;
};

class ParseError : public Error {
 public:
  ParseError(SourceLocation where, const std::string& message)
      : Error(std::to_string(where.line) + ":" + std::to_string(where.column) + ": " + message),
        where_(where),
        message_(message) {}

  SourceLocation where() const { return where_; }
  const std::string& message() const { return message_; }

 private:
  SourceLocation where_;
  std::string message_;
};

// Numerical integration failure, reported with the time it happened.
class IntegrationError : public Error {
 public:
  IntegrationError(double time, const std::string& message)
      : Error(message + " at t=" + std::to_string(time)), time_(time) {}

  double time() const { return time_; }

 private:
  double time_;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class CheckError : public Error {
 public:
  using Error::Error;
};

}  // namespace lnamc
