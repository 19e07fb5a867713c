#pragma once

#include <stdexcept>
#include <string>

namespace drssl {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape contract violated; the message names the offending dimension.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class DataErrorCode {
  io_error,
  corrupt_header,
  dimension_overflow,
  truncated_payload,
  invalid_record,
  invalid_argument,
};

const char* to_string(DataErrorCode code);

class DataError : public Error {
 public:
  DataError(DataErrorCode code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

  DataErrorCode code() const noexcept { return code_; }

 private:
  DataErrorCode code_;
};

}  // namespace drssl
