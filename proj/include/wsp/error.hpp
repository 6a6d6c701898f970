#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsp {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or command-line usage. Maps to exit code 1.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& key, const std::string& what)
      : Error("config: " + key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Input data violated a format or an invariant. Maps to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed markup or text record, carrying the byte offset of the problem.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t byte_pos)
      : DataError(what + " at byte " + std::to_string(byte_pos)), byte_pos_(byte_pos) {}
  std::size_t byte_pos() const { return byte_pos_; }

 private:
  std::size_t byte_pos_;
};

/// A record failed validation; `field()` names the offending field.
class ValidationError : public DataError {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : DataError("invalid " + field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A line-oriented input file had a bad record.
class LineError : public DataError {
 public:
  LineError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public DataError {
 public:
  IoError(const std::string& path, const std::string& what)
      : DataError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace wsp
