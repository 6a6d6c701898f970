#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

namespace wsp::io {

std::string read_file(const std::string& path);

/// Writes the whole file; throws IoError naming the path on failure.
void write_file(const std::string& path, std::string_view contents);

bool exists(const std::string& path);

/// Line reader that tracks 1-based line numbers and strips a trailing CR.
class LineReader {
 public:
  explicit LineReader(const std::string& path);
  std::optional<std::string> next();
  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::string& path);
std::string sha256(std::string_view data);

}  // namespace wsp::io
