#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include <gtest/gtest.h>

#include "wsp/io.hpp"

namespace wsp::test {

/// Fresh directory under the system temp dir, removed on destruction.
/// Named after the running test, the process and a per-process counter.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "wsp-test";
    if (info) name += std::string("-") + info->test_suite_name() + "-" + info->name();
    static int instances = 0;
    name += "-" + std::to_string(::getpid()) + "-" + std::to_string(instances++);
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& contents) const {
    const auto p = file(name);
    io::write_file(p, contents);
    return p;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace wsp::test
