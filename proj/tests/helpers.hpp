#pragma once

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <string>

#include "mrb/error.hpp"

namespace testing_util {

// Per-process scratch path under the system temp directory.
inline std::filesystem::path scratch(const std::string& name) {
  auto path = std::filesystem::temp_directory_path() / ("mrb_test_" + std::to_string(::getpid())) / name;
  std::filesystem::create_directories(path.parent_path());
  return path;
}

template <typename Fn>
mrb::ErrorKind kind_of(Fn fn) {
  try {
    fn();
  } catch (const mrb::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected mrb::Error";
  return mrb::ErrorKind::IoError;
}

}  // namespace testing_util
