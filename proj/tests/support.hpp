#pragma once

#include <doctest.h>

#include "infspec/error.hpp"

#include <functional>

namespace testing {

// Kind of the infspec::Error raised by f; fails the test when nothing is thrown.
inline infspec::ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const infspec::Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return infspec::ErrorKind::ConfigError;
}

}  // namespace testing
