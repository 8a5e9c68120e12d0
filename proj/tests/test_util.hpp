#ifndef WATTBOUND_TEST_UTIL_HPP
#define WATTBOUND_TEST_UTIL_HPP

#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "wattbound/diagnostics.hpp"

inline std::string fixture_path(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(static_cast<bool>(in), "cannot open ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string read_fixture(const std::string& name) { return read_file(fixture_path(name)); }

// Runs f, requires it to throw Error of the given kind, returns the message.
template <typename F>
std::string expect_error(F&& f, wattbound::ErrKind kind) {
  try {
    f();
  } catch (const wattbound::Error& e) {
    CHECK(e.kind() == kind);
    return e.what();
  }
  FAIL("expected an error, none was raised");
  return {};
}

inline bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

#endif
