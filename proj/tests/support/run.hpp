#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ozk/runtime.hpp"

namespace testing {

struct RunResult {
  ozk::Outcome outcome = ozk::Outcome::AllDone;
  std::vector<std::string> out;
  std::string failure;
  std::int64_t clock = 0;
  std::uint64_t steps = 0;
};

inline RunResult run(std::string_view src, ozk::RuntimeOptions o = {}) {
  ozk::Runtime rt(o);
  rt.load(src);
  RunResult r;
  r.outcome = rt.run();
  r.out = rt.output();
  r.failure = rt.failure();
  r.clock = rt.clock();
  r.steps = rt.steps();
  return r;
}

// single output line, or "" when there is not exactly one
inline std::string run1(std::string_view src, ozk::RuntimeOptions o = {}) {
  auto r = run(src, o);
  return r.out.size() == 1 ? r.out[0] : std::string();
}

inline std::string read_text(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string s;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, f)) > 0;) s.append(buf, n);
  std::fclose(f);
  return s;
}

}  // namespace testing
