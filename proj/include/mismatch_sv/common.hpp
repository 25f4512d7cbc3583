// mismatch_sv/common.hpp

// Copyright 2026  mismatch-sv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace msv {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Contract violations: malformed files, bad arguments, unresolved ids.
struct InvalidInput : Error {
  using Error::Error;
};

// Numerical failures: singular covariances, non-finite intermediates.
struct NumericalError : Error {
  using Error::Error;
};

// Failures opening or writing files.
struct IoError : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string &msg) {
  if (!cond) throw InvalidInput(msg);
}

// Process-wide worker count used by parallel_for.  0 means "all cores".
inline int &thread_count_storage() {
  static int count = 0;
  return count;
}

inline void set_thread_count(int n) { thread_count_storage() = n; }

inline int effective_thread_count() {
  int n = thread_count_storage();
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return n > 0 ? n : 1;
}

// Runs f(i) for i in [0, n).  Work is block-partitioned so each index is
// handled exactly once; callers must only write to per-index slots, which
// keeps results independent of the worker count.
template <typename F>
void parallel_for(std::size_t n, F &&f) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(effective_thread_count()),
                            n == 0 ? 1 : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&f, begin, end] {
      for (std::size_t i = begin; i < end; ++i) f(i);
    });
  }
  for (auto &t : pool) t.join();
}

// Shortest decimal string that parses back to exactly the same double.
inline std::string format_full(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Fixed 6 fractional digits, the score-file convention.
inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return std::string(buf);
}

// Locale-independent parse of a full token; no partial consumption allowed.
inline bool try_parse_double(std::string_view token, double &out) {
  const char *first = token.data();
  const char *last = token.data() + token.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
           c == '\f';
  };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool contains_whitespace(std::string_view s) {
  for (char c : s)
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
        c == '\f')
      return true;
  return false;
}

}  // namespace msv
