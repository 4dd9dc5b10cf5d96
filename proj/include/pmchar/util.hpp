// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmchar {

inline constexpr const char* kVersion = "0.1.0";

// printf-style formatting into a std::string. Used for all numeric output so
// that file contents are byte-stable across runs (std::ostream formatting is
// locale- and implementation-sensitive).
inline std::string strf(const char* fmt, ...) {
  va_list ap;
  va_start(ap, fmt);
  va_list ap2;
  va_copy(ap2, ap);
  int n = std::vsnprintf(nullptr, 0, fmt, ap);
  va_end(ap);
  std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
  if (n > 0) std::vsnprintf(out.data(), out.size() + 1, fmt, ap2);
  va_end(ap2);
  return out;
}

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

// "0-3,64-67" -> {0,1,2,3,64,65,66,67}.  Accepts the kernel's cpulist format.
std::vector<int> parse_cpu_list(const std::string& s);

// Split a line on a delimiter, no quoting (our files never need it).
std::vector<std::string> split(const std::string& line, char delim);

std::string trim(const std::string& s);

// FNV-1a over a byte string; used for topology hashes.
uint64_t fnv1a(const std::string& bytes);

// Time units: int64_t nanoseconds everywhere.
inline constexpr int64_t kUs = 1000;
inline constexpr int64_t kMs = 1000 * 1000;
inline constexpr int64_t kSec = 1000 * 1000 * 1000;

}  // namespace pmchar
