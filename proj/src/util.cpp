// SPDX-License-Identifier: Apache-2.0
#include "pmchar/util.hpp"

#include <cctype>

namespace pmchar {

std::vector<int> parse_cpu_list(const std::string& s) {
  std::vector<int> out;
  std::string t = trim(s);
  if (t.empty()) return out;
  for (const std::string& part : split(t, ',')) {
    std::string p = trim(part);
    if (p.empty()) fail("cpu list: empty element in '" + s + "'");
    size_t dash = p.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoi(p));
      } else {
        int lo = std::stoi(p.substr(0, dash));
        int hi = std::stoi(p.substr(dash + 1));
        if (hi < lo) fail("cpu list: descending range in '" + s + "'");
        for (int c = lo; c <= hi; ++c) out.push_back(c);
      }
    } catch (const std::invalid_argument&) {
      fail("cpu list: cannot parse '" + p + "' in '" + s + "'");
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace pmchar
