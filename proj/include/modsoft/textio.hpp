#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "modsoft/errors.hpp"

namespace modsoft::textio {

// Shortest decimal text that parses back to the same double.
inline void append_double(std::string& out, double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

inline std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("bad number '" + std::string(s) + "'", line);
  return v;
}

inline long long parse_int(std::string_view s, std::size_t line) {
  long long v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("bad integer '" + std::string(s) + "'", line);
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, std::size_t line) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("bad integer '" + std::string(s) + "'", line);
  return v;
}

// 64-bit FNV-1a of `s` as 16 hex digits.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = digits[h & 0xf];
  return out;
}

inline std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Parses "key=value" tokens of a header line (tokens without '=' are skipped).
inline std::map<std::string, std::string> parse_header_fields(std::string_view line) {
  std::map<std::string, std::string> kv;
  for (auto tok : split(line)) {
    auto eq = tok.find('=');
    if (eq == std::string_view::npos) continue;
    kv.emplace(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
  }
  return kv;
}

inline const std::string& require_field(const std::map<std::string, std::string>& kv, const std::string& key,
                                        std::size_t line) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("header missing '" + key + "'", line);
  return it->second;
}

}  // namespace modsoft::textio
