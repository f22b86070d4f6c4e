#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace tabqa::text {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// Lowercases and splits on every non-alphanumeric byte.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Canonical form used to compare template phrasings: tokenized, rejoined with
/// single spaces, with a trailing plural "s" dropped from words longer than 3.
inline std::string normalize(std::string_view s) {
  auto toks = tokenize(s);
  for (auto& t : toks) {
    if (t.size() > 3 && t.back() == 's' && t[t.size() - 2] != 's') t.pop_back();
  }
  return join(toks, " ");
}

inline std::string pluralize(std::string_view word) {
  std::string w(word);
  if (w.empty()) return w;
  char last = static_cast<char>(std::tolower(static_cast<unsigned char>(w.back())));
  if (last == 's') return w;
  if (last == 'y' && w.size() > 1 &&
      std::string_view("aeiou").find(static_cast<char>(std::tolower(
          static_cast<unsigned char>(w[w.size() - 2])))) == std::string_view::npos) {
    w.pop_back();
    return w + "ies";
  }
  return w + "s";
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Formats with at most two decimals and thousands separators: 1234 -> "1,234",
/// 2.5 -> "2.5", 0.333 -> "0.33".
inline std::string format_number(double v) {
  if (!std::isfinite(v)) return "n/a";
  double r = std::round(v * 100.0) / 100.0;
  if (r == 0.0) r = 0.0;  // drop negative zero
  bool neg = r < 0;
  double a = std::fabs(r);
  auto whole = static_cast<long long>(std::floor(a + 1e-9));
  long long cents = std::llround((a - static_cast<double>(whole)) * 100.0);
  if (cents == 100) {
    ++whole;
    cents = 0;
  }
  std::string digits = std::to_string(whole);
  std::string grouped;
  int n = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (n && n % 3 == 0) grouped.push_back(',');
    grouped.push_back(*it);
    ++n;
  }
  std::reverse(grouped.begin(), grouped.end());
  std::string out = neg ? "-" + grouped : grouped;
  if (cents) {
    char buf[8];
    std::snprintf(buf, sizeof buf, ".%02lld", cents);
    std::string frac(buf);
    if (frac.back() == '0') frac.pop_back();
    out += frac;
  }
  return out;
}

} // namespace tabqa::text
