#ifndef GEOLM_SRC_NUMFMT_HPP_
#define GEOLM_SRC_NUMFMT_HPP_

#include <charconv>
#include <string>

namespace geolm {

/// Shortest decimal that round-trips; locale independent.
inline std::string format_number(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double value, int precision) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

/// Quotes a CSV field when it contains a separator, quote or newline.
inline std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace geolm

#endif  // GEOLM_SRC_NUMFMT_HPP_
