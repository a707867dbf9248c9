#include "utf8.hpp"

namespace geolm::utf8 {

namespace {

struct Range {
  char32_t lo, hi;
};

// Extended_Pictographic, coarsened to blocks. Good enough for social text;
// it never claims ASCII.
constexpr Range kPictographic[] = {
    {0x00A9, 0x00A9}, {0x00AE, 0x00AE}, {0x203C, 0x203C}, {0x2049, 0x2049},
    {0x2122, 0x2122}, {0x2139, 0x2139}, {0x2194, 0x2199}, {0x21A9, 0x21AA},
    {0x231A, 0x231B}, {0x2328, 0x2328}, {0x2388, 0x2388}, {0x23CF, 0x23CF},
    {0x23E9, 0x23F3}, {0x23F8, 0x23FA}, {0x24C2, 0x24C2}, {0x25AA, 0x25AB},
    {0x25B6, 0x25B6}, {0x25C0, 0x25C0}, {0x25FB, 0x25FE}, {0x2600, 0x27BF},
    {0x2934, 0x2935}, {0x2B05, 0x2B07}, {0x2B1B, 0x2B1C}, {0x2B50, 0x2B50},
    {0x2B55, 0x2B55}, {0x3030, 0x3030}, {0x303D, 0x303D}, {0x3297, 0x3297},
    {0x3299, 0x3299}, {0x1F000, 0x1F1E5}, {0x1F200, 0x1FAFF}, {0x1FC00, 0x1FFFD},
};

bool in_ranges(char32_t cp, const Range* begin, const Range* end) {
  for (const Range* r = begin; r != end; ++r)
    if (cp >= r->lo && cp <= r->hi) return true;
  return false;
}

bool is_emoji_modifier(char32_t cp) { return cp >= 0x1F3FB && cp <= 0x1F3FF; }
bool is_variation_selector(char32_t cp) { return cp == 0xFE0F || cp == 0xFE0E; }
bool is_tag(char32_t cp) { return cp >= 0xE0020 && cp <= 0xE007F; }
constexpr char32_t kZwj = 0x200D;
constexpr char32_t kKeycap = 0x20E3;

bool is_keycap_base(char32_t cp) { return (cp >= U'0' && cp <= U'9') || cp == U'#' || cp == U'*'; }

}  // namespace

Unit Decoder::next() {
  Unit unit;
  unit.offset = pos_;
  const auto lead = static_cast<unsigned char>(text_[pos_]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    len = 1;
    cp = lead;
  } else if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  }
  bool ok = len > 0 && pos_ + len <= text_.size();
  for (std::size_t k = 1; ok && k < len; ++k) {
    const auto c = static_cast<unsigned char>(text_[pos_ + k]);
    if ((c & 0xC0) != 0x80) ok = false;
    cp = (cp << 6) | (c & 0x3F);
  }
  if (ok && ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
             cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)))
    ok = false;
  if (!ok) {
    unit.valid = false;
    unit.codepoint = 0xFFFD;
    len = 1;
  } else {
    unit.codepoint = cp;
  }
  unit.bytes = text_.substr(pos_, len);
  pos_ += len;
  return unit;
}

std::vector<Unit> decode_all(std::string_view text) {
  std::vector<Unit> units;
  Decoder decoder(text);
  while (!decoder.done()) units.push_back(decoder.next());
  return units;
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;  // Latin-1
  if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;  // Latin Extended-A
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;  // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000: case 0xFEFF:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200B;
  }
}

bool is_extended_pictographic(char32_t cp) {
  return in_ranges(cp, std::begin(kPictographic), std::end(kPictographic));
}

bool is_regional_indicator(char32_t cp) { return cp >= 0x1F1E6 && cp <= 0x1F1FF; }

bool is_word_char(char32_t cp) {
  if (cp < 0x80)
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
           (cp >= U'0' && cp <= U'9') || cp == U'_';
  if (is_space(cp) || is_extended_pictographic(cp) || is_regional_indicator(cp)) return false;
  if (cp >= 0x80 && cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;  // Latin-1 symbols
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, arrows, math, shapes
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;  // fullwidth punctuation
  if (cp == kZwj || is_variation_selector(cp) || cp == kKeycap || is_tag(cp)) return false;
  return true;
}

std::size_t emoji_sequence_end(const std::vector<Unit>& units, std::size_t i) {
  const std::size_t n = units.size();
  auto cp = [&](std::size_t k) -> char32_t {
    return k < n && units[k].valid ? units[k].codepoint : 0xFFFFFFFF;
  };
  const char32_t base = cp(i);
  if (is_regional_indicator(base)) return is_regional_indicator(cp(i + 1)) ? i + 2 : i + 1;
  if (is_keycap_base(base)) {
    std::size_t k = i + 1;
    if (is_variation_selector(cp(k))) ++k;
    return cp(k) == kKeycap ? k + 1 : i;
  }
  if (!is_extended_pictographic(base)) return i;
  std::size_t k = i + 1;
  while (k < n) {
    const char32_t c = cp(k);
    if (is_variation_selector(c) || is_emoji_modifier(c) || is_tag(c) || c == kKeycap) {
      ++k;
    } else if (c == kZwj && is_extended_pictographic(cp(k + 1))) {
      k += 2;
    } else {
      break;
    }
  }
  return k;
}

}  // namespace geolm::utf8
