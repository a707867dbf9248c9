// UTF-8 decoding and the character classes the tokenizer needs.
#ifndef GEOLM_SRC_UTF8_HPP_
#define GEOLM_SRC_UTF8_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace geolm::utf8 {

struct Unit {
  char32_t codepoint = 0;
  std::string_view bytes;  // raw bytes of this unit in the source text
  std::size_t offset = 0;  // byte offset in the source text
  bool valid = true;       // false for a stray byte that is not valid UTF-8
};

class Decoder {
 public:
  explicit Decoder(std::string_view text) : text_(text) {}
  bool done() const { return pos_ >= text_.size(); }
  Unit next();

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::vector<Unit> decode_all(std::string_view text);
void append(std::string& out, char32_t cp);

char32_t to_lower(char32_t cp);
bool is_space(char32_t cp);
bool is_extended_pictographic(char32_t cp);
bool is_regional_indicator(char32_t cp);
bool is_word_char(char32_t cp);

/// If an emoji sequence (ZWJ chains, modifiers, flags, keycaps) starts at
/// units[i], returns one past its last unit; otherwise returns i.
std::size_t emoji_sequence_end(const std::vector<Unit>& units, std::size_t i);

}  // namespace geolm::utf8

#endif  // GEOLM_SRC_UTF8_HPP_
