#ifndef GEOLM_VOCAB_HPP_
#define GEOLM_VOCAB_HPP_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geolm/corpus.hpp"

namespace geolm {

using ClassId = std::uint32_t;

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kPadToken = "<pad>";

/// Output class space: the K most frequent words get ids 0..K-1 in
/// non-increasing frequency order (ties lexicographic), then <unk> = K and
/// <pad> = K+1.
class Vocabulary {
 public:
  /// Counts every token and keeps the top `top_k`. If the corpus has fewer
  /// distinct tokens than `top_k`, K shrinks to the distinct count.
  /// Throws ValidationError on top_k == 0 or an empty corpus.
  static Vocabulary build(std::span<const corpus::Post> posts, std::size_t top_k);

  /// Builds from explicit counts; used by build() and by tests.
  static Vocabulary from_counts(std::map<std::string, std::uint64_t> counts, std::size_t top_k);

  ClassId encode(std::string_view token) const;
  const std::string& decode(ClassId id) const;
  bool contains(std::string_view token) const;

  std::size_t top_k() const { return top_k_; }
  std::size_t num_classes() const { return class_to_word_.size(); }
  ClassId unk_id() const { return static_cast<ClassId>(top_k_); }
  ClassId pad_id() const { return static_cast<ClassId>(top_k_ + 1); }
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
  const std::vector<std::string>& classes() const { return class_to_word_; }

  /// JSON with the ordered class list, counts and K.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

 private:
  std::size_t top_k_ = 0;
  std::vector<std::string> class_to_word_;
  std::unordered_map<std::string, ClassId> word_to_class_;
  std::map<std::string, std::uint64_t> counts_;
};

/// Fraction of token instances that map to an in-vocabulary class.
/// Throws ValidationError on an empty corpus.
double coverage(const Vocabulary& vocab, std::span<const corpus::Post> posts);

}  // namespace geolm

#endif  // GEOLM_VOCAB_HPP_
