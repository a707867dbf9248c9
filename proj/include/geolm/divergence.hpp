#ifndef GEOLM_DIVERGENCE_HPP_
#define GEOLM_DIVERGENCE_HPP_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "geolm/corpus.hpp"

namespace geolm {

/// Which slice of the catalog a place vector is indexed by: every observed
/// type, or only the frequent subset.
enum class PlaceScope { all, frequent };

/// Dense index over every location type in a corpus.
class LocationCatalog {
 public:
  /// frequent_subset = types carried by at least `frequent_threshold` posts,
  /// by post support descending then name.
  static LocationCatalog build(std::span<const corpus::Post> posts,
                               std::uint64_t frequent_threshold);

  std::size_t size() const { return types_.size(); }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<std::string>& frequent_subset() const { return frequent_; }
  std::uint64_t frequent_threshold() const { return threshold_; }

  std::optional<std::size_t> index_of(const std::string& tag) const;
  std::uint64_t post_support(const std::string& tag) const;
  std::uint64_t token_support(const std::string& tag) const;

  std::size_t width(PlaceScope scope) const;
  /// Multi-hot encoding of `tags`; tags outside the scope are ignored.
  std::vector<std::uint8_t> place_vector(const std::set<std::string>& tags,
                                         PlaceScope scope) const;
  /// Position of `tag` inside the scope's vector, if it has one.
  std::optional<std::size_t> scope_index(const std::string& tag, PlaceScope scope) const;

  void save(std::ostream& out) const;
  static LocationCatalog load(std::istream& in);

 private:
  std::vector<std::string> types_;  // lexicographic; index = position
  std::vector<std::string> frequent_;
  std::map<std::string, std::uint64_t> post_support_;
  std::map<std::string, std::uint64_t> token_support_;
  std::uint64_t threshold_ = 0;
};

inline constexpr std::uint64_t kChiSquareMinSupport = 5;

/// Per-location divergence of the word distribution from the corpus-wide
/// unigram distribution: mean Pearson contribution
/// (o_w - N_L p(w))^2 / (N_L p(w)) over words with o_w >= min_support.
struct ChiSquareReport {
  std::string location;
  bool dropped = false;  // no word reached min_support
  double score = 0.0;
  std::size_t qualifying_words = 0;
  std::uint64_t location_tokens = 0;
  std::map<std::string, double> contributions;
};

ChiSquareReport chi_square_location(std::span<const corpus::Post> posts,
                                    const std::string& location,
                                    std::uint64_t min_support = kChiSquareMinSupport);

/// Top words by contribution, ties lexicographic. Throws ValidationError on a
/// dropped report.
std::vector<std::string> significant_words(const ChiSquareReport& report, std::size_t top_n);

struct ChiSquareSummary {
  std::map<std::string, ChiSquareReport> reports;  // every frequent tag, dropped included
  std::size_t considered = 0;                      // non-dropped locations
  double mean_score = 0.0;
  std::size_t above_one = 0;
};

ChiSquareSummary chi_square_all(std::span<const corpus::Post> posts,
                                const LocationCatalog& catalog,
                                std::uint64_t min_support = kChiSquareMinSupport);

/// CSV: location,score,qualifying_words,significant_words (top_n, space
/// separated), highest score first. Dropped locations are omitted.
void write_chi_square_csv(std::ostream& out, const ChiSquareSummary& summary,
                          std::size_t top_n = 10);
/// CSV: location,rank,word,contribution.
void write_significant_words_csv(std::ostream& out, const ChiSquareSummary& summary,
                                 std::size_t top_n = 10);

}  // namespace geolm

#endif  // GEOLM_DIVERGENCE_HPP_
