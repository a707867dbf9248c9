#ifndef GEOLM_CORPUS_HPP_
#define GEOLM_CORPUS_HPP_

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geolm::corpus {

/// How specific the place attached to a post is. Only poi and neighborhood
/// survive filtering; the coarser levels are too broad to say anything about
/// where the user actually is.
enum class Granularity { poi, neighborhood, city, admin, country, unknown };

std::string_view to_string(Granularity g);
/// Unrecognized names map to Granularity::unknown.
Granularity granularity_from_string(std::string_view name);

struct RawPost {
  std::string id;
  std::string text;
  std::string lang;
  std::optional<std::string> place_name;
  Granularity place_granularity = Granularity::unknown;
  std::optional<double> latitude;
  std::optional<double> longitude;
};

/// A tokenized post with its resolved location-type tags.
struct Post {
  std::string id;
  std::vector<std::string> tokens;
  std::set<std::string> place_types;

  bool operator==(const Post&) const = default;
};

struct PlaceResolution {
  std::string query_name;
  bool matched = false;
  std::set<std::string> types;
};

struct ParseResult {
  std::vector<RawPost> posts;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Reads the JSONL corpus format. Malformed lines (bad JSON, missing keys,
/// out-of-range coordinates, duplicate ids) are skipped and counted.
/// Throws InputError if the stream itself is unreadable.
ParseResult parse_corpus(std::istream& in);

/// Keeps English posts that carry a poi- or neighborhood-level place name.
std::vector<RawPost> filter_posts(std::span<const RawPost> posts);

/// Lowercased word tokens. Hashtags and handles stay whole, every emoji
/// sequence and every other symbol is its own token, URLs become "<url>".
std::vector<std::string> tokenize(std::string_view text);

inline constexpr std::string_view kUrlToken = "<url>";

class PlaceTypeResolver {
 public:
  virtual ~PlaceTypeResolver() = default;
  /// Throws RetryableError on transient lookup failures.
  virtual PlaceResolution resolve(const std::string& name, double latitude,
                                  double longitude) const = 0;
};

/// Lookup table loaded from a JSON object of place name -> type list.
/// Matching is by case-insensitive exact name; coordinates are ignored.
class FixtureResolver : public PlaceTypeResolver {
 public:
  FixtureResolver() = default;
  explicit FixtureResolver(std::map<std::string, std::set<std::string>> table);

  static FixtureResolver load(std::istream& in);

  PlaceResolution resolve(const std::string& name, double latitude,
                          double longitude) const override;

  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::string, std::set<std::string>> table_;
};

PlaceResolution resolve_place(const std::string& name, double latitude,
                              double longitude,
                              const PlaceTypeResolver& resolver);

struct BuildStats {
  std::size_t unmatched_place = 0;
  std::size_t too_short = 0;
};

inline constexpr std::size_t kMinTokens = 2;

/// Tokenizes and tags already-filtered posts, dropping unresolvable places
/// and posts shorter than kMinTokens. Resolver errors propagate.
std::vector<Post> build_posts(std::span<const RawPost> raw,
                              const PlaceTypeResolver& resolver,
                              BuildStats* stats = nullptr);

/// Enriched corpus: one JSON object per line with id, tokens, place_types.
/// read_posts skips lines starting with '#'.
void write_posts(std::ostream& out, std::span<const Post> posts);
std::vector<Post> read_posts(std::istream& in);

std::string lowercase(std::string_view text);

}  // namespace geolm::corpus

#endif  // GEOLM_CORPUS_HPP_
