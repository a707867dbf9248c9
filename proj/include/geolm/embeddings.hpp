#ifndef GEOLM_EMBEDDINGS_HPP_
#define GEOLM_EMBEDDINGS_HPP_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "geolm/corpus.hpp"

namespace geolm {

enum class OovPolicy {
  skip,  // words without a vector are re-drawn
  zero,  // words without a vector count as the zero vector
};

inline constexpr std::size_t kDefaultEmbeddingDim = 100;

class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, OovPolicy policy = OovPolicy::skip);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  OovPolicy oov_policy() const { return policy_; }
  void set_oov_policy(OovPolicy policy) { policy_ = policy; }

  /// Throws ValidationError if the length differs from dim().
  void insert(std::string token, std::vector<float> vector);
  /// nullptr when the token has no vector.
  const std::vector<float>* find(const std::string& token) const;

  /// Per-dimension population standard deviation over all stored vectors.
  std::vector<double> per_dimension_std() const;

 private:
  std::size_t dim_;
  OovPolicy policy_;
  std::unordered_map<std::string, std::vector<float>> vectors_;
  std::vector<std::string> order_;  // insertion order, for deterministic scans
};

struct EmbeddingLoad {
  EmbeddingTable table;
  std::size_t skipped = 0;
};

/// GloVe text format: token followed by `dim` numbers per line. Lines with
/// the wrong arity or unparsable numbers are skipped and counted; no valid
/// line at all is an InputError.
EmbeddingLoad load_embeddings(std::istream& in, std::size_t dim);

inline constexpr std::size_t kDispersionSample = 200;
inline constexpr std::size_t kDispersionSupportFactor = 5;

struct DispersionReport {
  enum class Status { ok, insufficient_support };

  std::string location;
  Status status = Status::ok;
  std::size_t sample_size = kDispersionSample;
  std::uint64_t support = 0;
  double avg_std = 0.0;
  double random_baseline_std = 0.0;
};

/// Mean over dimensions of the per-dimension population std of `vectors`.
double mean_dimension_std(std::span<const std::vector<float>> vectors, std::size_t dim);

/// Samples `sample_size` word instances from the location's posts (with
/// replacement, proportional to support), and reports the dispersion of
/// their vectors next to the whole-corpus baseline drawn with the same seed.
/// Locations with fewer than 5 x sample_size tokens report
/// insufficient_support.
DispersionReport location_dispersion(std::span<const corpus::Post> posts,
                                     const std::string& location, const EmbeddingTable& table,
                                     std::size_t sample_size, std::uint64_t seed);

/// The same statistic sampled from the whole corpus.
double random_dispersion(std::span<const corpus::Post> posts, const EmbeddingTable& table,
                         std::size_t sample_size, std::uint64_t seed);

/// CSV: location,support,sample_size,avg_std,random_baseline_std.
void write_dispersion_csv(std::ostream& out, std::span<const DispersionReport> reports);

}  // namespace geolm

#endif  // GEOLM_EMBEDDINGS_HPP_
