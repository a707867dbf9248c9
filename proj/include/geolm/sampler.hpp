#ifndef GEOLM_SAMPLER_HPP_
#define GEOLM_SAMPLER_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "geolm/corpus.hpp"
#include "geolm/divergence.hpp"
#include "geolm/vocab.hpp"

namespace geolm {

inline constexpr std::size_t kWindow = 4;

struct TrainingExample {
  std::array<ClassId, kWindow> context{};  // oldest first, left-padded
  std::vector<std::uint8_t> place;         // multi-hot over the catalog scope
  ClassId target = 0;

  bool operator==(const TrainingExample&) const = default;
};

/// One example per token position t >= 1: the previous four tokens
/// (pad-filled on the left) predict token t.
std::vector<TrainingExample> window_examples(const corpus::Post& post, const Vocabulary& vocab,
                                             const LocationCatalog& catalog, PlaceScope scope);

std::vector<TrainingExample> window_corpus(std::span<const corpus::Post> posts,
                                           const Vocabulary& vocab,
                                           const LocationCatalog& catalog, PlaceScope scope);

inline constexpr std::uint64_t kOversampleCap = 3;

struct ResampleTarget {
  std::uint64_t original = 0;
  std::uint64_t target = 0;
};

struct ResamplePlan {
  std::map<ClassId, ResampleTarget> classes;
  double mu = 0.0;
  double sigma = 0.0;               // population standard deviation
  std::uint64_t undersample_cap = 0;  // ceil(mu + sigma)
  std::uint64_t oversample_cap = kOversampleCap;

  /// CSV: class,original,target (plus an optional label column when a
  /// vocabulary is supplied).
  void write_csv(std::ostream& out, const Vocabulary* vocab = nullptr) const;
};

/// Classes above ceil(mu + sigma) are cut down to it. With `oversample`,
/// classes below mu are raised to min(ceil(mu), 3 x original). mu and sigma
/// are taken over classes with nonzero count. Throws ValidationError if every
/// count is zero.
ResamplePlan compute_plan(const std::map<ClassId, std::uint64_t>& class_counts,
                          bool oversample = true);

std::map<ClassId, std::uint64_t> target_counts(std::span<const TrainingExample> examples);

/// Draws plan.target examples per class (without replacement when shrinking,
/// duplicating with replacement when growing, never beyond 3 x original) and
/// shuffles the result. Throws ValidationError if the plan's original counts
/// disagree with `examples`.
std::vector<TrainingExample> resample(std::span<const TrainingExample> examples,
                                      const ResamplePlan& plan, std::uint64_t seed);

inline constexpr double kDefaultHoldout = 0.10;

/// Deterministic partition into (train, validation); each side keeps input
/// order. The validation side gets round(fraction * n) examples, at least one
/// and never all of them.
std::pair<std::vector<TrainingExample>, std::vector<TrainingExample>> split_dataset(
    std::span<const TrainingExample> examples, double holdout_fraction, std::uint64_t seed);

/// Index form of split_dataset, so callers can keep side tables aligned.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t count, double holdout_fraction, std::uint64_t seed);

}  // namespace geolm

#endif  // GEOLM_SAMPLER_HPP_
