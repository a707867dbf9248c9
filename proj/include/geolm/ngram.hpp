#ifndef GEOLM_NGRAM_HPP_
#define GEOLM_NGRAM_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "geolm/sampler.hpp"
#include "geolm/vocab.hpp"

namespace geolm {

using History = std::array<ClassId, kWindow>;

inline constexpr double kDefaultAddK = 0.1;

/// Count-based next-word model over the same 4-token windows the network
/// sees, with add-k smoothing. Location tags are ignored.
class NGramModel {
 public:
  /// `num_classes` is the full class count including pad; V excludes pad.
  /// Throws ValidationError on empty input or k < 0.
  static NGramModel train(std::span<const TrainingExample> examples, std::size_t num_classes,
                          double k = kDefaultAddK);

  /// (count(h,t) + k) / (total(h) + k V). An unseen history is uniform
  /// when k > 0 and a NumericalError when k = 0.
  double prob(const History& history, ClassId target) const;

  /// Classes by descending probability, ties by ascending id; pad excluded.
  std::vector<ClassId> predict_topk(const History& history, std::size_t k_best) const;

  struct LogProb {
    double value = 0.0;      // -inf when a zero probability was hit
    bool zero_probability = false;
  };
  /// Sum of log prob over positions, each conditioned on the left-padded
  /// history of the preceding tokens. Requires k > 0.
  LogProb sequence_logprob(std::span<const ClassId> tokens) const;

  std::uint64_t count(const History& history, ClassId target) const;
  std::uint64_t total(const History& history) const;

  std::size_t vocab_size() const { return vocab_size_; }
  ClassId pad_id() const { return pad_id_; }
  double smoothing() const { return k_; }
  std::size_t num_histories() const { return counts_.size(); }

  /// Text dump: header line, then "h0 h1 h2 h3 target count" sorted.
  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

 private:
  struct Row {
    std::map<ClassId, std::uint64_t> targets;
    std::uint64_t total = 0;
  };

  std::map<History, Row> counts_;
  std::size_t vocab_size_ = 0;
  ClassId pad_id_ = 0;
  double k_ = kDefaultAddK;
};

}  // namespace geolm

#endif  // GEOLM_NGRAM_HPP_
