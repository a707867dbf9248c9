#ifndef GEOLM_NEURAL_HPP_
#define GEOLM_NEURAL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geolm/divergence.hpp"
#include "geolm/embeddings.hpp"
#include "geolm/sampler.hpp"
#include "geolm/vocab.hpp"

namespace geolm::nn {

/// baseline: words only. setup1: full multi-hot place vector concatenated
/// with the recurrent features. setup2: same over the frequent types only.
/// setup3: frequent types through a small tanh dense layer first.
enum class Variant { baseline, setup1, setup2, setup3 };

std::string_view to_string(Variant v);
/// Throws ValidationError for unknown names.
Variant variant_from_string(std::string_view name);
/// Catalog slice a variant's place vector is built from.
PlaceScope place_scope(Variant v);

struct ModelConfig {
  Variant variant = Variant::baseline;
  std::size_t embed_dim = 100;
  std::size_t hidden = 256;  // cells per direction
  std::size_t layers = 2;
  std::size_t dense_units = 256;
  std::size_t place_input_dim = 0;
  std::size_t place_dense_units = 0;  // setup3 only
  std::size_t output_classes = 1002;
  bool embeddings_frozen = true;

  /// The published sizes: 1000 words, 94 location types in total, 62
  /// frequent ones, a 16-unit place layer for setup3.
  static ModelConfig published(Variant variant, std::size_t top_k = 1000,
                           std::size_t all_types = 94, std::size_t frequent_types = 62);

  /// Throws ValidationError when the variant and the place sizes disagree.
  void validate() const;
  bool has_place_input() const { return variant != Variant::baseline; }
  /// Width of the place features entering the concatenation.
  std::size_t place_feature_dim() const;
  std::size_t concat_dim() const { return 2 * hidden + place_feature_dim(); }

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Gate rows are stacked i, f, g, o (input, forget, candidate, output).
template <typename T>
struct LstmDirection {
  Matrix<T> w_input;      // 4H x input
  Matrix<T> w_recurrent;  // 4H x H
  Matrix<T> bias;         // 4H x 1
};

enum Direction : std::size_t { kForward = 0, kBackward = 1 };

template <typename T>
struct NetworkParams {
  ModelConfig config;
  Matrix<T> embedding;  // classes x embed_dim, row per class id
  std::vector<std::array<LstmDirection<T>, 2>> lstm;
  Matrix<T> place_weight;  // setup3: units x place_input_dim
  Matrix<T> place_bias;
  Matrix<T> dense_weight;  // dense_units x concat_dim
  Matrix<T> dense_bias;
  Matrix<T> output_weight;  // classes x dense_units
  Matrix<T> output_bias;
  /// 1 for embedding rows that never receive gradient.
  std::vector<std::uint8_t> frozen_rows;

  /// Every array allocated to its configured shape and zero-filled.
  static NetworkParams zeros(const ModelConfig& config);

  /// Visits (name, array) in checkpoint order. Arrays that a variant does
  /// not use are skipped.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;

  template <typename U>
  NetworkParams<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f(std::string("embedding"), self.embedding);
    for (std::size_t l = 0; l < self.lstm.size(); ++l) {
      for (std::size_t d = 0; d < 2; ++d) {
        const std::string prefix =
            "lstm." + std::to_string(l) + (d == kForward ? ".forward." : ".backward.");
        f(prefix + "w_input", self.lstm[l][d].w_input);
        f(prefix + "w_recurrent", self.lstm[l][d].w_recurrent);
        f(prefix + "bias", self.lstm[l][d].bias);
      }
    }
    if (self.config.variant == Variant::setup3) {
      f(std::string("place_dense.weight"), self.place_weight);
      f(std::string("place_dense.bias"), self.place_bias);
    }
    f(std::string("dense.weight"), self.dense_weight);
    f(std::string("dense.bias"), self.dense_bias);
    f(std::string("output.weight"), self.output_weight);
    f(std::string("output.bias"), self.output_bias);
  }
};

/// Class probabilities, one row per example. Throws ValidationError if a
/// place vector has the wrong width (the baseline ignores place vectors).
template <typename T>
Matrix<T> forward(const NetworkParams<T>& params, std::span<const TrainingExample> batch);

template <typename T>
struct LossAndGradients {
  T loss = 0;  // mean cross-entropy
  NetworkParams<T> gradients;
};

/// Exact reverse-mode gradients of the mean cross-entropy. Frozen embedding
/// rows get zero gradient. Work is split into fixed chunks summed in chunk
/// order, so the result does not depend on `threads`. Throws NumericalError
/// (index = example within the batch) on a non-finite loss.
template <typename T>
LossAndGradients<T> loss_and_gradients(const NetworkParams<T>& params,
                                       std::span<const TrainingExample> batch,
                                       std::size_t threads = 1);

/// Ranked classes for one example, pad excluded, ties by ascending id.
template <typename T>
std::vector<ClassId> predict_topk(const NetworkParams<T>& params, const TrainingExample& example,
                                  std::size_t k_best);

/// Same ranking from a precomputed probability row.
std::vector<ClassId> rank_classes(std::span<const float> probs, ClassId pad_id,
                                  std::size_t k_best);

inline constexpr double kNoTableEmbeddingStd = 0.1;

/// Builds a network for `config`:
///  - embedding rows come from `table` where the word has a vector (frozen
///    when config.embeddings_frozen); other rows, unk and pad are drawn from
///    N(0, table per-dimension std), or N(0, 0.1) without a table;
///  - with `pretrained`, every array outside the place branch is copied from
///    it, and the place branch is drawn from a normal with the mean and
///    variance of the pretrained dense weights;
///  - otherwise weights are U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
///    forget-gate biases 1.
/// Throws ValidationError when `pretrained` or `table` do not fit.
NetworkParams<float> init_params(const ModelConfig& config, const EmbeddingTable* table,
                                 const Vocabulary& vocab, const NetworkParams<float>* pretrained,
                                 std::uint64_t seed);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double val_top5 = 0.0;
};

struct TrainResult {
  NetworkParams<float> params;  // last epoch that finished with finite loss
  std::vector<EpochMetrics> log;
  bool diverged = false;
  std::string message;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch Adam. Each epoch reshuffles the training set with a seed
/// derived from train_cfg.seed and the epoch number, then records the mean
/// training loss and validation top-1/top-5 accuracy.
TrainResult train(NetworkParams<float> params, const TrainConfig& train_cfg,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set,
                  const EpochCallback& on_epoch = {});

/// Zero-based rank of each example's target (pad excluded, ties by id).
std::vector<std::size_t> target_ranks(const NetworkParams<float>& params,
                                      std::span<const TrainingExample> examples,
                                      std::size_t batch_size = 256);

/// Top-1 and top-5 accuracy of `params` on `examples`.
std::pair<double, double> evaluate_top1_top5(const NetworkParams<float>& params,
                                             std::span<const TrainingExample> examples,
                                             std::size_t batch_size = 256);

}  // namespace geolm::nn

#endif  // GEOLM_NEURAL_HPP_
