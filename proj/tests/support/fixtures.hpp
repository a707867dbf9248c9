#ifndef GEOLM_TESTS_FIXTURES_HPP_
#define GEOLM_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "geolm/corpus.hpp"
#include "geolm/neural.hpp"
#include "geolm/sampler.hpp"

namespace geolm::testing {

inline corpus::Post make_post(std::string id, std::vector<std::string> tokens,
                              std::set<std::string> tags) {
  return corpus::Post{std::move(id), std::move(tokens), std::move(tags)};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("geolm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small network used by gradient and invariance tests.
inline nn::ModelConfig tiny_config(nn::Variant variant, std::size_t classes = 22,
                                   std::size_t places = 5) {
  nn::ModelConfig c;
  c.variant = variant;
  c.embed_dim = 8;
  c.hidden = 6;
  c.layers = 2;
  c.dense_units = 10;
  c.output_classes = classes;
  c.place_input_dim = variant == nn::Variant::baseline ? 0 : places;
  c.place_dense_units = variant == nn::Variant::setup3 ? 4 : 0;
  c.embeddings_frozen = false;
  return c;
}

/// Random network parameters; every array drawn from N(0, scale).
template <typename T>
nn::NetworkParams<T> random_params(const nn::ModelConfig& config, std::uint64_t seed,
                                   double scale = 0.5) {
  auto p = nn::NetworkParams<T>::zeros(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  p.for_each([&](const std::string&, nn::Matrix<T>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  });
  return p;
}

/// Random examples with targets outside pad and a random multi-hot place.
inline std::vector<TrainingExample> random_examples(std::size_t n, std::size_t classes,
                                                    std::size_t places, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<ClassId> any(0, static_cast<ClassId>(classes - 1));
  std::uniform_int_distribution<ClassId> word(0, static_cast<ClassId>(classes - 2));
  std::bernoulli_distribution bit(0.4);
  std::vector<TrainingExample> out(n);
  for (TrainingExample& ex : out) {
    for (ClassId& c : ex.context) c = any(rng);
    ex.place.resize(places);
    for (auto& b : ex.place) b = bit(rng) ? 1 : 0;
    ex.target = word(rng);
  }
  return out;
}

}  // namespace geolm::testing

#endif  // GEOLM_TESTS_FIXTURES_HPP_
