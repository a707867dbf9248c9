#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "geolm/error.hpp"
#include "geolm/neural.hpp"

namespace geolm::nn {

void PrintTo(Variant v, std::ostream* os) { *os << to_string(v); }

namespace {

using testing::random_examples;
using testing::random_params;
using testing::tiny_config;

constexpr Variant kVariants[] = {Variant::baseline, Variant::setup1, Variant::setup2,
                                 Variant::setup3};

class PerVariant : public ::testing::TestWithParam<Variant> {};

INSTANTIATE_TEST_SUITE_P(All, PerVariant, ::testing::ValuesIn(kVariants),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Variant, NamesRoundTrip) {
  for (Variant v : kVariants) EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("setup9"), ValidationError);
  EXPECT_EQ(place_scope(Variant::setup1), PlaceScope::all);
  EXPECT_EQ(place_scope(Variant::setup2), PlaceScope::frequent);
  EXPECT_EQ(place_scope(Variant::setup3), PlaceScope::frequent);
}

TEST(ModelConfig, PublishedSizes) {
  const ModelConfig b = ModelConfig::published(Variant::baseline);
  EXPECT_EQ(b.output_classes, 1002u);
  EXPECT_EQ(b.concat_dim(), 512u);
  EXPECT_EQ(ModelConfig::published(Variant::setup1).concat_dim(), 512u + 94u);
  EXPECT_EQ(ModelConfig::published(Variant::setup2).concat_dim(), 512u + 62u);
  EXPECT_EQ(ModelConfig::published(Variant::setup3).concat_dim(), 512u + 16u);
}

TEST(ModelConfig, ValidateRejectsInconsistentSizes) {
  ModelConfig c = tiny_config(Variant::setup1);
  c.place_input_dim = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config(Variant::setup3);
  c.place_dense_units = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = tiny_config(Variant::baseline);
  c.output_classes = 1;
  EXPECT_THROW(c.validate(), ValidationError);
}

// Relative error as |a - n| / max(|a|, |n|, 1e-6).
double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

TEST_P(PerVariant, GradientsMatchFiniteDifferences) {
  const ModelConfig config = tiny_config(GetParam(), 12, 5);
  NetworkParams<double> params = random_params<double>(config, 21);
  const auto batch = random_examples(4, 12, 5, 22);
  const LossAndGradients<double> lg = loss_and_gradients(params, batch);

  // Visit arrays in parallel: analytic gradient array k against params array k.
  std::vector<Matrix<double>*> values;
  params.for_each([&](const std::string&, Matrix<double>& m) { values.push_back(&m); });
  std::vector<const Matrix<double>*> grads;
  lg.gradients.for_each([&](const std::string&, const Matrix<double>& m) { grads.push_back(&m); });
  std::vector<std::string> names;
  params.for_each([&](const std::string& n, const Matrix<double>&) { names.push_back(n); });
  ASSERT_EQ(values.size(), grads.size());

  const double eps = 1e-4;
  double worst = 0;
  for (std::size_t a = 0; a < values.size(); ++a) {
    Matrix<double>& m = *values[a];
    // every 3rd entry keeps the unit test quick; the acceptance run covers all
    for (Eigen::Index i = 0; i < m.size(); i += 3) {
      const double saved = m.data()[i];
      m.data()[i] = saved + eps;
      const double up = loss_and_gradients(params, batch).loss;
      m.data()[i] = saved - eps;
      const double down = loss_and_gradients(params, batch).loss;
      m.data()[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double err = rel_error(grads[a]->data()[i], numeric);
      worst = std::max(worst, err);
      EXPECT_LT(err, 1e-4) << names[a] << "[" << i << "]";
    }
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST_P(PerVariant, SoftmaxRowsSumToOne) {
  const ModelConfig config = tiny_config(GetParam(), 30, 7);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto params = random_params<float>(config, s, 2.0);
    const auto batch = random_examples(8, 30, 7, 100 + s);
    const Matrix<float> probs = forward(params, batch);
    ASSERT_EQ(probs.rows(), 8);
    ASSERT_EQ(probs.cols(), 30);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      EXPECT_NEAR(probs.row(r).cast<double>().sum(), 1.0, 1e-6);
      EXPECT_GE(probs.row(r).minCoeff(), 0.0f);
    }
  }
}

TEST(Forward, BaselineIgnoresPlace) {
  const ModelConfig config = tiny_config(Variant::baseline, 20, 0);
  const auto params = random_params<float>(config, 5);
  auto batch = random_examples(6, 20, 9, 6);
  const Matrix<float> reference = forward(params, batch);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    for (auto& ex : batch) {
      ex.place.resize(rng() % 12);
      for (auto& b : ex.place) b = rng() % 2;
    }
    const Matrix<float> again = forward(params, batch);
    EXPECT_TRUE((again.array() == reference.array()).all());
  }
}

TEST(Forward, PlaceMattersForConditionedVariants) {
  const ModelConfig config = tiny_config(Variant::setup1, 20, 4);
  const auto params = random_params<float>(config, 5);
  auto batch = random_examples(1, 20, 4, 6);
  batch[0].place = {0, 0, 0, 0};
  const Matrix<float> a = forward(params, batch);
  batch[0].place = {1, 0, 0, 1};
  const Matrix<float> b = forward(params, batch);
  EXPECT_FALSE((a.array() == b.array()).all());
  batch[0].place = {1, 0};
  EXPECT_THROW(forward(params, batch), ValidationError);
}

TEST(Gradients, IndependentOfThreadCount) {
  const ModelConfig config = tiny_config(Variant::setup3, 15, 5);
  const auto params = random_params<float>(config, 8);
  const auto batch = random_examples(100, 15, 5, 9);
  const auto one = loss_and_gradients(params, batch, 1);
  const auto four = loss_and_gradients(params, batch, 4);
  EXPECT_EQ(one.loss, four.loss);
  std::vector<const Matrix<float>*> g1, g4;
  one.gradients.for_each([&](const std::string&, const Matrix<float>& m) { g1.push_back(&m); });
  four.gradients.for_each([&](const std::string&, const Matrix<float>& m) { g4.push_back(&m); });
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_TRUE((g1[i]->array() == g4[i]->array()).all());
}

TEST(Gradients, FrozenRowsGetNone) {
  const ModelConfig config = tiny_config(Variant::baseline, 10, 0);
  auto params = random_params<float>(config, 8);
  params.frozen_rows[2] = 1;
  auto batch = random_examples(20, 10, 0, 4);
  for (auto& ex : batch) ex.context = {2, 2, 3, 2};
  const auto lg = loss_and_gradients(params, batch);
  EXPECT_TRUE((lg.gradients.embedding.row(2).array() == 0.0f).all());
  EXPECT_FALSE((lg.gradients.embedding.row(3).array() == 0.0f).all());
}

TEST(Gradients, RejectPadTargets) {
  const ModelConfig config = tiny_config(Variant::baseline, 10, 0);
  const auto params = random_params<float>(config, 1);
  auto batch = random_examples(2, 10, 0, 4);
  batch[1].target = 9;
  EXPECT_THROW(loss_and_gradients(params, batch), ValidationError);
}

TEST(Params, CastAndCount) {
  const ModelConfig config = tiny_config(Variant::setup3, 10, 3);
  const auto p = random_params<float>(config, 2);
  const auto back = p.cast<double>().cast<float>();
  std::vector<const Matrix<float>*> a, b;
  p.for_each([&](const std::string&, const Matrix<float>& m) { a.push_back(&m); });
  back.for_each([&](const std::string&, const Matrix<float>& m) { b.push_back(&m); });
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE((a[i]->array() == b[i]->array()).all());
    total += static_cast<std::size_t>(a[i]->size());
  }
  EXPECT_EQ(p.parameter_count(), total);
}

TEST(Predict, TopKExcludesPadAndValidatesK) {
  const ModelConfig config = tiny_config(Variant::baseline, 8, 0);
  const auto params = random_params<float>(config, 3);
  const auto ex = random_examples(1, 8, 0, 1)[0];
  const auto all = predict_topk(params, ex, 7);
  EXPECT_EQ(all.size(), 7u);
  for (ClassId c : all) EXPECT_NE(c, 7u);
  const Matrix<float> probs = forward(params, std::span(&ex, 1));
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(probs(0, all[i - 1]), probs(0, all[i]));
  EXPECT_EQ(predict_topk(params, ex, 1)[0], all[0]);
  EXPECT_THROW(predict_topk(params, ex, 0), ValidationError);
  EXPECT_THROW(predict_topk(params, ex, 8), ValidationError);
}

TEST(RankClasses, TiesBreakById) {
  const std::vector<float> probs{0.2f, 0.3f, 0.3f, 0.2f, 0.0f};
  EXPECT_EQ(rank_classes(probs, 4, 4), (std::vector<ClassId>{1, 2, 0, 3}));
}

Vocabulary toy_vocab(std::size_t words) {
  std::map<std::string, std::uint64_t> counts;
  for (std::size_t i = 0; i < words; ++i) counts["w" + std::to_string(i)] = 100 - i;
  return Vocabulary::from_counts(counts, words);
}

TEST(Init, CopiesAndFreezesTableRows) {
  const Vocabulary vocab = toy_vocab(6);
  ModelConfig config = tiny_config(Variant::baseline, vocab.num_classes(), 0);
  config.embeddings_frozen = true;
  EmbeddingTable table(config.embed_dim);
  std::vector<float> v(config.embed_dim, 0.25f);
  table.insert("w1", v);
  v[0] = -1.0f;
  table.insert("w4", v);
  const auto p = init_params(config, &table, vocab, nullptr, 3);
  EXPECT_EQ(p.frozen_rows[vocab.encode("w1")], 1);
  EXPECT_EQ(p.frozen_rows[vocab.encode("w0")], 0);
  EXPECT_FLOAT_EQ(p.embedding(vocab.encode("w4"), 0), -1.0f);
  EXPECT_FLOAT_EQ(p.embedding(vocab.encode("w1"), 3), 0.25f);
  // forget-gate bias starts at one
  EXPECT_TRUE((p.lstm[0][0].bias.middleRows(config.hidden, config.hidden).array() == 1.0f).all());
  EXPECT_TRUE((p.lstm[0][0].bias.topRows(config.hidden).array() == 0.0f).all());

  EmbeddingTable wrong(3);
  wrong.insert("w0", {1, 2, 3});
  EXPECT_THROW(init_params(config, &wrong, vocab, nullptr, 3), ValidationError);
}

TEST(Init, PretrainedSharesEverythingOutsidePlaceBranch) {
  const Vocabulary vocab = toy_vocab(8);
  const ModelConfig base_cfg = tiny_config(Variant::baseline, vocab.num_classes(), 0);
  const auto base = init_params(base_cfg, nullptr, vocab, nullptr, 1);
  const ModelConfig s3_cfg = tiny_config(Variant::setup3, vocab.num_classes(), 5);
  const auto s3 = init_params(s3_cfg, nullptr, vocab, &base, 2);
  EXPECT_TRUE((s3.embedding.array() == base.embedding.array()).all());
  EXPECT_TRUE((s3.lstm[1][1].w_recurrent.array() == base.lstm[1][1].w_recurrent.array()).all());
  EXPECT_TRUE((s3.output_weight.array() == base.output_weight.array()).all());
  const auto H2 = static_cast<Eigen::Index>(2 * base_cfg.hidden);
  EXPECT_TRUE((s3.dense_weight.leftCols(H2).array() == base.dense_weight.array()).all());
  EXPECT_FALSE((s3.dense_weight.rightCols(4).array() == 0.0f).all());

  ModelConfig other = s3_cfg;
  other.hidden = 7;
  EXPECT_THROW(init_params(other, nullptr, vocab, &base, 2), ValidationError);
}

TEST(Train, DeterministicAndLossFalls) {
  const Vocabulary vocab = toy_vocab(10);
  const ModelConfig config = tiny_config(Variant::setup2, vocab.num_classes(), 3);
  auto data = random_examples(120, vocab.num_classes(), 3, 7);
  for (auto& ex : data) ex.target = ex.place[0] ? 1 : 2;  // learnable from place
  const auto init = init_params(config, nullptr, vocab, nullptr, 5);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 16;
  tc.learning_rate = 0.02;
  tc.seed = 9;
  const TrainResult a = train(init, tc, data, data);
  const TrainResult b = train(init, tc, data, data);
  ASSERT_EQ(a.log.size(), 15u);
  EXPECT_FALSE(a.diverged);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    EXPECT_EQ(a.log[i].val_top1, b.log[i].val_top1);
  }
  EXPECT_LT(a.log.back().train_loss, a.log.front().train_loss);
  EXPECT_EQ(a.log.back().val_top1, 1.0);
  EXPECT_EQ(evaluate_top1_top5(a.params, data).first, 1.0);
}

TEST(Train, DivergenceKeepsLastFiniteParams) {
  const Vocabulary vocab = toy_vocab(10);
  const ModelConfig config = tiny_config(Variant::baseline, vocab.num_classes(), 0);
  const auto data = random_examples(64, vocab.num_classes(), 0, 7);
  const auto init = init_params(config, nullptr, vocab, nullptr, 5);
  TrainConfig tc;
  tc.epochs = 5;
  tc.learning_rate = std::numeric_limits<double>::infinity();
  tc.seed = 1;
  const TrainResult r = train(init, tc, data, data);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.message.empty());
  r.params.for_each([](const std::string& name, const Matrix<float>& m) {
    EXPECT_TRUE(m.allFinite()) << name;
  });
}

}  // namespace
}  // namespace geolm::nn
