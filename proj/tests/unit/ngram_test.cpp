#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "geolm/error.hpp"
#include "geolm/ngram.hpp"

namespace geolm {
namespace {

constexpr std::size_t kClasses = 6;  // ids 0..4 are words, 5 is pad
constexpr ClassId kPad = 5;

TrainingExample ex(History h, ClassId target) {
  TrainingExample e;
  e.context = h;
  e.target = target;
  return e;
}

const History kH1{kPad, kPad, 0, 1};
const History kH2{1, 2, 3, 4};

std::vector<TrainingExample> toy() {
  return {ex(kH1, 2), ex(kH1, 2), ex(kH1, 3), ex(kH2, 0)};
}

TEST(NGram, CountsAndSmoothedProbabilities) {
  const NGramModel m = NGramModel::train(toy(), kClasses, 0.5);
  EXPECT_EQ(m.vocab_size(), 5u);
  EXPECT_EQ(m.count(kH1, 2), 2u);
  EXPECT_EQ(m.total(kH1), 3u);
  // (2 + 0.5) / (3 + 0.5 * 5)
  EXPECT_DOUBLE_EQ(m.prob(kH1, 2), 2.5 / 5.5);
  EXPECT_DOUBLE_EQ(m.prob(kH1, 4), 0.5 / 5.5);
  EXPECT_DOUBLE_EQ(m.prob(History{4, 4, 4, 4}, 1), 0.2);
  EXPECT_THROW(m.prob(kH1, kPad), ValidationError);
}

TEST(NGram, DistributionsSumToOne) {
  std::mt19937_64 rng(4);
  std::vector<TrainingExample> data;
  for (int i = 0; i < 500; ++i) {
    History h;
    for (ClassId& c : h) c = static_cast<ClassId>(rng() % kClasses);
    data.push_back(ex(h, static_cast<ClassId>(rng() % (kClasses - 1))));
  }
  for (double k : {1e-3, 0.1, 1.0, 7.0}) {
    const NGramModel m = NGramModel::train(data, kClasses, k);
    for (const auto& e : data) {
      double sum = 0;
      for (ClassId t = 0; t < kPad; ++t) sum += m.prob(e.context, t);
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(NGram, ZeroSmoothingIsMaximumLikelihood) {
  const NGramModel m = NGramModel::train(toy(), kClasses, 0.0);
  EXPECT_DOUBLE_EQ(m.prob(kH1, 2), 2.0 / 3.0);
  EXPECT_EQ(m.prob(kH1, 4), 0.0);
  EXPECT_THROW(m.prob(History{4, 4, 4, 4}, 1), NumericalError);
  EXPECT_THROW(m.sequence_logprob(std::vector<ClassId>{0}), ValidationError);
}

TEST(NGram, RejectsBadTraining) {
  EXPECT_THROW(NGramModel::train({}, kClasses), ValidationError);
  EXPECT_THROW(NGramModel::train(toy(), kClasses, -1.0), ValidationError);
  EXPECT_THROW(NGramModel::train(std::vector<TrainingExample>{ex(kH1, kPad)}, kClasses), ValidationError);
}

TEST(NGram, TopKRanksByCountThenId) {
  const NGramModel m = NGramModel::train(toy(), kClasses, 0.1);
  EXPECT_EQ(m.predict_topk(kH1, 3), (std::vector<ClassId>{2, 3, 0}));
  EXPECT_EQ(m.predict_topk(kH1, 100).size(), 5u);  // pad never appears
  EXPECT_EQ(m.predict_topk(History{0, 0, 0, 0}, 2), (std::vector<ClassId>{0, 1}));
  EXPECT_THROW(m.predict_topk(kH1, 0), ValidationError);
}

TEST(NGram, SequenceLogProbChainsHistories) {
  const NGramModel m = NGramModel::train(toy(), kClasses, 0.1);
  const std::vector<ClassId> seq{0, 1, 2};
  double expected = 0;
  expected += std::log(m.prob(History{kPad, kPad, kPad, kPad}, 0));
  expected += std::log(m.prob(History{kPad, kPad, kPad, 0}, 1));
  expected += std::log(m.prob(History{kPad, kPad, 0, 1}, 2));
  const auto lp = m.sequence_logprob(seq);
  EXPECT_FALSE(lp.zero_probability);
  EXPECT_DOUBLE_EQ(lp.value, expected);
}

TEST(NGram, SaveLoadRoundTrip) {
  const NGramModel m = NGramModel::train(toy(), kClasses, 0.25);
  std::stringstream buf;
  m.save(buf);
  const NGramModel back = NGramModel::load(buf);
  EXPECT_EQ(back.vocab_size(), m.vocab_size());
  EXPECT_EQ(back.smoothing(), 0.25);
  for (const History& h : {kH1, kH2})
    for (ClassId t = 0; t < kPad; ++t) EXPECT_EQ(back.prob(h, t), m.prob(h, t));

  std::istringstream bad("# geolm-ngram v1 window=x vocab=5 k=1\n");
  EXPECT_THROW(NGramModel::load(bad), InputError);
  std::istringstream other("hello\n");
  EXPECT_THROW(NGramModel::load(other), InputError);
}

}  // namespace
}  // namespace geolm
