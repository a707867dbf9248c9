#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "geolm/embeddings.hpp"
#include "geolm/error.hpp"
#include "oracles.hpp"

namespace geolm {
namespace {

using testing::make_post;

TEST(LoadEmbeddings, SkipsBadLinesAndCountsThem) {
  std::istringstream in(
      "cat 0.1 0.2 0.3\n"
      "dog 1 2\n"            // wrong arity
      "eel 1 x 3\n"          // not a number
      "fox 1e0 -2.5 3\r\n"   // windows line ending
      "gnu 1 2 inf\n");
  const EmbeddingLoad r = load_embeddings(in, 3);
  EXPECT_EQ(r.table.size(), 2u);
  EXPECT_EQ(r.skipped, 3u);
  ASSERT_NE(r.table.find("fox"), nullptr);
  EXPECT_FLOAT_EQ((*r.table.find("fox"))[1], -2.5f);
  EXPECT_EQ(r.table.find("dog"), nullptr);
}

TEST(LoadEmbeddings, NoValidLineIsInputError) {
  std::istringstream in("a 1\nb 2\n");
  EXPECT_THROW(load_embeddings(in, 3), InputError);
}

TEST(EmbeddingTable, InsertValidatesLengthAndReportsStd) {
  EmbeddingTable t(2);
  EXPECT_THROW(t.insert("x", {1.0f}), ValidationError);
  t.insert("a", {0.0f, 1.0f});
  t.insert("b", {2.0f, 1.0f});
  const auto sd = t.per_dimension_std();
  EXPECT_DOUBLE_EQ(sd[0], 1.0);
  EXPECT_DOUBLE_EQ(sd[1], 0.0);
}

TEST(MeanDimensionStd, HandComputed) {
  const std::vector<std::vector<float>> v{{0, 0}, {2, 4}};
  EXPECT_DOUBLE_EQ(mean_dimension_std(v, 2), (1.0 + 2.0) / 2.0);
  const std::vector<std::vector<float>> same(7, {0.1f, -3.3f, 1e-7f});
  EXPECT_EQ(mean_dimension_std(same, 3), 0.0);
}

TEST(Dispersion, IdenticalVectorsGiveExactlyZero) {
  EmbeddingTable t(3);
  for (const char* w : {"a", "b", "c"}) t.insert(w, {0.3f, 0.7f, -1.1f});
  std::vector<corpus::Post> posts;
  for (int i = 0; i < 30; ++i) posts.push_back(make_post(std::to_string(i), {"a", "b", "c"}, {"x"}));
  EXPECT_EQ(random_dispersion(posts, t, 20, 4), 0.0);
  const DispersionReport r = location_dispersion(posts, "x", t, 10, 4);
  EXPECT_EQ(r.status, DispersionReport::Status::ok);
  EXPECT_EQ(r.avg_std, 0.0);
}

TEST(Dispersion, MatchesExhaustiveExpectation) {
  // 3 words with frequencies 1:2:3; sample size 8 is small enough to enumerate.
  const std::vector<std::vector<double>> vecs{{0.0, 1.0}, {1.0, -1.0}, {3.0, 0.5}};
  EmbeddingTable t(2);
  t.insert("a", {0.0f, 1.0f});
  t.insert("b", {1.0f, -1.0f});
  t.insert("c", {3.0f, 0.5f});
  const std::vector<corpus::Post> posts{make_post("1", {"a", "b", "b", "c", "c", "c"}, {"x"})};
  const double exact = oracle::expected_dispersion(vecs, {1, 2, 3}, 6);

  const int trials = 4000;
  double sum = 0, sq = 0;
  for (int s = 0; s < trials; ++s) {
    const double d = random_dispersion(posts, t, 6, static_cast<std::uint64_t>(s));
    sum += d;
    sq += d * d;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sq / trials - mean * mean) / trials);
  EXPECT_NEAR(mean, exact, 4 * se);
}

TEST(Dispersion, OovPolicies) {
  EmbeddingTable t(1, OovPolicy::skip);
  t.insert("a", {1.0f});
  t.insert("b", {3.0f});
  std::vector<corpus::Post> posts;
  for (int i = 0; i < 10; ++i) posts.push_back(make_post(std::to_string(i), {"a", "b", "zz"}, {"x"}));
  // skipping never sees the unknown word, so every draw is 1 or 3
  for (int s = 0; s < 20; ++s) EXPECT_LE(random_dispersion(posts, t, 10, s), 1.0);
  t.set_oov_policy(OovPolicy::zero);
  double total = 0;
  for (int s = 0; s < 50; ++s) total += random_dispersion(posts, t, 10, s);
  EXPECT_GT(total / 50, 0.9);

  EmbeddingTable empty_hits(1);
  empty_hits.insert("q", {1.0f});
  EXPECT_THROW(random_dispersion(posts, empty_hits, 10, 1), ValidationError);
}

TEST(Dispersion, InsufficientSupport) {
  EmbeddingTable t(1);
  t.insert("a", {1.0f});
  const std::vector<corpus::Post> posts{make_post("1", {"a", "a", "a"}, {"x"})};
  const DispersionReport r = location_dispersion(posts, "x", t, 1, 0);
  EXPECT_EQ(r.status, DispersionReport::Status::insufficient_support);
  EXPECT_EQ(r.support, 3u);
  EXPECT_THROW(random_dispersion(posts, t, 4, 0), ValidationError);

  std::ostringstream csv;
  write_dispersion_csv(csv, std::vector<DispersionReport>{r});
  EXPECT_EQ(csv.str(), "location,support,sample_size,avg_std,random_baseline_std\n");
}

TEST(Dispersion, SameSeedSameValue) {
  EmbeddingTable t(2);
  t.insert("a", {0.0f, 1.0f});
  t.insert("b", {1.0f, 0.0f});
  std::vector<corpus::Post> posts;
  for (int i = 0; i < 20; ++i) posts.push_back(make_post(std::to_string(i), {"a", "b", "a"}, {"x"}));
  EXPECT_EQ(random_dispersion(posts, t, 15, 8), random_dispersion(posts, t, 15, 8));
}

}  // namespace
}  // namespace geolm
