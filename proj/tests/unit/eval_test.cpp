#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "geolm/error.hpp"
#include "geolm/eval.hpp"

namespace geolm::eval {
namespace {

TrainingExample with_target(ClassId t) {
  TrainingExample ex;
  ex.target = t;
  return ex;
}

TEST(TopK, FixedRankerHandCounts) {
  const Ranker ranker = [](const TrainingExample&, std::size_t k) {
    std::vector<ClassId> r{3, 1, 4, 0, 2};
    r.resize(std::min(k, r.size()));
    return r;
  };
  const std::vector<TrainingExample> ex{with_target(3), with_target(1), with_target(2),
                                        with_target(9)};
  EXPECT_DOUBLE_EQ(topk_accuracy(ranker, ex, 1), 0.25);
  EXPECT_DOUBLE_EQ(topk_accuracy(ranker, ex, 2), 0.5);
  EXPECT_DOUBLE_EQ(topk_accuracy(ranker, ex, 5), 0.75);
  EXPECT_DOUBLE_EQ(topk_accuracy(ranker, ex, 5, ClassId{9}), 1.0);
  EXPECT_THROW(topk_accuracy(ranker, ex, 0), ValidationError);
  EXPECT_THROW(topk_accuracy(ranker, {}, 1), ValidationError);
}

TEST(TopK, MonotoneInKAndCalibratedForUniformRanker) {
  const std::size_t V = 20;
  std::mt19937_64 data_rng(1);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 4000; ++i) ex.push_back(with_target(static_cast<ClassId>(data_rng() % V)));
  std::mt19937_64 rank_rng(2);
  const Ranker uniform = [&](const TrainingExample&, std::size_t k) {
    std::vector<ClassId> ids(V);
    std::iota(ids.begin(), ids.end(), ClassId{0});
    std::shuffle(ids.begin(), ids.end(), rank_rng);
    ids.resize(k);
    return ids;
  };
  double prev = 0;
  for (std::size_t k = 1; k <= V; ++k) {
    const double acc = topk_accuracy(uniform, ex, k);
    EXPECT_GE(acc, prev);
    const double p = static_cast<double>(k) / V;
    const double se = std::sqrt(p * (1 - p) / static_cast<double>(ex.size()));
    EXPECT_NEAR(acc, p, 3 * se + 1e-12) << "k=" << k;
    prev = acc;
  }
}

TEST(Summarize, RanksAndPerLocation) {
  const std::vector<std::size_t> ranks{0, 3, 7, 0};
  const std::vector<std::set<std::string>> tags{{"a"}, {"a", "b"}, {"b"}, {}};
  const EvalResult r = summarize("setup1", ranks, &tags);
  EXPECT_DOUBLE_EQ(r.top1, 0.5);
  EXPECT_DOUBLE_EQ(r.top5, 0.75);
  EXPECT_EQ(r.n, 4u);
  EXPECT_DOUBLE_EQ(r.per_location.at("a").top1, 0.5);
  EXPECT_DOUBLE_EQ(r.per_location.at("a").top5, 1.0);
  EXPECT_DOUBLE_EQ(r.per_location.at("b").top5, 0.5);
  const std::vector<std::set<std::string>> short_tags{{"a"}};
  EXPECT_THROW(summarize("x", ranks, &short_tags), ValidationError);
}

TEST(Compare, BaselineFirstAndOrderIndependent) {
  std::vector<EvalResult> results{{"setup2", 0.30, 0.50, 10, {}},
                                  {"baseline", 0.25, 0.55, 10, {}},
                                  {"setup1", 0.27, 0.56, 10, {}}};
  const auto rows = compare_variants(results);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].variant, "baseline");
  EXPECT_EQ(rows[1].variant, "setup1");
  EXPECT_NEAR(rows[2].delta_top1_pp, 5.0, 1e-9);
  EXPECT_NEAR(rows[2].delta_top5_pp, -5.0, 1e-9);
  EXPECT_EQ(rows[0].delta_top1_pp, 0.0);

  std::reverse(results.begin(), results.end());
  std::ostringstream a, b;
  write_comparison_csv(a, rows);
  write_comparison_csv(b, compare_variants(results));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "variant,top1,top5,n,delta_top1_pp,delta_top5_pp");

  results.push_back({"baseline", 0.1, 0.2, 3, {}});
  EXPECT_THROW(compare_variants(results), ValidationError);
  EXPECT_THROW(compare_variants(std::vector<EvalResult>{{"setup1", 0, 0, 1, {}}}),
               ValidationError);
}

TEST(MetricLog, RoundTripAndMerge) {
  const std::vector<nn::EpochMetrics> epochs{{1, 2.5, 0.1, 0.3}, {2, 2.25, 0.125, 0.375}};
  std::stringstream buf;
  write_metric_log(buf, epochs, "config_hash=x seed=1");
  EXPECT_EQ(buf.str().substr(0, 2), "# ");
  const MetricLog back = read_metric_log(buf, "baseline");
  ASSERT_EQ(back.epochs.size(), 2u);
  EXPECT_EQ(back.epochs[1].train_loss, 2.25);
  EXPECT_EQ(back.epochs[1].val_top5, 0.375);

  const std::vector<MetricLog> logs{back, {"setup1", {{1, 3.0, 0.2, 0.4}}}};
  std::ostringstream merged;
  const auto warnings = convergence_log_merge(logs, merged);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("setup1"), std::string::npos);
  std::istringstream lines(merged.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "epoch,variant,metric,value");
  std::getline(lines, line);
  EXPECT_EQ(line, "1,baseline,train_loss,2.5");
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 8u);  // 9 data rows in total
}

TEST(MetricLog, RejectsMalformedRows) {
  std::istringstream in("epoch,train_loss,val_top1,val_top5\n1,abc,0,0\n");
  EXPECT_THROW(read_metric_log(in, "x"), InputError);
}

}  // namespace
}  // namespace geolm::eval
