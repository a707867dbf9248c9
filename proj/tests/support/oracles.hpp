#ifndef GEOLM_TESTS_ORACLES_HPP_
#define GEOLM_TESTS_ORACLES_HPP_

// Reference computations written independently of the library, used as
// ground truth by unit and acceptance tests.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "geolm/corpus.hpp"

namespace geolm::oracle {

/// Mean over words with at least `min_support` local occurrences of
/// (O - E)^2 / E, where E = N_loc * count(w) / N. Sets *qualifying.
inline double chi_square(const std::vector<corpus::Post>& posts, const std::string& loc,
                         std::uint64_t min_support, std::size_t* qualifying) {
  std::map<std::string, double> global, local;
  double n = 0, n_loc = 0;
  for (const auto& p : posts)
    for (const auto& t : p.tokens) {
      global[t] += 1;
      n += 1;
      if (p.place_types.count(loc)) {
        local[t] += 1;
        n_loc += 1;
      }
    }
  double sum = 0;
  std::size_t q = 0;
  for (const auto& [w, o] : local) {
    if (o < static_cast<double>(min_support)) continue;
    const double p = global[w] / n;
    const double e = n_loc * p;
    sum += (o - e) * (o - e) / e;
    ++q;
  }
  if (qualifying) *qualifying = q;
  return q ? sum / static_cast<double>(q) : 0.0;
}

/// Population mean and standard deviation of the nonzero counts.
inline std::pair<double, double> mean_and_sigma(const std::map<std::uint32_t, std::uint64_t>& counts) {
  std::vector<double> xs;
  for (const auto& [k, v] : counts)
    if (v) xs.push_back(static_cast<double>(v));
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

/// Exact expectation of the mean per-dimension population std of `n`
/// vectors drawn with replacement, word i having probability weights[i] /
/// sum(weights). Enumerates every multiset of draws with its multinomial
/// probability.
inline double expected_dispersion(const std::vector<std::vector<double>>& vectors,
                                  const std::vector<double>& weights, int n) {
  const std::size_t m = vectors.size();
  const std::size_t dim = vectors.front().size();
  double wsum = 0;
  for (double w : weights) wsum += w;
  std::vector<double> logp(m);
  for (std::size_t i = 0; i < m; ++i) logp[i] = std::log(weights[i] / wsum);

  std::vector<int> c(m, 0);
  double expectation = 0;
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i + 1 == m) {
      c[i] = left;
      double logprob = std::lgamma(n + 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        logprob -= std::lgamma(c[j] + 1.0);
        if (c[j]) logprob += c[j] * logp[j];
      }
      double stat = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0;
        for (std::size_t j = 0; j < m; ++j) mean += c[j] * vectors[j][d];
        mean /= n;
        double var = 0;
        for (std::size_t j = 0; j < m; ++j) var += c[j] * (vectors[j][d] - mean) * (vectors[j][d] - mean);
        stat += std::sqrt(var / n);
      }
      expectation += std::exp(logprob) * stat / static_cast<double>(dim);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      c[i] = k;
      rec(i + 1, left - k);
    }
  };
  rec(0, n);
  return expectation;
}

}  // namespace geolm::oracle

#endif  // GEOLM_TESTS_ORACLES_HPP_
