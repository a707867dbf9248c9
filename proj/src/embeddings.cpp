#include "geolm/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <utility>

#include "geolm/error.hpp"
#include "numfmt.hpp"
#include "random.hpp"

namespace geolm {

EmbeddingTable::EmbeddingTable(std::size_t dim, OovPolicy policy) : dim_(dim), policy_(policy) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingTable::insert(std::string token, std::vector<float> vector) {
  if (vector.size() != dim_)
    throw ValidationError("embedding for '" + token + "' has " + std::to_string(vector.size()) +
                          " components, expected " + std::to_string(dim_));
  auto [it, inserted] = vectors_.insert_or_assign(token, std::move(vector));
  if (inserted) order_.push_back(std::move(token));
}

const std::vector<float>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<double> EmbeddingTable::per_dimension_std() const {
  std::vector<double> mean(dim_, 0.0), var(dim_, 0.0);
  if (order_.empty()) return var;
  for (const std::string& token : order_) {
    const auto& v = vectors_.at(token);
    for (std::size_t d = 0; d < dim_; ++d) mean[d] += v[d];
  }
  for (double& m : mean) m /= static_cast<double>(order_.size());
  for (const std::string& token : order_) {
    const auto& v = vectors_.at(token);
    for (std::size_t d = 0; d < dim_; ++d) var[d] += (v[d] - mean[d]) * (v[d] - mean[d]);
  }
  for (double& x : var) x = std::sqrt(x / static_cast<double>(order_.size()));
  return var;
}

EmbeddingLoad load_embeddings(std::istream& in, std::size_t dim) {
  if (!in) throw InputError("embedding stream is not readable");
  EmbeddingLoad result{EmbeddingTable(dim), 0};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      if (end > pos) fields.emplace_back(line.data() + pos, end - pos);
      pos = end;
    }
    if (fields.size() != dim + 1) {
      ++result.skipped;
      continue;
    }
    std::vector<float> vec(dim);
    bool ok = true;
    for (std::size_t d = 0; d < dim && ok; ++d) {
      const std::string_view f = fields[d + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[d]);
      ok = ec == std::errc() && ptr == f.data() + f.size() && std::isfinite(vec[d]);
    }
    if (!ok) {
      ++result.skipped;
      continue;
    }
    result.table.insert(std::string(fields[0]), std::move(vec));
  }
  if (in.bad()) throw InputError("read failure while loading embeddings");
  if (result.table.size() == 0) throw InputError("embedding file has no valid lines");
  return result;
}

double mean_dimension_std(std::span<const std::vector<float>> vectors, std::size_t dim) {
  if (vectors.empty() || dim == 0) return 0.0;
  const auto n = static_cast<double>(vectors.size());
  double total = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    // Shifted by the first value: exact zero for identical vectors.
    const double shift = vectors.front()[d];
    double mean = 0.0;
    for (const auto& v : vectors) mean += v[d] - shift;
    mean /= n;
    double var = 0.0;
    for (const auto& v : vectors) {
      const double x = v[d] - shift - mean;
      var += x * x;
    }
    total += std::sqrt(var / n);
  }
  return total / static_cast<double>(dim);
}

namespace {

// Draws `sample_size` instances from `counts` (proportional to count) and
// returns the dispersion of their vectors. Under OovPolicy::skip, words
// without vectors are removed from the distribution, which is the same as
// re-drawing them.
double sample_dispersion(const std::map<std::string, std::uint64_t>& counts,
                         const EmbeddingTable& table, std::size_t sample_size,
                         std::uint64_t seed) {
  const std::vector<float> zero(table.dim(), 0.0f);
  std::vector<const std::vector<float>*> vectors;
  std::vector<std::uint64_t> weights;
  for (const auto& [word, count] : counts) {
    const std::vector<float>* v = table.find(word);
    if (!v) {
      if (table.oov_policy() == OovPolicy::skip) continue;
      v = &zero;
    }
    vectors.push_back(v);
    weights.push_back(count);
  }
  if (vectors.empty()) throw ValidationError("no sampled word has an embedding");

  rnd::Engine rng(seed);
  const rnd::WeightedIndex pick(weights);
  std::vector<std::vector<float>> sample;
  sample.reserve(sample_size);
  for (std::size_t i = 0; i < sample_size; ++i) sample.push_back(*vectors[pick(rng)]);
  return mean_dimension_std(sample, table.dim());
}

}  // namespace

double random_dispersion(std::span<const corpus::Post> posts, const EmbeddingTable& table,
                         std::size_t sample_size, std::uint64_t seed) {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const corpus::Post& post : posts)
    for (const std::string& token : post.tokens) {
      ++counts[token];
      ++total;
    }
  if (sample_size == 0 || total < sample_size)
    throw ValidationError("corpus has fewer tokens than the dispersion sample size");
  return sample_dispersion(counts, table, sample_size, seed);
}

DispersionReport location_dispersion(std::span<const corpus::Post> posts,
                                     const std::string& location, const EmbeddingTable& table,
                                     std::size_t sample_size, std::uint64_t seed) {
  DispersionReport report;
  report.location = location;
  report.sample_size = sample_size;
  std::map<std::string, std::uint64_t> counts;
  for (const corpus::Post& post : posts) {
    if (!post.place_types.contains(location)) continue;
    for (const std::string& token : post.tokens) {
      ++counts[token];
      ++report.support;
    }
  }
  if (sample_size == 0 || report.support < kDispersionSupportFactor * sample_size) {
    report.status = DispersionReport::Status::insufficient_support;
    return report;
  }
  report.avg_std = sample_dispersion(counts, table, sample_size, seed);
  report.random_baseline_std = random_dispersion(posts, table, sample_size, seed);
  return report;
}

void write_dispersion_csv(std::ostream& out, std::span<const DispersionReport> reports) {
  out << "location,support,sample_size,avg_std,random_baseline_std\n";
  for (const DispersionReport& r : reports) {
    if (r.status != DispersionReport::Status::ok) continue;
    out << csv_field(r.location) << ',' << r.support << ',' << r.sample_size << ','
        << format_number(r.avg_std) << ',' << format_number(r.random_baseline_std) << '\n';
  }
}

}  // namespace geolm
