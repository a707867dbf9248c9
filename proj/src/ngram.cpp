#include "geolm/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "geolm/error.hpp"
#include "numfmt.hpp"

namespace geolm {

NGramModel NGramModel::train(std::span<const TrainingExample> examples, std::size_t num_classes,
                             double k) {
  if (examples.empty()) throw ValidationError("n-gram training needs at least one example");
  if (!(k >= 0.0)) throw ValidationError("smoothing constant must be nonnegative");
  if (num_classes < 2) throw ValidationError("n-gram model needs at least one non-pad class");
  NGramModel model;
  model.vocab_size_ = num_classes - 1;
  model.pad_id_ = static_cast<ClassId>(num_classes - 1);
  model.k_ = k;
  for (const TrainingExample& ex : examples) {
    if (ex.target >= model.pad_id_)
      throw ValidationError("training target " + std::to_string(ex.target) +
                            " is pad or out of range");
    Row& row = model.counts_[ex.context];
    ++row.targets[ex.target];
    ++row.total;
  }
  return model;
}

std::uint64_t NGramModel::count(const History& history, ClassId target) const {
  auto it = counts_.find(history);
  if (it == counts_.end()) return 0;
  auto jt = it->second.targets.find(target);
  return jt == it->second.targets.end() ? 0 : jt->second;
}

std::uint64_t NGramModel::total(const History& history) const {
  auto it = counts_.find(history);
  return it == counts_.end() ? 0 : it->second.total;
}

double NGramModel::prob(const History& history, ClassId target) const {
  if (target >= pad_id_) throw ValidationError("cannot score the pad class or an unknown id");
  const auto V = static_cast<double>(vocab_size_);
  auto it = counts_.find(history);
  if (it == counts_.end()) {
    if (k_ == 0.0) throw NumericalError("unseen history with k = 0 has no distribution");
    return 1.0 / V;
  }
  const Row& row = it->second;
  auto jt = row.targets.find(target);
  const double c = jt == row.targets.end() ? 0.0 : static_cast<double>(jt->second);
  return (c + k_) / (static_cast<double>(row.total) + k_ * V);
}

std::vector<ClassId> NGramModel::predict_topk(const History& history, std::size_t k_best) const {
  if (k_best == 0) throw ValidationError("k_best must be at least 1");
  std::vector<ClassId> ids(vocab_size_);
  std::iota(ids.begin(), ids.end(), ClassId{0});
  const std::size_t keep = std::min(k_best, ids.size());

  auto it = counts_.find(history);
  if (it == counts_.end()) {
    if (k_ == 0.0) throw NumericalError("unseen history with k = 0 has no distribution");
    ids.resize(keep);
    return ids;
  }
  // Probability is monotone in the count, so ranking by count is exact.
  const auto& targets = it->second.targets;
  auto count_of = [&](ClassId id) {
    auto jt = targets.find(id);
    return jt == targets.end() ? std::uint64_t{0} : jt->second;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(keep), ids.end(),
                    [&](ClassId a, ClassId b) {
                      const auto ca = count_of(a), cb = count_of(b);
                      return ca != cb ? ca > cb : a < b;
                    });
  ids.resize(keep);
  return ids;
}

NGramModel::LogProb NGramModel::sequence_logprob(std::span<const ClassId> tokens) const {
  if (tokens.empty()) throw ValidationError("sequence_logprob needs at least one token");
  if (k_ <= 0.0) throw ValidationError("sequence_logprob requires k > 0");
  LogProb result;
  History history;
  history.fill(pad_id_);
  for (ClassId token : tokens) {
    const double p = prob(history, token);
    if (p <= 0.0) {
      result.value = -std::numeric_limits<double>::infinity();
      result.zero_probability = true;
      return result;
    }
    result.value += std::log(p);
    std::shift_left(history.begin(), history.end(), 1);
    history.back() = token;
  }
  return result;
}

void NGramModel::save(std::ostream& out) const {
  out << "# geolm-ngram v1 window=" << kWindow << " vocab=" << vocab_size_
      << " k=" << format_number(k_) << '\n';
  for (const auto& [history, row] : counts_) {
    for (const auto& [target, c] : row.targets) {
      for (ClassId h : history) out << h << ' ';
      out << target << ' ' << c << '\n';
    }
  }
  if (!out) throw InputError("failed writing n-gram model");
}

NGramModel NGramModel::load(std::istream& in) {
  if (!in) throw InputError("n-gram stream is not readable");
  std::string header;
  if (!std::getline(in, header) || header.rfind("# geolm-ngram v1", 0) != 0)
    throw InputError("not a geolm n-gram dump");
  NGramModel model;
  auto field = [&](const std::string& key) {
    const auto pos = header.find(key + "=");
    if (pos == std::string::npos) throw InputError("n-gram header lacks " + key);
    return header.substr(pos + key.size() + 1, header.find(' ', pos) - pos - key.size() - 1);
  };
  std::size_t window = 0;
  try {
    window = std::stoul(field("window"));
    model.vocab_size_ = std::stoul(field("vocab"));
    model.k_ = std::stod(field("k"));
  } catch (const std::logic_error&) {
    throw InputError("malformed n-gram header: " + header);
  }
  if (window != kWindow) throw ValidationError("n-gram window mismatch");
  model.pad_id_ = static_cast<ClassId>(model.vocab_size_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    History h;
    ClassId target;
    std::uint64_t c;
    for (ClassId& id : h) row >> id;
    row >> target >> c;
    if (!row || c == 0 || target >= model.pad_id_) throw InputError("bad n-gram row: " + line);
    Row& r = model.counts_[h];
    r.targets[target] += c;
    r.total += c;
  }
  return model;
}

}  // namespace geolm
