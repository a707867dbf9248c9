#include "geolm/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "geolm/error.hpp"
#include "numfmt.hpp"
#include "random.hpp"

namespace geolm {

std::vector<TrainingExample> window_examples(const corpus::Post& post, const Vocabulary& vocab,
                                             const LocationCatalog& catalog, PlaceScope scope) {
  std::vector<TrainingExample> out;
  if (post.tokens.size() < 2) return out;
  std::vector<ClassId> ids;
  ids.reserve(post.tokens.size());
  for (const std::string& token : post.tokens) ids.push_back(vocab.encode(token));
  const std::vector<std::uint8_t> place = catalog.place_vector(post.place_types, scope);

  for (std::size_t t = 1; t < ids.size(); ++t) {
    TrainingExample ex;
    for (std::size_t k = 0; k < kWindow; ++k) {
      // context[kWindow-1] is token t-1, context[0] is token t-kWindow.
      const std::size_t back = kWindow - k;
      ex.context[k] = t >= back ? ids[t - back] : vocab.pad_id();
    }
    ex.place = place;
    ex.target = ids[t];
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainingExample> window_corpus(std::span<const corpus::Post> posts,
                                           const Vocabulary& vocab,
                                           const LocationCatalog& catalog, PlaceScope scope) {
  std::vector<TrainingExample> out;
  for (const corpus::Post& post : posts) {
    std::vector<TrainingExample> part = window_examples(post, vocab, catalog, scope);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

ResamplePlan compute_plan(const std::map<ClassId, std::uint64_t>& class_counts, bool oversample) {
  std::vector<double> support;
  for (const auto& [cls, count] : class_counts)
    if (count > 0) support.push_back(static_cast<double>(count));
  if (support.empty()) throw ValidationError("resample plan needs at least one nonzero class");

  ResamplePlan plan;
  double sum = 0.0;
  for (double s : support) sum += s;
  plan.mu = sum / static_cast<double>(support.size());
  double sq = 0.0;
  for (double s : support) sq += (s - plan.mu) * (s - plan.mu);
  plan.sigma = std::sqrt(sq / static_cast<double>(support.size()));
  plan.undersample_cap = static_cast<std::uint64_t>(std::ceil(plan.mu + plan.sigma));
  const auto mean_target = static_cast<std::uint64_t>(std::ceil(plan.mu));

  for (const auto& [cls, count] : class_counts) {
    std::uint64_t target = count;
    if (count > plan.undersample_cap) {
      target = plan.undersample_cap;
    } else if (oversample && count > 0 && static_cast<double>(count) < plan.mu) {
      target = std::min(mean_target, kOversampleCap * count);
    }
    plan.classes.emplace(cls, ResampleTarget{count, target});
  }
  return plan;
}

void ResamplePlan::write_csv(std::ostream& out, const Vocabulary* vocab) const {
  out << (vocab ? "class,word,original,target\n" : "class,original,target\n");
  for (const auto& [cls, t] : classes) {
    out << cls << ',';
    if (vocab) {
      out << csv_field(vocab->decode(cls)) << ',';
    }
    out << t.original << ',' << t.target << '\n';
  }
}

std::map<ClassId, std::uint64_t> target_counts(std::span<const TrainingExample> examples) {
  std::map<ClassId, std::uint64_t> counts;
  for (const TrainingExample& ex : examples) ++counts[ex.target];
  return counts;
}

std::vector<TrainingExample> resample(std::span<const TrainingExample> examples,
                                      const ResamplePlan& plan, std::uint64_t seed) {
  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) by_class[examples[i].target].push_back(i);

  for (const auto& [cls, members] : by_class) {
    auto it = plan.classes.find(cls);
    if (it == plan.classes.end() || it->second.original != members.size())
      throw ValidationError("resample plan does not match the examples for class " +
                            std::to_string(cls));
  }
  for (const auto& [cls, t] : plan.classes)
    if (t.original > 0 && !by_class.contains(cls))
      throw ValidationError("resample plan names class " + std::to_string(cls) +
                            " which has no examples");

  rnd::Engine rng(seed);
  std::vector<TrainingExample> out;
  for (auto& [cls, members] : by_class) {
    const std::uint64_t original = members.size();
    const std::uint64_t target = std::min(plan.classes.at(cls).target, kOversampleCap * original);
    if (target <= original) {
      // Partial Fisher-Yates: the first `target` slots become a uniform
      // sample without replacement.
      for (std::uint64_t i = 0; i < target; ++i) {
        const std::uint64_t j = i + rnd::index(rng, original - i);
        std::swap(members[i], members[j]);
      }
      std::sort(members.begin(), members.begin() + static_cast<long>(target));
      for (std::uint64_t i = 0; i < target; ++i) out.push_back(examples[members[i]]);
    } else {
      for (std::size_t idx : members) out.push_back(examples[idx]);
      // Extra copies drawn with replacement; only the class total is capped.
      for (std::uint64_t i = original; i < target; ++i)
        out.push_back(examples[members[rnd::index(rng, original)]]);
    }
  }
  rnd::shuffle(out, rng);
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t count, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ValidationError("holdout fraction must lie strictly between 0 and 1");
  if (count < 2) throw ValidationError("need at least two examples to split");
  auto holdout = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(count)));
  holdout = std::clamp<std::size_t>(holdout, 1, count - 1);

  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  rnd::Engine rng(seed);
  rnd::shuffle(order, rng);
  std::vector<std::size_t> validation(order.begin(), order.begin() + static_cast<long>(holdout));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(holdout), order.end());
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
  return {std::move(train), std::move(validation)};
}

std::pair<std::vector<TrainingExample>, std::vector<TrainingExample>> split_dataset(
    std::span<const TrainingExample> examples, double holdout_fraction, std::uint64_t seed) {
  auto [train_idx, val_idx] = split_indices(examples.size(), holdout_fraction, seed);
  std::vector<TrainingExample> train, validation;
  train.reserve(train_idx.size());
  validation.reserve(val_idx.size());
  for (std::size_t i : train_idx) train.push_back(examples[i]);
  for (std::size_t i : val_idx) validation.push_back(examples[i]);
  return {std::move(train), std::move(validation)};
}

}  // namespace geolm
