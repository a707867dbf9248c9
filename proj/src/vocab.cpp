#include "geolm/vocab.hpp"

#include <algorithm>
#include <utility>

#include <json.hpp>

#include "geolm/error.hpp"

namespace geolm {

using nlohmann::json;

Vocabulary Vocabulary::from_counts(std::map<std::string, std::uint64_t> counts,
                                   std::size_t top_k) {
  if (top_k == 0) throw ValidationError("vocabulary size K must be at least 1");
  std::erase_if(counts, [](const auto& kv) { return kv.second == 0; });
  if (counts.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  // counts is a sorted map, so a stable sort on frequency leaves ties in
  // lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.top_k_ = std::min(top_k, ranked.size());
  for (std::size_t i = 0; i < v.top_k_; ++i) {
    v.word_to_class_.emplace(ranked[i].first, static_cast<ClassId>(i));
    v.class_to_word_.push_back(ranked[i].first);
  }
  v.class_to_word_.emplace_back(kUnkToken);
  v.class_to_word_.emplace_back(kPadToken);
  v.counts_ = std::move(counts);
  return v;
}

Vocabulary Vocabulary::build(std::span<const corpus::Post> posts, std::size_t top_k) {
  std::map<std::string, std::uint64_t> counts;
  for (const corpus::Post& post : posts)
    for (const std::string& token : post.tokens) ++counts[token];
  return from_counts(std::move(counts), top_k);
}

ClassId Vocabulary::encode(std::string_view token) const {
  auto it = word_to_class_.find(std::string(token));
  return it == word_to_class_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::decode(ClassId id) const {
  if (id >= class_to_word_.size())
    throw ValidationError("class id " + std::to_string(id) + " outside vocabulary");
  return class_to_word_[id];
}

bool Vocabulary::contains(std::string_view token) const {
  return word_to_class_.contains(std::string(token));
}

void Vocabulary::save(std::ostream& out) const {
  json doc;
  doc["format"] = "geolm-vocabulary";
  doc["version"] = 1;
  doc["k"] = top_k_;
  doc["classes"] = std::vector<std::string>(class_to_word_.begin(),
                                            class_to_word_.begin() + static_cast<long>(top_k_));
  doc["counts"] = counts_;
  out << doc.dump(1, ' ', false, json::error_handler_t::replace) << '\n';
  if (!out) throw InputError("failed writing vocabulary");
}

Vocabulary Vocabulary::load(std::istream& in) {
  if (!in) throw InputError("vocabulary stream is not readable");
  try {
    const json doc = json::parse(in);
    Vocabulary v;
    v.top_k_ = doc.at("k").get<std::size_t>();
    v.class_to_word_ = doc.at("classes").get<std::vector<std::string>>();
    v.counts_ = doc.at("counts").get<std::map<std::string, std::uint64_t>>();
    if (v.top_k_ == 0 || v.class_to_word_.size() != v.top_k_)
      throw ValidationError("vocabulary class list does not match k");
    for (std::size_t i = 0; i < v.top_k_; ++i)
      if (!v.word_to_class_.emplace(v.class_to_word_[i], static_cast<ClassId>(i)).second)
        throw ValidationError("duplicate vocabulary entry '" + v.class_to_word_[i] + "'");
    v.class_to_word_.emplace_back(kUnkToken);
    v.class_to_word_.emplace_back(kPadToken);
    return v;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed vocabulary file: ") + e.what());
  }
}

double coverage(const Vocabulary& vocab, std::span<const corpus::Post> posts) {
  std::uint64_t total = 0;
  std::uint64_t covered = 0;
  for (const corpus::Post& post : posts) {
    for (const std::string& token : post.tokens) {
      ++total;
      if (vocab.encode(token) < vocab.top_k()) ++covered;
    }
  }
  if (total == 0) throw ValidationError("coverage of an empty corpus is undefined");
  return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace geolm
