#include "geolm/divergence.hpp"

#include <algorithm>
#include <utility>

#include <json.hpp>

#include "geolm/error.hpp"
#include "numfmt.hpp"

namespace geolm {

using nlohmann::json;

LocationCatalog LocationCatalog::build(std::span<const corpus::Post> posts,
                                       std::uint64_t frequent_threshold) {
  if (posts.empty()) throw ValidationError("cannot build a location catalog from no posts");
  LocationCatalog catalog;
  catalog.threshold_ = frequent_threshold;
  for (const corpus::Post& post : posts) {
    for (const std::string& tag : post.place_types) {
      ++catalog.post_support_[tag];
      catalog.token_support_[tag] += post.tokens.size();
    }
  }
  for (const auto& [tag, support] : catalog.post_support_) {
    catalog.types_.push_back(tag);
    if (support >= frequent_threshold) catalog.frequent_.push_back(tag);
  }
  std::stable_sort(catalog.frequent_.begin(), catalog.frequent_.end(),
                   [&](const std::string& a, const std::string& b) {
                     return catalog.post_support_.at(a) > catalog.post_support_.at(b);
                   });
  return catalog;
}

std::optional<std::size_t> LocationCatalog::index_of(const std::string& tag) const {
  auto it = std::lower_bound(types_.begin(), types_.end(), tag);
  if (it == types_.end() || *it != tag) return std::nullopt;
  return static_cast<std::size_t>(it - types_.begin());
}

std::uint64_t LocationCatalog::post_support(const std::string& tag) const {
  auto it = post_support_.find(tag);
  return it == post_support_.end() ? 0 : it->second;
}

std::uint64_t LocationCatalog::token_support(const std::string& tag) const {
  auto it = token_support_.find(tag);
  return it == token_support_.end() ? 0 : it->second;
}

std::size_t LocationCatalog::width(PlaceScope scope) const {
  return scope == PlaceScope::all ? types_.size() : frequent_.size();
}

std::optional<std::size_t> LocationCatalog::scope_index(const std::string& tag,
                                                        PlaceScope scope) const {
  if (scope == PlaceScope::all) return index_of(tag);
  auto it = std::find(frequent_.begin(), frequent_.end(), tag);
  if (it == frequent_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - frequent_.begin());
}

std::vector<std::uint8_t> LocationCatalog::place_vector(const std::set<std::string>& tags,
                                                        PlaceScope scope) const {
  std::vector<std::uint8_t> v(width(scope), 0);
  for (const std::string& tag : tags)
    if (auto idx = scope_index(tag, scope)) v[*idx] = 1;
  return v;
}

void LocationCatalog::save(std::ostream& out) const {
  json doc;
  doc["format"] = "geolm-catalog";
  doc["version"] = 1;
  doc["types"] = types_;
  doc["frequent_subset"] = frequent_;
  doc["frequent_threshold"] = threshold_;
  doc["post_support"] = post_support_;
  doc["token_support"] = token_support_;
  out << doc.dump(1, ' ', false, json::error_handler_t::replace) << '\n';
  if (!out) throw InputError("failed writing location catalog");
}

LocationCatalog LocationCatalog::load(std::istream& in) {
  if (!in) throw InputError("catalog stream is not readable");
  try {
    const json doc = json::parse(in);
    LocationCatalog c;
    c.types_ = doc.at("types").get<std::vector<std::string>>();
    c.frequent_ = doc.at("frequent_subset").get<std::vector<std::string>>();
    c.threshold_ = doc.at("frequent_threshold").get<std::uint64_t>();
    c.post_support_ = doc.at("post_support").get<std::map<std::string, std::uint64_t>>();
    c.token_support_ = doc.at("token_support").get<std::map<std::string, std::uint64_t>>();
    if (!std::is_sorted(c.types_.begin(), c.types_.end()))
      throw ValidationError("catalog types are not in index order");
    for (const std::string& tag : c.frequent_)
      if (!c.index_of(tag)) throw ValidationError("frequent type '" + tag + "' not in catalog");
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed catalog file: ") + e.what());
  }
}

ChiSquareReport chi_square_location(std::span<const corpus::Post> posts,
                                    const std::string& location, std::uint64_t min_support) {
  std::map<std::string, std::uint64_t> global;
  std::map<std::string, std::uint64_t> local;
  std::uint64_t global_total = 0;
  std::uint64_t local_total = 0;
  bool present = false;
  for (const corpus::Post& post : posts) {
    const bool tagged = post.place_types.contains(location);
    present = present || tagged;
    for (const std::string& token : post.tokens) {
      ++global[token];
      ++global_total;
      if (tagged) {
        ++local[token];
        ++local_total;
      }
    }
  }
  if (!present) throw ValidationError("location '" + location + "' does not occur in the corpus");

  ChiSquareReport report;
  report.location = location;
  report.location_tokens = local_total;
  double sum = 0.0;
  for (const auto& [word, observed] : local) {
    if (observed < min_support) continue;
    // N_L * p(w) with the product formed in integers so an exactly
    // proportional location yields an exact zero.
    const double expected = static_cast<double>(local_total * global.at(word)) /
                            static_cast<double>(global_total);
    const double diff = static_cast<double>(observed) - expected;
    const double contribution = diff * diff / expected;
    report.contributions.emplace(word, contribution);
    sum += contribution;
  }
  report.qualifying_words = report.contributions.size();
  if (report.qualifying_words == 0) {
    report.dropped = true;
  } else {
    report.score = sum / static_cast<double>(report.qualifying_words);
  }
  return report;
}

std::vector<std::string> significant_words(const ChiSquareReport& report, std::size_t top_n) {
  if (report.dropped)
    throw ValidationError("location '" + report.location + "' was dropped; no significant words");
  std::vector<std::pair<std::string, double>> ranked(report.contributions.begin(),
                                                     report.contributions.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  for (std::size_t i = 0; i < std::min(top_n, ranked.size()); ++i) words.push_back(ranked[i].first);
  return words;
}

ChiSquareSummary chi_square_all(std::span<const corpus::Post> posts,
                                const LocationCatalog& catalog, std::uint64_t min_support) {
  ChiSquareSummary summary;
  double total = 0.0;
  for (const std::string& tag : catalog.frequent_subset()) {
    ChiSquareReport report = chi_square_location(posts, tag, min_support);
    if (!report.dropped) {
      ++summary.considered;
      total += report.score;
      if (report.score > 1.0) ++summary.above_one;
    }
    summary.reports.emplace(tag, std::move(report));
  }
  if (summary.considered > 0) summary.mean_score = total / static_cast<double>(summary.considered);
  return summary;
}

namespace {

std::vector<const ChiSquareReport*> ranked_reports(const ChiSquareSummary& summary) {
  std::vector<const ChiSquareReport*> rows;
  for (const auto& [tag, report] : summary.reports)
    if (!report.dropped) rows.push_back(&report);
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto* a, const auto* b) { return a->score > b->score; });
  return rows;
}

}  // namespace

void write_chi_square_csv(std::ostream& out, const ChiSquareSummary& summary, std::size_t top_n) {
  out << "location,score,qualifying_words,significant_words\n";
  for (const ChiSquareReport* r : ranked_reports(summary)) {
    std::string words;
    for (const std::string& w : significant_words(*r, top_n)) {
      if (!words.empty()) words += ' ';
      words += w;
    }
    out << csv_field(r->location) << ',' << format_number(r->score) << ','
        << r->qualifying_words << ',' << csv_field(words) << '\n';
  }
}

void write_significant_words_csv(std::ostream& out, const ChiSquareSummary& summary,
                                 std::size_t top_n) {
  out << "location,rank,word,contribution\n";
  for (const ChiSquareReport* r : ranked_reports(summary)) {
    const std::vector<std::string> words = significant_words(*r, top_n);
    for (std::size_t i = 0; i < words.size(); ++i)
      out << csv_field(r->location) << ',' << i + 1 << ',' << csv_field(words[i]) << ','
          << format_number(r->contributions.at(words[i])) << '\n';
  }
}

}  // namespace geolm
