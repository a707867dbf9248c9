#include "geolm/eval.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <tuple>

#include "geolm/error.hpp"
#include "numfmt.hpp"

namespace geolm::eval {

double topk_accuracy(const Ranker& ranker, std::span<const TrainingExample> examples,
                     std::size_t k, std::optional<ClassId> skip_target) {
  if (k == 0) throw ValidationError("k must be at least 1");
  std::size_t hits = 0, counted = 0;
  for (const TrainingExample& ex : examples) {
    if (skip_target && ex.target == *skip_target) continue;
    ++counted;
    const std::vector<ClassId> ranked = ranker(ex, k);
    const auto end = ranked.begin() + static_cast<long>(std::min(k, ranked.size()));
    if (std::find(ranked.begin(), end, ex.target) != end) ++hits;
  }
  if (counted == 0) throw ValidationError("top-k accuracy over an empty example set");
  return static_cast<double>(hits) / static_cast<double>(counted);
}

double topk_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ValidationError("top-k accuracy over an empty example set");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r < k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

EvalResult summarize(const std::string& variant, std::span<const std::size_t> ranks,
                     const std::vector<std::set<std::string>>* tags) {
  EvalResult r;
  r.variant = variant;
  r.n = ranks.size();
  r.top1 = topk_from_ranks(ranks, 1);
  r.top5 = topk_from_ranks(ranks, 5);
  if (tags) {
    if (tags->size() != ranks.size())
      throw ValidationError("location tags do not line up with the evaluated examples");
    std::map<std::string, std::array<std::size_t, 3>> acc;  // hits1, hits5, n
    for (std::size_t i = 0; i < ranks.size(); ++i)
      for (const std::string& tag : (*tags)[i]) {
        auto& a = acc[tag];
        a[0] += ranks[i] < 1;
        a[1] += ranks[i] < 5;
        ++a[2];
      }
    for (const auto& [tag, a] : acc) {
      const auto n = static_cast<double>(a[2]);
      r.per_location[tag] = {static_cast<double>(a[0]) / n, static_cast<double>(a[1]) / n, a[2]};
    }
  }
  return r;
}

std::vector<ComparisonRow> compare_variants(std::span<const EvalResult> results) {
  const EvalResult* baseline = nullptr;
  for (const EvalResult& r : results) {
    if (r.variant != "baseline") continue;
    if (baseline) throw ValidationError("more than one result is labeled baseline");
    baseline = &r;
  }
  if (!baseline) throw ValidationError("comparison needs a result labeled baseline");

  std::vector<ComparisonRow> rows;
  for (const EvalResult& r : results)
    rows.push_back({r.variant, r.top1, r.top5, r.n, 100.0 * (r.top1 - baseline->top1),
                    100.0 * (r.top5 - baseline->top5)});
  std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    const bool ab = a.variant == "baseline", bb = b.variant == "baseline";
    if (ab != bb) return ab;
    return std::tie(a.variant, a.top1, a.top5, a.n) < std::tie(b.variant, b.top1, b.top5, b.n);
  });
  return rows;
}

void write_results_csv(std::ostream& out, std::span<const EvalResult> results) {
  out << "variant,top1,top5,n\n";
  for (const EvalResult& r : results)
    out << csv_field(r.variant) << ',' << format_number(r.top1) << ',' << format_number(r.top5)
        << ',' << r.n << '\n';
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  out << "variant,top1,top5,n,delta_top1_pp,delta_top5_pp\n";
  for (const ComparisonRow& r : rows)
    out << csv_field(r.variant) << ',' << format_number(r.top1) << ',' << format_number(r.top5)
        << ',' << r.n << ',' << format_fixed(r.delta_top1_pp, 2) << ','
        << format_fixed(r.delta_top5_pp, 2) << '\n';
}

void write_location_csv(std::ostream& out, std::span<const EvalResult> results) {
  out << "variant,location,top1,top5,n\n";
  for (const EvalResult& r : results)
    for (const auto& [tag, a] : r.per_location)
      out << csv_field(r.variant) << ',' << csv_field(tag) << ',' << format_number(a.top1) << ','
          << format_number(a.top5) << ',' << a.n << '\n';
}

void write_metric_log(std::ostream& out, std::span<const nn::EpochMetrics> epochs,
                      const std::string& header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "epoch,train_loss,val_top1,val_top5\n";
  for (const nn::EpochMetrics& m : epochs)
    out << m.epoch << ',' << format_number(m.train_loss) << ',' << format_number(m.val_top1)
        << ',' << format_number(m.val_top5) << '\n';
}

MetricLog read_metric_log(std::istream& in, const std::string& variant) {
  if (!in) throw InputError("metric log stream is not readable");
  MetricLog log;
  log.variant = variant;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("epoch,", 0) != 0) throw InputError("metric log lacks the epoch header");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    nn::EpochMetrics m;
    char c1, c2, c3;
    row >> m.epoch >> c1 >> m.train_loss >> c2 >> m.val_top1 >> c3 >> m.val_top5;
    if (!row || c1 != ',' || c2 != ',' || c3 != ',') throw InputError("bad metric log row: " + line);
    log.epochs.push_back(m);
  }
  return log;
}

std::vector<std::string> convergence_log_merge(std::span<const MetricLog> logs, std::ostream& out) {
  std::vector<std::string> warnings;
  std::set<std::size_t> all_epochs;
  for (const MetricLog& log : logs)
    for (const auto& m : log.epochs) all_epochs.insert(m.epoch);

  using Key = std::tuple<std::size_t, std::string, std::string>;
  std::map<Key, double> rows;
  for (const MetricLog& log : logs) {
    std::set<std::size_t> mine;
    for (const nn::EpochMetrics& m : log.epochs) {
      mine.insert(m.epoch);
      rows[{m.epoch, log.variant, "train_loss"}] = m.train_loss;
      rows[{m.epoch, log.variant, "val_top1"}] = m.val_top1;
      rows[{m.epoch, log.variant, "val_top5"}] = m.val_top5;
    }
    if (mine != all_epochs)
      warnings.push_back("variant '" + log.variant + "' covers " + std::to_string(mine.size()) +
                         " of " + std::to_string(all_epochs.size()) + " epochs");
  }
  out << "epoch,variant,metric,value\n";
  for (const auto& [key, value] : rows)
    out << std::get<0>(key) << ',' << csv_field(std::get<1>(key)) << ',' << std::get<2>(key) << ','
        << format_number(value) << '\n';
  return warnings;
}

}  // namespace geolm::eval
