#ifndef GEOLM_EVAL_HPP_
#define GEOLM_EVAL_HPP_

#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "geolm/neural.hpp"
#include "geolm/sampler.hpp"

namespace geolm::eval {

/// Returns the k highest-ranked classes for an example, best first.
using Ranker = std::function<std::vector<ClassId>(const TrainingExample&, std::size_t k)>;

/// Fraction of examples whose target is among the ranker's first k classes.
/// Examples whose target equals `skip_target` are left out (used to report
/// accuracy without <unk> targets). Throws ValidationError if nothing is left.
double topk_accuracy(const Ranker& ranker, std::span<const TrainingExample> examples,
                     std::size_t k, std::optional<ClassId> skip_target = std::nullopt);

/// Same, from precomputed zero-based target ranks.
double topk_from_ranks(std::span<const std::size_t> ranks, std::size_t k);

struct LocationAccuracy {
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t n = 0;
};

struct EvalResult {
  std::string variant;
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t n = 0;
  /// Extension: accuracy restricted to examples from posts carrying each tag.
  std::map<std::string, LocationAccuracy> per_location;
};

/// Builds an EvalResult from target ranks. `tags[i]`, when given, lists the
/// location types of example i's post and fills per_location.
EvalResult summarize(const std::string& variant, std::span<const std::size_t> ranks,
                     const std::vector<std::set<std::string>>* tags = nullptr);

struct ComparisonRow {
  std::string variant;
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t n = 0;
  double delta_top1_pp = 0.0;  // percentage points over baseline
  double delta_top5_pp = 0.0;
};

/// Baseline first, then the other variants by name; independent of input
/// order. Throws ValidationError unless exactly one result is "baseline".
std::vector<ComparisonRow> compare_variants(std::span<const EvalResult> results);

/// variant,top1,top5,n
void write_results_csv(std::ostream& out, std::span<const EvalResult> results);
/// variant,top1,top5,n,delta_top1_pp,delta_top5_pp
void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);
/// variant,location,top1,top5,n
void write_location_csv(std::ostream& out, std::span<const EvalResult> results);

struct MetricLog {
  std::string variant;
  std::vector<nn::EpochMetrics> epochs;
};

/// epoch,train_loss,val_top1,val_top5 after optional '#' header lines.
void write_metric_log(std::ostream& out, std::span<const nn::EpochMetrics> epochs,
                      const std::string& header_comment = {});
MetricLog read_metric_log(std::istream& in, const std::string& variant);

/// Long format: epoch,variant,metric,value, sorted by epoch then variant
/// then metric. Logs covering different epoch ranges are outer-joined and a
/// warning is returned for each mismatch.
std::vector<std::string> convergence_log_merge(std::span<const MetricLog> logs, std::ostream& out);

}  // namespace geolm::eval

#endif  // GEOLM_EVAL_HPP_
