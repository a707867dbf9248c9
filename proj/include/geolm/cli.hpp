#ifndef GEOLM_CLI_HPP_
#define GEOLM_CLI_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "geolm/neural.hpp"

namespace geolm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInputFailure = 2,
  kValidationFailure = 3,
  kNumericalFailure = 4,
  kRetryableFailure = 5,
};

/// Everything a command needs. Defaults follow the published setup: 1000
/// words, a 4-word window, 20 epochs, 10% holdout.
struct RunConfig {
  struct Paths {
    std::string raw_corpus;  // JSONL of raw posts (ingest)
    std::string places;      // place fixture (ingest)
    std::string posts;       // enriched corpus; defaults to <out>/posts.jsonl
    std::string embeddings;  // GloVe text file (optional)
    std::string out = "out";
    std::string pretrained;  // checkpoint manifest to initialize from (train)
  } paths;

  std::size_t vocab_k = 1000;
  std::size_t window = kWindow;
  double holdout = kDefaultHoldout;
  std::uint64_t frequent_threshold = 50;
  bool resample = true;
  bool oversample = true;

  std::uint64_t min_support = kChiSquareMinSupport;
  std::size_t sample_size = kDispersionSample;
  std::size_t top_n = 10;

  nn::Variant variant = nn::Variant::baseline;
  std::size_t embed_dim = 100;
  std::size_t hidden = 256;
  std::size_t layers = 2;
  std::size_t dense_units = 256;
  std::size_t place_dense_units = 16;
  bool embeddings_frozen = true;

  nn::TrainConfig train;  // seed and threads are copied from below
  std::uint64_t seed = 42;
  std::size_t threads = 1;

  /// Reads a TOML file and applies `overrides` ("section.key=value", value
  /// in TOML syntax or a bare string). Unknown keys are ValidationErrors.
  static RunConfig load(const std::optional<std::filesystem::path>& file,
                        const std::vector<std::string>& overrides = {});

  std::filesystem::path posts_path() const;
  std::filesystem::path out_dir() const { return paths.out; }

  nlohmann::json to_json() const;
  /// FNV-1a of the canonical JSON form, as 16 hex digits.
  std::string hash() const;
  /// "config_hash=... seed=..." for artifact headers.
  std::string provenance() const;
};

struct IngestReport {
  std::size_t lines_malformed = 0;
  std::size_t records = 0;
  std::size_t non_english = 0;
  std::size_t missing_place = 0;
  std::size_t broad_place = 0;
  std::size_t resolver_miss = 0;
  std::size_t too_short = 0;
  std::size_t kept = 0;

  nlohmann::json to_json() const;
};

/// Commands write their artifacts under cfg.out_dir() and progress notes to
/// `log`. Failures surface as geolm::Error subclasses; run() maps those to
/// exit codes.
IngestReport cmd_ingest(const RunConfig& cfg, std::ostream& log);
void cmd_stats(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& out,
              std::ostream& log);
void cmd_predict(const std::filesystem::path& checkpoint, const std::string& context,
                 const std::vector<std::string>& place_types, std::size_t k, std::ostream& out,
                 std::ostream& log);

/// Parses argv, dispatches, and converts exceptions into exit codes.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace geolm::cli

#endif  // GEOLM_CLI_HPP_
