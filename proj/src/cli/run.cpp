#include <CLI11.hpp>

#include "geolm/cli.hpp"
#include "geolm/error.hpp"

namespace geolm::cli {

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> threads;
  std::optional<std::string> out;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "TOML run configuration")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override a config key, e.g. --set train.epochs=3")
        ->allow_extra_args(false);
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--variant", variant, "baseline, setup1, setup2 or setup3");
    app->add_option("--threads", threads, "Worker threads (results do not depend on it)");
    app->add_option("--out", out, "Output directory");
  }

  RunConfig load() const {
    std::vector<std::string> overrides = sets;
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (threads) overrides.push_back("threads=" + std::to_string(*threads));
    if (variant) overrides.push_back("model.variant=\"" + *variant + "\"");
    if (out) overrides.push_back("paths.out=\"" + *out + "\"");
    return RunConfig::load(config.empty() ? std::nullopt : std::optional<std::filesystem::path>(config),
                           overrides);
  }
};

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Location-conditioned next-word prediction toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* ingest = app.add_subcommand("ingest", "Filter and enrich a raw post corpus");
  CLI::App* stats = app.add_subcommand("stats", "Chi-square and embedding dispersion reports");
  CLI::App* train = app.add_subcommand("train", "Train one model variant");
  CLI::App* evaluate = app.add_subcommand("eval", "Score checkpoints on the held-out split");
  CLI::App* predict = app.add_subcommand("predict", "Rank next words for a context");
  for (CLI::App* sub : {ingest, stats, train, evaluate, predict}) flags.attach(sub);

  std::vector<std::string> checkpoints;
  evaluate->add_option("checkpoints", checkpoints, "Checkpoint manifests (model.json)")
      ->required()
      ->check(CLI::ExistingFile);

  std::string checkpoint;
  std::string context;
  std::vector<std::string> places;
  std::size_t k = 5;
  predict->add_option("--checkpoint", checkpoint, "Checkpoint manifest")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--context", context, "Preceding text")->required();
  predict->add_option("--place", places, "Location type of the current place (repeatable)")
      ->allow_extra_args(false);
  predict->add_option("-k", k, "Number of words to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*predict) {
      cmd_predict(checkpoint, context, places, k, out, err);
      return kOk;
    }
    const RunConfig cfg = flags.load();
    if (*ingest) {
      cmd_ingest(cfg, err);
    } else if (*stats) {
      cmd_stats(cfg, err);
    } else if (*train) {
      cmd_train(cfg, err);
    } else {
      cmd_eval(cfg, checkpoints, out, err);
    }
    return kOk;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputFailure;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const RetryableError& e) {
    err << "transient error: " << e.what() << '\n';
    return kRetryableFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kInputFailure;
  }
}

}  // namespace geolm::cli
