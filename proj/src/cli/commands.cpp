#include <algorithm>
#include <fstream>
#include <sstream>

#include "geolm/checkpoint.hpp"
#include "geolm/cli.hpp"
#include "geolm/corpus.hpp"
#include "geolm/divergence.hpp"
#include "geolm/embeddings.hpp"
#include "geolm/error.hpp"
#include "geolm/eval.hpp"
#include "geolm/sampler.hpp"
#include "geolm/vocab.hpp"
#include "numfmt.hpp"

namespace geolm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "model.json";
constexpr const char* kVocabName = "vocab.json";
constexpr const char* kCatalogName = "catalog.json";

std::ifstream open_input(const fs::path& path, const char* what) {
  if (path.empty()) throw InputError(std::string("no ") + what + " path configured");
  if (!fs::exists(path)) throw InputError(std::string(what) + " " + path.string() + " does not exist");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + " " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw InputError("failed writing " + path.string());
}

// JSON artifacts written by library code gain a provenance block.
template <typename Save>
void write_json_artifact(const fs::path& path, const RunConfig& cfg, Save&& save) {
  std::ostringstream buf;
  save(buf);
  json doc = json::parse(buf.str());
  doc["provenance"] = {{"config_hash", cfg.hash()}, {"seed", cfg.seed}};
  std::ofstream out = open_output(path);
  out << doc.dump(1, ' ', false, json::error_handler_t::replace) << '\n';
  finish(out, path);
}

std::vector<corpus::Post> load_posts(const RunConfig& cfg) {
  std::ifstream in = open_input(cfg.posts_path(), "enriched corpus");
  return corpus::read_posts(in);
}

std::optional<EmbeddingTable> load_table(const RunConfig& cfg, std::ostream& log, bool required) {
  const std::string& path = cfg.paths.embeddings;
  if (path.empty() || !fs::exists(path)) {
    if (required && !path.empty()) throw InputError("embeddings " + path + " does not exist");
    return std::nullopt;
  }
  std::ifstream in = open_input(path, "embeddings");
  EmbeddingLoad loaded = load_embeddings(in, cfg.embed_dim);
  log << "loaded " << loaded.table.size() << " vectors from " << path;
  if (loaded.skipped) log << " (" << loaded.skipped << " malformed lines skipped)";
  log << '\n';
  return std::move(loaded.table);
}

struct Windows {
  std::vector<TrainingExample> examples;
  std::vector<std::size_t> post_of;  // source post per example
};

Windows window_with_sources(std::span<const corpus::Post> posts, const Vocabulary& vocab,
                            const LocationCatalog& catalog, PlaceScope scope) {
  Windows w;
  for (std::size_t p = 0; p < posts.size(); ++p) {
    for (TrainingExample& ex : window_examples(posts[p], vocab, catalog, scope)) {
      w.examples.push_back(std::move(ex));
      w.post_of.push_back(p);
    }
  }
  return w;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

struct ModelBundle {
  Checkpoint checkpoint;
  Vocabulary vocab;
  LocationCatalog catalog;
};

ModelBundle load_bundle(const fs::path& manifest) {
  ModelBundle b{load_checkpoint(manifest), {}, {}};
  const json& extra = b.checkpoint.meta.extra;
  const fs::path dir = manifest.parent_path();
  {
    std::ifstream in = open_input(dir / extra.value("vocab", std::string(kVocabName)), "vocabulary");
    b.vocab = Vocabulary::load(in);
  }
  {
    std::ifstream in = open_input(dir / extra.value("catalog", std::string(kCatalogName)), "catalog");
    b.catalog = LocationCatalog::load(in);
  }
  const nn::ModelConfig& mc = b.checkpoint.params.config;
  if (b.vocab.num_classes() != mc.output_classes)
    throw ValidationError("checkpoint " + manifest.string() + " field 'output_classes' is " +
                          std::to_string(mc.output_classes) + " but its vocabulary has " +
                          std::to_string(b.vocab.num_classes()) + " classes");
  if (mc.has_place_input() && b.catalog.width(nn::place_scope(mc.variant)) != mc.place_input_dim)
    throw ValidationError("checkpoint " + manifest.string() + " field 'place_input_dim' is " +
                          std::to_string(mc.place_input_dim) + " but its catalog gives " +
                          std::to_string(b.catalog.width(nn::place_scope(mc.variant))));
  return b;
}

std::string header_line(const RunConfig& cfg, const std::string& extra = {}) {
  std::string line = "# " + cfg.provenance();
  if (!extra.empty()) line += " " + extra;
  return line + "\n";
}

}  // namespace

json IngestReport::to_json() const {
  return {{"lines_malformed", lines_malformed}, {"records", records},
          {"non_english", non_english},         {"missing_place", missing_place},
          {"broad_place", broad_place},         {"resolver_miss", resolver_miss},
          {"too_short", too_short},             {"kept", kept}};
}

IngestReport cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  std::ifstream raw_in = open_input(cfg.paths.raw_corpus, "raw corpus");
  std::ifstream places_in = open_input(cfg.paths.places, "place fixture");
  const corpus::FixtureResolver resolver = corpus::FixtureResolver::load(places_in);
  corpus::ParseResult parsed = corpus::parse_corpus(raw_in);
  for (const std::string& w : parsed.warnings) log << "warning: " << w << '\n';

  IngestReport report;
  report.lines_malformed = parsed.skipped;
  report.records = parsed.posts.size();
  // Rules apply in this order and each post is charged to the first one it
  // fails, so the per-rule counts add up to the record count.
  std::vector<corpus::RawPost> candidates;
  for (const corpus::RawPost& post : parsed.posts) {
    if (post.lang != "en") {
      ++report.non_english;
    } else if (!post.place_name || post.place_name->empty()) {
      ++report.missing_place;
    } else if (corpus::filter_posts(std::span(&post, 1)).empty()) {
      ++report.broad_place;
    } else {
      candidates.push_back(post);
    }
  }
  corpus::BuildStats stats;
  const std::vector<corpus::Post> posts = corpus::build_posts(candidates, resolver, &stats);
  report.resolver_miss = stats.unmatched_place;
  report.too_short = stats.too_short;
  report.kept = posts.size();

  const fs::path posts_path = cfg.posts_path();
  std::ofstream out = open_output(posts_path);
  out << header_line(cfg);
  corpus::write_posts(out, posts);
  finish(out, posts_path);

  const fs::path report_path = cfg.out_dir() / "ingest_report.json";
  std::ofstream rout = open_output(report_path);
  json doc = report.to_json();
  doc["provenance"] = {{"config_hash", cfg.hash()}, {"seed", cfg.seed}};
  rout << doc.dump(1) << '\n';
  finish(rout, report_path);

  log << "ingest: " << report.records << " records, " << report.kept << " kept -> "
      << posts_path.string() << '\n';
  return report;
}

void cmd_stats(const RunConfig& cfg, std::ostream& log) {
  const std::vector<corpus::Post> posts = load_posts(cfg);
  if (posts.empty()) throw ValidationError("enriched corpus " + cfg.posts_path().string() + " is empty");
  const LocationCatalog catalog = LocationCatalog::build(posts, cfg.frequent_threshold);
  const ChiSquareSummary summary = chi_square_all(posts, catalog, cfg.min_support);
  const std::string thresholds = "min_support=" + std::to_string(cfg.min_support) +
                                 " frequent_threshold=" + std::to_string(cfg.frequent_threshold);

  const fs::path dir = cfg.out_dir();
  {
    const fs::path path = dir / "chi_square.csv";
    std::ofstream out = open_output(path);
    out << header_line(cfg, thresholds);
    write_chi_square_csv(out, summary, cfg.top_n);
    finish(out, path);
  }
  {
    const fs::path path = dir / "significant_words.csv";
    std::ofstream out = open_output(path);
    out << header_line(cfg, thresholds + " top_n=" + std::to_string(cfg.top_n));
    write_significant_words_csv(out, summary, cfg.top_n);
    finish(out, path);
  }
  log << "stats: " << summary.considered << " locations scored, mean chi-square "
      << format_number(summary.mean_score) << ", " << summary.above_one << " above 1\n";

  const std::optional<EmbeddingTable> table = load_table(cfg, log, false);
  if (!table) {
    log << "warning: no embeddings available"
        << (cfg.paths.embeddings.empty() ? "" : " at " + cfg.paths.embeddings)
        << "; dispersion report skipped\n";
    return;
  }
  std::vector<DispersionReport> reports;
  for (const std::string& tag : catalog.frequent_subset())
    reports.push_back(location_dispersion(posts, tag, *table, cfg.sample_size, cfg.seed));
  const fs::path path = dir / "dispersion.csv";
  std::ofstream out = open_output(path);
  out << header_line(cfg, thresholds + " sample_size=" + std::to_string(cfg.sample_size));
  write_dispersion_csv(out, reports);
  finish(out, path);
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const std::vector<corpus::Post> posts = load_posts(cfg);
  if (posts.empty()) throw ValidationError("enriched corpus " + cfg.posts_path().string() + " is empty");

  std::optional<ModelBundle> pretrained;
  if (!cfg.paths.pretrained.empty()) {
    pretrained = load_bundle(cfg.paths.pretrained);
    log << "initializing from " << cfg.paths.pretrained << '\n';
  }
  // A pretrained network fixes the output classes, so its vocabulary is kept.
  const Vocabulary vocab = pretrained ? pretrained->vocab : Vocabulary::build(posts, cfg.vocab_k);
  const LocationCatalog catalog = LocationCatalog::build(posts, cfg.frequent_threshold);
  const PlaceScope scope = nn::place_scope(cfg.variant);

  nn::ModelConfig mc;
  mc.variant = cfg.variant;
  mc.embed_dim = cfg.embed_dim;
  mc.hidden = cfg.hidden;
  mc.layers = cfg.layers;
  mc.dense_units = cfg.dense_units;
  mc.place_input_dim = mc.has_place_input() ? catalog.width(scope) : 0;
  mc.place_dense_units = cfg.variant == nn::Variant::setup3 ? cfg.place_dense_units : 0;
  mc.output_classes = vocab.num_classes();
  mc.embeddings_frozen = cfg.embeddings_frozen;
  mc.validate();

  const Windows windows = window_with_sources(posts, vocab, catalog, scope);
  if (windows.examples.size() < 2)
    throw ValidationError("corpus yields " + std::to_string(windows.examples.size()) +
                          " training examples; need at least 2");
  const auto [train_idx, val_idx] = split_indices(windows.examples.size(), cfg.holdout, cfg.seed);
  std::vector<TrainingExample> train_set = pick(windows.examples, train_idx);
  const std::vector<TrainingExample> val_set = pick(windows.examples, val_idx);

  const fs::path dir = cfg.out_dir();
  if (cfg.resample) {
    const ResamplePlan plan = compute_plan(target_counts(train_set), cfg.oversample);
    train_set = resample(train_set, plan, cfg.seed);
    const fs::path path = dir / "resample_plan.csv";
    std::ofstream out = open_output(path);
    out << header_line(cfg, "mu=" + format_number(plan.mu) + " sigma=" + format_number(plan.sigma));
    plan.write_csv(out, &vocab);
    finish(out, path);
  }
  log << "train: " << nn::to_string(cfg.variant) << ", " << vocab.num_classes() << " classes, "
      << train_set.size() << " training / " << val_set.size() << " validation examples\n";

  const std::optional<EmbeddingTable> table = load_table(cfg, log, true);
  const nn::NetworkParams<float> init =
      nn::init_params(mc, table ? &*table : nullptr, vocab,
                      pretrained ? &pretrained->checkpoint.params : nullptr, cfg.seed);

  nn::TrainResult result =
      nn::train(init, cfg.train, train_set, val_set, [&](const nn::EpochMetrics& m) {
        log << "epoch " << m.epoch << " loss " << format_fixed(m.train_loss, 4) << " top1 "
            << format_fixed(m.val_top1, 4) << " top5 " << format_fixed(m.val_top5, 4) << '\n';
      });

  write_json_artifact(dir / kVocabName, cfg, [&](std::ostream& o) { vocab.save(o); });
  write_json_artifact(dir / kCatalogName, cfg, [&](std::ostream& o) { catalog.save(o); });

  CheckpointMeta meta;
  meta.seed = cfg.seed;
  meta.epoch = result.log.empty() ? 0 : result.log.back().epoch;
  meta.config_hash = cfg.hash();
  meta.extra = {{"vocab", kVocabName},
                {"catalog", kCatalogName},
                {"vocab_k", cfg.vocab_k},
                {"holdout", cfg.holdout},
                {"frequent_threshold", cfg.frequent_threshold},
                {"examples", windows.examples.size()},
                {"pretrained", cfg.paths.pretrained},
                {"run_config", cfg.to_json()}};
  save_checkpoint(dir / kManifestName, result.params, meta);

  const fs::path metrics_path = dir / "metrics.csv";
  std::ofstream mout = open_output(metrics_path);
  eval::write_metric_log(mout, result.log,
                         cfg.provenance() + " variant=" + std::string(nn::to_string(cfg.variant)));
  finish(mout, metrics_path);

  if (result.diverged)
    throw NumericalError("training diverged: " + result.message +
                         "; last finite checkpoint written to " + (dir / kManifestName).string(),
                         meta.epoch);
  log << "checkpoint written to " << (dir / kManifestName).string() << '\n';
}

void cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& out,
              std::ostream& log) {
  if (checkpoints.empty()) throw ValidationError("eval needs at least one checkpoint");
  const std::vector<corpus::Post> posts = load_posts(cfg);

  std::vector<eval::EvalResult> results;
  std::vector<eval::EvalResult> known_only;
  for (const std::string& path : checkpoints) {
    const ModelBundle b = load_bundle(path);
    const json& extra = b.checkpoint.meta.extra;
    auto check = [&](const char* field, const json& stored, const json& expected) {
      if (stored != expected)
        throw ValidationError("checkpoint " + path + " field '" + field + "' is " + stored.dump() +
                              " but the config has " + expected.dump());
    };
    check("seed", b.checkpoint.meta.seed, cfg.seed);
    check("data.holdout", extra.value("holdout", json()), cfg.holdout);
    check("vocab.k", extra.value("vocab_k", json()), cfg.vocab_k);
    check("data.frequent_threshold", extra.value("frequent_threshold", json()),
          cfg.frequent_threshold);

    const nn::ModelConfig& mc = b.checkpoint.params.config;
    const Windows windows =
        window_with_sources(posts, b.vocab, b.catalog, nn::place_scope(mc.variant));
    check("examples", extra.value("examples", json()), windows.examples.size());
    const auto [train_idx, val_idx] =
        split_indices(windows.examples.size(), cfg.holdout, b.checkpoint.meta.seed);
    const std::vector<TrainingExample> val_set = pick(windows.examples, val_idx);
    std::vector<std::set<std::string>> tags;
    for (std::size_t i : val_idx) tags.push_back(posts[windows.post_of[i]].place_types);

    const std::vector<std::size_t> ranks = nn::target_ranks(b.checkpoint.params, val_set);
    const std::string name(nn::to_string(mc.variant));
    results.push_back(eval::summarize(name, ranks, &tags));

    std::vector<std::size_t> known_ranks;
    for (std::size_t i = 0; i < val_set.size(); ++i)
      if (val_set[i].target != b.vocab.unk_id()) known_ranks.push_back(ranks[i]);
    if (!known_ranks.empty()) known_only.push_back(eval::summarize(name, known_ranks));
    log << "eval: " << path << " (" << name << ") on " << val_set.size() << " held-out examples\n";
  }

  const fs::path dir = cfg.out_dir();
  auto write = [&](const char* file, auto&& body) {
    const fs::path p = dir / file;
    std::ofstream f = open_output(p);
    f << header_line(cfg);
    body(f);
    finish(f, p);
  };
  write("eval_results.csv", [&](std::ostream& f) { eval::write_results_csv(f, results); });
  write("eval_results_no_unk.csv",
        [&](std::ostream& f) { eval::write_results_csv(f, known_only); });
  write("eval_locations.csv", [&](std::ostream& f) { eval::write_location_csv(f, results); });

  const auto baselines = std::count_if(results.begin(), results.end(),
                                       [](const auto& r) { return r.variant == "baseline"; });
  if (results.size() > 1 && baselines == 1) {
    const std::vector<eval::ComparisonRow> rows = eval::compare_variants(results);
    write("comparison.csv", [&](std::ostream& f) { eval::write_comparison_csv(f, rows); });
    eval::write_comparison_csv(out, rows);
  } else {
    if (results.size() > 1) log << "warning: comparison needs exactly one baseline; skipped\n";
    eval::write_results_csv(out, results);
  }
}

void cmd_predict(const fs::path& checkpoint, const std::string& context,
                 const std::vector<std::string>& place_types, std::size_t k, std::ostream& out,
                 std::ostream& log) {
  const ModelBundle b = load_bundle(checkpoint);
  const nn::NetworkParams<float>& params = b.checkpoint.params;
  const nn::ModelConfig& mc = params.config;
  if (k < 1 || k >= mc.output_classes)
    throw ValidationError("k must lie in [1, " + std::to_string(mc.output_classes - 1) + "]");

  TrainingExample ex;
  ex.context.fill(b.vocab.pad_id());
  const std::vector<std::string> tokens = corpus::tokenize(context);
  const std::size_t used = std::min(tokens.size(), kWindow);
  for (std::size_t i = 0; i < used; ++i)
    ex.context[kWindow - used + i] = b.vocab.encode(tokens[tokens.size() - used + i]);

  if (mc.has_place_input()) {
    const PlaceScope scope = nn::place_scope(mc.variant);
    std::set<std::string> tags;
    for (const std::string& t : place_types) {
      if (b.catalog.scope_index(t, scope))
        tags.insert(t);
      else
        log << "warning: place type '" << t << "' is not known to this model; ignored\n";
    }
    ex.place = b.catalog.place_vector(tags, scope);
  }

  const nn::Matrix<float> probs = nn::forward(params, std::span(&ex, 1));
  std::vector<float> row(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index c = 0; c < probs.cols(); ++c) row[static_cast<std::size_t>(c)] = probs(0, c);
  for (ClassId id : nn::rank_classes(row, b.vocab.pad_id(), k))
    out << b.vocab.decode(id) << '\t' << format_fixed(row[id], 6) << '\n';
}

}  // namespace geolm::cli
