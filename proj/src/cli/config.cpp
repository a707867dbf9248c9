#include <cstdio>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "geolm/cli.hpp"
#include "geolm/error.hpp"

namespace geolm::cli {

namespace {

// Typed access to "section.key" entries that remembers every key it was
// asked about, so leftovers can be reported as unknown.
class Reader {
 public:
  explicit Reader(const toml::table& root) : root_(root) {}

  template <typename T>
  void get(std::string_view section, std::string_view key, T& dst) {
    const std::string dotted =
        section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
    known_.insert(dotted);
    toml::node_view<const toml::node> node =
        section.empty() ? root_[key] : root_[section][key];
    if (!node) return;
    if constexpr (std::is_same_v<T, bool>) {
      auto v = node.value<bool>();
      if (!v) fail(dotted, "a boolean");
      dst = *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
      auto v = node.value<std::string>();
      if (!v || !node.is_string()) fail(dotted, "a string");
      dst = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node.value<double>();
      if (!v) fail(dotted, "a number");
      dst = static_cast<T>(*v);
    } else {
      if (!node.is_integer()) fail(dotted, "an integer");
      const std::int64_t v = *node.value<std::int64_t>();
      if (v < 0) fail(dotted, "a nonnegative integer");
      dst = static_cast<T>(v);
    }
  }

  void reject_unknown() const {
    for (const auto& [key, node] : root_) {
      if (const toml::table* section = node.as_table()) {
        for (const auto& [sub, ignored] : *section) {
          const std::string dotted = std::string(key.str()) + "." + std::string(sub.str());
          if (!known_.contains(dotted)) throw ValidationError("unknown config key '" + dotted + "'");
        }
      } else if (!known_.contains(std::string(key.str()))) {
        throw ValidationError("unknown config key '" + std::string(key.str()) + "'");
      }
    }
  }

 private:
  [[noreturn]] static void fail(const std::string& key, const char* what) {
    throw ValidationError("config key '" + key + "' must be " + what);
  }

  const toml::table& root_;
  std::set<std::string> known_;
};

void apply_override(toml::table& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override '" + assignment + "' is not of the form key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  toml::table parsed;
  try {
    parsed = toml::parse("v = " + raw);
  } catch (const toml::parse_error&) {
    parsed.insert_or_assign("v", raw);  // bare string
  }
  const auto dot = path.find('.');
  if (dot == std::string::npos) {
    root.insert_or_assign(path, parsed["v"]);
    return;
  }
  const std::string section = path.substr(0, dot);
  const std::string key = path.substr(dot + 1);
  if (!root.contains(section)) root.insert_or_assign(section, toml::table{});
  toml::table* table = root[section].as_table();
  if (!table) throw ValidationError("config key '" + section + "' is not a section");
  table->insert_or_assign(key, parsed["v"]);
}

}  // namespace

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides) {
  toml::table root;
  if (file) {
    if (!std::filesystem::exists(*file))
      throw InputError("config file " + file->string() + " does not exist");
    try {
      root = toml::parse_file(file->string());
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "config file " << file->string() << " is not valid TOML: " << e.description()
          << " (line " << e.source().begin.line << ")";
      throw InputError(msg.str());
    }
  }
  for (const std::string& o : overrides) apply_override(root, o);

  RunConfig cfg;
  Reader r(root);
  r.get("", "seed", cfg.seed);
  r.get("", "threads", cfg.threads);
  r.get("paths", "raw_corpus", cfg.paths.raw_corpus);
  r.get("paths", "places", cfg.paths.places);
  r.get("paths", "posts", cfg.paths.posts);
  r.get("paths", "embeddings", cfg.paths.embeddings);
  r.get("paths", "out", cfg.paths.out);
  r.get("paths", "pretrained", cfg.paths.pretrained);
  r.get("vocab", "k", cfg.vocab_k);
  r.get("data", "window", cfg.window);
  r.get("data", "holdout", cfg.holdout);
  r.get("data", "frequent_threshold", cfg.frequent_threshold);
  r.get("data", "resample", cfg.resample);
  r.get("data", "oversample", cfg.oversample);
  r.get("stats", "min_support", cfg.min_support);
  r.get("stats", "sample_size", cfg.sample_size);
  r.get("stats", "top_n", cfg.top_n);
  std::string variant(nn::to_string(cfg.variant));
  r.get("model", "variant", variant);
  cfg.variant = nn::variant_from_string(variant);
  r.get("model", "embed_dim", cfg.embed_dim);
  r.get("model", "hidden", cfg.hidden);
  r.get("model", "layers", cfg.layers);
  r.get("model", "dense_units", cfg.dense_units);
  r.get("model", "place_dense_units", cfg.place_dense_units);
  r.get("model", "embeddings_frozen", cfg.embeddings_frozen);
  r.get("train", "epochs", cfg.train.epochs);
  r.get("train", "batch_size", cfg.train.batch_size);
  r.get("train", "learning_rate", cfg.train.learning_rate);
  r.get("train", "beta1", cfg.train.beta1);
  r.get("train", "beta2", cfg.train.beta2);
  r.get("train", "epsilon", cfg.train.epsilon);
  r.reject_unknown();

  if (cfg.window != kWindow)
    throw ValidationError("data.window must be " + std::to_string(kWindow));
  if (cfg.vocab_k == 0) throw ValidationError("vocab.k must be positive");
  if (!(cfg.holdout > 0.0 && cfg.holdout < 1.0))
    throw ValidationError("data.holdout must lie strictly between 0 and 1");
  if (cfg.train.batch_size == 0) throw ValidationError("train.batch_size must be positive");
  if (!(cfg.train.learning_rate > 0.0)) throw ValidationError("train.learning_rate must be positive");
  if (cfg.paths.out.empty()) throw ValidationError("paths.out must not be empty");
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  return cfg;
}

std::filesystem::path RunConfig::posts_path() const {
  if (!paths.posts.empty()) return paths.posts;
  return std::filesystem::path(paths.out) / "posts.jsonl";
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["paths"] = {{"raw_corpus", paths.raw_corpus}, {"places", paths.places},
                {"posts", paths.posts},           {"embeddings", paths.embeddings},
                {"out", paths.out},               {"pretrained", paths.pretrained}};
  j["vocab"] = {{"k", vocab_k}};
  j["data"] = {{"window", window},
               {"holdout", holdout},
               {"frequent_threshold", frequent_threshold},
               {"resample", resample},
               {"oversample", oversample}};
  j["stats"] = {{"min_support", min_support}, {"sample_size", sample_size}, {"top_n", top_n}};
  j["model"] = {{"variant", std::string(nn::to_string(variant))},
                {"embed_dim", embed_dim},
                {"hidden", hidden},
                {"layers", layers},
                {"dense_units", dense_units},
                {"place_dense_units", place_dense_units},
                {"embeddings_frozen", embeddings_frozen}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"epsilon", train.epsilon}};
  return j;
}

std::string RunConfig::hash() const {
  // threads and paths.out are left out on purpose: results do not depend on them.
  nlohmann::json doc = to_json();
  doc["paths"].erase("out");
  doc["paths"]["posts"] = posts_path().string();
  const std::string canonical = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::provenance() const {
  return "config_hash=" + hash() + " seed=" + std::to_string(seed);
}

}  // namespace geolm::cli
