#include "geolm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <vector>

#include "geolm/error.hpp"

namespace geolm {

using nlohmann::json;

namespace {

void put_le32(std::vector<char>& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((bits >> shift) & 0xFF));
}

float get_le32(const char* p) {
  std::uint32_t bits = 0;
  for (int k = 3; k >= 0; --k) bits = (bits << 8) | static_cast<unsigned char>(p[k]);
  return std::bit_cast<float>(bits);
}

template <typename V>
V required(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(std::string("checkpoint config lacks '") + key + "'");
  try {
    return it->get<V>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("checkpoint config field '") + key + "' has the wrong type");
  }
}

}  // namespace

json model_config_to_json(const nn::ModelConfig& c) {
  json doc;
  doc["variant"] = std::string(nn::to_string(c.variant));
  doc["embed_dim"] = c.embed_dim;
  doc["hidden"] = c.hidden;
  doc["layers"] = c.layers;
  doc["dense_units"] = c.dense_units;
  doc["place_input_dim"] = c.place_input_dim;
  doc["place_dense_units"] = c.place_dense_units;
  doc["output_classes"] = c.output_classes;
  doc["window"] = kWindow;
  doc["embeddings_frozen"] = c.embeddings_frozen;
  return doc;
}

nn::ModelConfig model_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("checkpoint config is not an object");
  nn::ModelConfig c;
  c.variant = nn::variant_from_string(required<std::string>(doc, "variant"));
  c.embed_dim = required<std::size_t>(doc, "embed_dim");
  c.hidden = required<std::size_t>(doc, "hidden");
  c.layers = required<std::size_t>(doc, "layers");
  c.dense_units = required<std::size_t>(doc, "dense_units");
  c.place_input_dim = required<std::size_t>(doc, "place_input_dim");
  c.place_dense_units = required<std::size_t>(doc, "place_dense_units");
  c.output_classes = required<std::size_t>(doc, "output_classes");
  c.embeddings_frozen = required<bool>(doc, "embeddings_frozen");
  if (required<std::size_t>(doc, "window") != kWindow)
    throw ValidationError("checkpoint config field 'window' must be " + std::to_string(kWindow));
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& manifest, const nn::NetworkParams<float>& params,
                     const CheckpointMeta& meta) {
  std::filesystem::path blob_path = manifest;
  blob_path.replace_extension(".bin");

  json arrays = json::array();
  std::vector<char> blob;
  blob.reserve(params.parameter_count() * 4);
  params.for_each([&](const std::string& name, const nn::Matrix<float>& m) {
    arrays.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_le32(blob, m(r, c));
  });
  std::vector<std::size_t> frozen;
  for (std::size_t r = 0; r < params.frozen_rows.size(); ++r)
    if (params.frozen_rows[r]) frozen.push_back(r);

  json doc;
  doc["format"] = "geolm-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["config"] = model_config_to_json(params.config);
  doc["config_hash"] = meta.config_hash;
  doc["seed"] = meta.seed;
  doc["epoch"] = meta.epoch;
  doc["lstm_gate_order"] = "i,f,g,o";
  doc["layout"] = "row-major little-endian float32";
  doc["arrays"] = std::move(arrays);
  doc["frozen_rows"] = frozen;
  doc["blob"] = blob_path.filename().string();
  doc["blob_bytes"] = blob.size();
  doc["extra"] = meta.extra;

  std::ofstream bout(blob_path, std::ios::binary);
  bout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!bout) throw InputError("cannot write checkpoint blob " + blob_path.string());
  std::ofstream mout(manifest);
  mout << doc.dump(1) << '\n';
  if (!mout) throw InputError("cannot write checkpoint manifest " + manifest.string());
}

namespace {

Checkpoint read_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream min(manifest);
  if (!min) throw InputError("cannot open checkpoint manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(min);
  } catch (const json::exception& e) {
    throw InputError("checkpoint manifest " + manifest.string() + " is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "geolm-checkpoint")
    throw InputError(manifest.string() + " is not a geolm checkpoint");
  if (doc.value("version", 0) != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version in " + manifest.string());
  if (!doc.contains("config")) throw ValidationError("checkpoint lacks 'config'");

  Checkpoint ck;
  ck.params = nn::NetworkParams<float>::zeros(model_config_from_json(doc["config"]));
  ck.meta.seed = doc.value("seed", std::uint64_t{0});
  ck.meta.epoch = doc.value("epoch", std::size_t{0});
  ck.meta.config_hash = doc.value("config_hash", std::string());
  ck.meta.extra = doc.value("extra", json::object());

  const json& arrays = doc.at("arrays");
  std::size_t k = 0;
  std::size_t expected_bytes = 0;
  ck.params.for_each([&](const std::string& name, const nn::Matrix<float>& m) {
    if (k >= arrays.size())
      throw ValidationError("checkpoint is missing array '" + name + "'");
    const json& entry = arrays[k++];
    if (entry.value("name", "") != name)
      throw ValidationError("checkpoint array " + std::to_string(k - 1) + " is '" +
                            entry.value("name", "") + "', expected '" + name + "'");
    const auto shape = entry.at("shape").get<std::vector<long>>();
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
      throw ValidationError("checkpoint array '" + name + "' has a shape that does not match config");
    expected_bytes += static_cast<std::size_t>(m.size()) * 4;
  });
  if (k != arrays.size()) throw ValidationError("checkpoint has extra arrays for its config");

  std::filesystem::path blob_path = manifest.parent_path() / doc.value("blob", std::string());
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw InputError("cannot open checkpoint blob " + blob_path.string());
  std::vector<char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() != expected_bytes)
    throw InputError("checkpoint blob " + blob_path.string() + " has " +
                     std::to_string(blob.size()) + " bytes, expected " +
                     std::to_string(expected_bytes) + " (truncated or corrupt)");

  std::size_t offset = 0;
  ck.params.for_each([&](const std::string&, nn::Matrix<float>& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = get_le32(blob.data() + offset);
        offset += 4;
      }
  });
  for (std::size_t r : doc.value("frozen_rows", std::vector<std::size_t>{})) {
    if (r >= ck.params.frozen_rows.size()) throw ValidationError("frozen row index out of range");
    ck.params.frozen_rows[r] = 1;
  }
  return ck;
}

}  // namespace

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  try {
    return read_checkpoint(manifest);
  } catch (const json::exception& e) {
    throw InputError("checkpoint manifest " + manifest.string() + " is malformed: " + e.what());
  }
}

}  // namespace geolm
