#include "geolm/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <utility>

#include "geolm/error.hpp"
#include "random.hpp"

namespace geolm::nn {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 4> kVariantNames{{
    {Variant::baseline, "baseline"},
    {Variant::setup1, "setup1"},
    {Variant::setup2, "setup2"},
    {Variant::setup3, "setup3"},
}};

// Examples per work unit in loss_and_gradients. Fixed, so the reduction
// order never depends on the thread count.
constexpr std::size_t kChunk = 32;

template <typename T>
Matrix<T> sigmoid(const Matrix<T>& z) {
  return (T(1) + (-z.array()).exp()).inverse().matrix();
}

template <typename T>
Matrix<T> tanh_of(const Matrix<T>& z) {
  return z.array().tanh().matrix();
}

template <typename T>
struct DirectionTrace {
  std::vector<Matrix<T>> gates;   // by position, activated, 4H x B
  std::vector<Matrix<T>> cells;   // by position
  std::vector<Matrix<T>> hidden;  // by position
};

template <typename T>
struct Trace {
  std::vector<std::vector<Matrix<T>>> inputs;  // [layer][position]
  std::vector<std::array<DirectionTrace<T>, 2>> lstm;
  Matrix<T> place_in;
  Matrix<T> place_out;
  Matrix<T> concat;
  Matrix<T> dense;
  Matrix<T> logits;
};

// Position consumed at processing step s.
std::size_t position(std::size_t dir, std::size_t step) {
  return dir == kForward ? step : kWindow - 1 - step;
}

template <typename T>
void check_batch(const NetworkParams<T>& params, std::span<const TrainingExample> batch) {
  const ModelConfig& cfg = params.config;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (ClassId id : batch[b].context)
      if (id >= cfg.output_classes)
        throw ValidationError("context class " + std::to_string(id) + " of example " +
                              std::to_string(b) + " is outside the model's class range");
    if (cfg.has_place_input() && batch[b].place.size() != cfg.place_input_dim)
      throw ValidationError("example " + std::to_string(b) + " has a place vector of width " +
                            std::to_string(batch[b].place.size()) + ", model expects " +
                            std::to_string(cfg.place_input_dim));
  }
}

template <typename T>
void run_forward(const NetworkParams<T>& params, std::span<const TrainingExample> batch,
                 Trace<T>& tr) {
  const ModelConfig& cfg = params.config;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);

  tr.inputs.assign(cfg.layers, std::vector<Matrix<T>>(kWindow));
  tr.lstm.assign(cfg.layers, {});
  for (std::size_t t = 0; t < kWindow; ++t) {
    Matrix<T>& x = tr.inputs[0][t];
    x.resize(static_cast<Eigen::Index>(cfg.embed_dim), B);
    for (Eigen::Index b = 0; b < B; ++b)
      x.col(b) = params.embedding.row(batch[static_cast<std::size_t>(b)].context[t]).transpose();
  }

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const LstmDirection<T>& w = params.lstm[l][dir];
      DirectionTrace<T>& dt = tr.lstm[l][dir];
      dt.gates.assign(kWindow, {});
      dt.cells.assign(kWindow, {});
      dt.hidden.assign(kWindow, {});
      Matrix<T> h = Matrix<T>::Zero(H, B);
      Matrix<T> c = Matrix<T>::Zero(H, B);
      for (std::size_t s = 0; s < kWindow; ++s) {
        const std::size_t t = position(dir, s);
        Matrix<T> z = w.w_input * tr.inputs[l][t] + w.w_recurrent * h;
        z.colwise() += w.bias.col(0);
        Matrix<T> gates(4 * H, B);
        gates.topRows(H) = sigmoid<T>(z.topRows(H));
        gates.middleRows(H, H) = sigmoid<T>(z.middleRows(H, H));
        gates.middleRows(2 * H, H) = tanh_of<T>(z.middleRows(2 * H, H));
        gates.bottomRows(H) = sigmoid<T>(z.bottomRows(H));
        c = gates.middleRows(H, H).cwiseProduct(c) +
            gates.topRows(H).cwiseProduct(gates.middleRows(2 * H, H));
        h = gates.bottomRows(H).cwiseProduct(tanh_of<T>(c));
        dt.gates[t] = std::move(gates);
        dt.cells[t] = c;
        dt.hidden[t] = h;
      }
    }
    if (l + 1 < cfg.layers) {
      for (std::size_t t = 0; t < kWindow; ++t) {
        Matrix<T>& next = tr.inputs[l + 1][t];
        next.resize(2 * H, B);
        next.topRows(H) = tr.lstm[l][kForward].hidden[t];
        next.bottomRows(H) = tr.lstm[l][kBackward].hidden[t];
      }
    }
  }

  const auto place_dim = static_cast<Eigen::Index>(cfg.place_feature_dim());
  if (cfg.has_place_input()) {
    tr.place_in.resize(static_cast<Eigen::Index>(cfg.place_input_dim), B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& place = batch[static_cast<std::size_t>(b)].place;
      for (std::size_t p = 0; p < place.size(); ++p)
        tr.place_in(static_cast<Eigen::Index>(p), b) = place[p] ? T(1) : T(0);
    }
    if (cfg.variant == Variant::setup3) {
      Matrix<T> pre = params.place_weight * tr.place_in;
      pre.colwise() += params.place_bias.col(0);
      tr.place_out = tanh_of<T>(pre);
    } else {
      tr.place_out = tr.place_in;
    }
  }

  const auto& top = tr.lstm[cfg.layers - 1];
  tr.concat.resize(static_cast<Eigen::Index>(cfg.concat_dim()), B);
  tr.concat.topRows(H) = top[kForward].hidden[kWindow - 1];
  tr.concat.middleRows(H, H) = top[kBackward].hidden[0];
  if (place_dim > 0) tr.concat.bottomRows(place_dim) = tr.place_out;

  Matrix<T> dense_pre = params.dense_weight * tr.concat;
  dense_pre.colwise() += params.dense_bias.col(0);
  tr.dense = tanh_of<T>(dense_pre);
  tr.logits = params.output_weight * tr.dense;
  tr.logits.colwise() += params.output_bias.col(0);
}

// Column-wise softmax with the normalizer accumulated in double.
template <typename T>
Matrix<T> softmax_columns(const Matrix<T>& logits, std::vector<double>* log_normalizer = nullptr) {
  Matrix<T> probs(logits.rows(), logits.cols());
  if (log_normalizer) log_normalizer->assign(static_cast<std::size_t>(logits.cols()), 0.0);
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const T peak = logits.col(b).maxCoeff();
    const Matrix<T> e = (logits.col(b).array() - peak).exp().matrix();
    const double sum = e.template cast<double>().sum();
    probs.col(b) = (e.template cast<double>() / sum).template cast<T>();
    if (log_normalizer)
      (*log_normalizer)[static_cast<std::size_t>(b)] = static_cast<double>(peak) + std::log(sum);
  }
  return probs;
}

// Adds the chunk's summed (not averaged) gradients into `g` and returns the
// summed loss.
template <typename T>
double backward_chunk(const NetworkParams<T>& params, std::span<const TrainingExample> batch,
                      std::size_t batch_offset, NetworkParams<T>& g) {
  const ModelConfig& cfg = params.config;
  Trace<T> tr;
  run_forward(params, batch, tr);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto H = static_cast<Eigen::Index>(cfg.hidden);

  std::vector<double> lognorm;
  Matrix<T> dlogits = softmax_columns<T>(tr.logits, &lognorm);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const ClassId target = batch[static_cast<std::size_t>(b)].target;
    const double ex_loss =
        lognorm[static_cast<std::size_t>(b)] - static_cast<double>(tr.logits(target, b));
    if (!std::isfinite(ex_loss))
      throw NumericalError("non-finite loss for example " +
                               std::to_string(batch_offset + static_cast<std::size_t>(b)),
                           batch_offset + static_cast<std::size_t>(b));
    loss += ex_loss;
    dlogits(target, b) -= T(1);
  }

  g.output_weight.noalias() += dlogits * tr.dense.transpose();
  g.output_bias += dlogits.rowwise().sum();
  Matrix<T> ddense = params.output_weight.transpose() * dlogits;
  ddense.array() *= (T(1) - tr.dense.array().square());
  g.dense_weight.noalias() += ddense * tr.concat.transpose();
  g.dense_bias += ddense.rowwise().sum();
  const Matrix<T> dconcat = params.dense_weight.transpose() * ddense;

  if (cfg.variant == Variant::setup3) {
    const auto P = static_cast<Eigen::Index>(cfg.place_dense_units);
    Matrix<T> dplace = dconcat.bottomRows(P);
    dplace.array() *= (T(1) - tr.place_out.array().square());
    g.place_weight.noalias() += dplace * tr.place_in.transpose();
    g.place_bias += dplace.rowwise().sum();
  }

  // Gradient flowing into each direction's hidden output, by position.
  std::array<std::vector<Matrix<T>>, 2> dh_out;
  for (auto& v : dh_out) v.assign(kWindow, Matrix<T>::Zero(H, B));
  dh_out[kForward][kWindow - 1] = dconcat.topRows(H);
  dh_out[kBackward][0] = dconcat.middleRows(H, H);

  for (std::size_t l = cfg.layers; l-- > 0;) {
    const auto in_dim = tr.inputs[l][0].rows();
    std::vector<Matrix<T>> dinput(kWindow, Matrix<T>::Zero(in_dim, B));
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const LstmDirection<T>& w = params.lstm[l][dir];
      LstmDirection<T>& gw = g.lstm[l][dir];
      const DirectionTrace<T>& dt = tr.lstm[l][dir];
      Matrix<T> dh_next = Matrix<T>::Zero(H, B);
      Matrix<T> dc_next = Matrix<T>::Zero(H, B);
      Matrix<T> dz(4 * H, B);
      for (std::size_t s = kWindow; s-- > 0;) {
        const std::size_t t = position(dir, s);
        const Matrix<T>& gates = dt.gates[t];
        const auto i = gates.topRows(H).array();
        const auto f = gates.middleRows(H, H).array();
        const auto gg = gates.middleRows(2 * H, H).array();
        const auto o = gates.bottomRows(H).array();
        const Matrix<T> tc = tanh_of<T>(dt.cells[t]);

        const Matrix<T> dh = dh_out[dir][t] + dh_next;
        const Matrix<T> dc =
            (dh.array() * o * (T(1) - tc.array().square())).matrix() + dc_next;
        if (s > 0) {
          const std::size_t prev = position(dir, s - 1);
          dz.middleRows(H, H) = (dc.array() * dt.cells[prev].array() * f * (T(1) - f)).matrix();
        } else {
          dz.middleRows(H, H).setZero();
        }
        dz.topRows(H) = (dc.array() * gg * i * (T(1) - i)).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * i * (T(1) - gg.square())).matrix();
        dz.bottomRows(H) = (dh.array() * tc.array() * o * (T(1) - o)).matrix();

        gw.w_input.noalias() += dz * tr.inputs[l][t].transpose();
        gw.bias += dz.rowwise().sum();
        if (s > 0) {
          const std::size_t prev = position(dir, s - 1);
          gw.w_recurrent.noalias() += dz * dt.hidden[prev].transpose();
        }
        dinput[t].noalias() += w.w_input.transpose() * dz;
        dh_next.noalias() = w.w_recurrent.transpose() * dz;
        dc_next = (dc.array() * f).matrix();
      }
    }
    if (l > 0) {
      for (std::size_t t = 0; t < kWindow; ++t) {
        dh_out[kForward][t] = dinput[t].topRows(H);
        dh_out[kBackward][t] = dinput[t].bottomRows(H);
      }
    } else {
      for (std::size_t t = 0; t < kWindow; ++t)
        for (Eigen::Index b = 0; b < B; ++b)
          g.embedding.row(batch[static_cast<std::size_t>(b)].context[t]) +=
              dinput[t].col(b).transpose();
    }
  }
  return loss;
}

template <typename T>
std::vector<Matrix<T>*> arrays_of(NetworkParams<T>& p) {
  std::vector<Matrix<T>*> out;
  p.for_each([&](const std::string&, Matrix<T>& m) { out.push_back(&m); });
  return out;
}

template <typename T>
std::vector<ClassId> rank_row(const T* probs, std::size_t n, ClassId pad_id, std::size_t k_best) {
  std::vector<ClassId> ids;
  ids.reserve(n);
  for (std::size_t c = 0; c < n; ++c)
    if (c != pad_id) ids.push_back(static_cast<ClassId>(c));
  const std::size_t keep = std::min(k_best, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(keep), ids.end(),
                    [&](ClassId a, ClassId b) {
                      return probs[a] != probs[b] ? probs[a] > probs[b] : a < b;
                    });
  ids.resize(keep);
  return ids;
}

// Zero-based rank of `target` under the (probability desc, id asc) order,
// pad excluded.
template <typename T>
std::size_t rank_of(const T* probs, std::size_t n, ClassId pad_id, ClassId target) {
  std::size_t rank = 0;
  const T pt = probs[target];
  for (std::size_t c = 0; c < n; ++c) {
    if (c == pad_id || c == target) continue;
    if (probs[c] > pt || (probs[c] == pt && c < target)) ++rank;
  }
  return rank;
}

Matrix<float> uniform_fan_in(Eigen::Index rows, Eigen::Index cols, rnd::Engine& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(cols, 1)));
  Matrix<float> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<float>(rnd::uniform(rng, -bound, bound));
  return m;
}

Matrix<float> normal_like(Eigen::Index rows, Eigen::Index cols, double mean, double stddev,
                          rnd::Engine& rng) {
  Matrix<float> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<float>(mean + stddev * rnd::normal(rng));
  return m;
}

void require_same(const char* field, std::size_t mine, std::size_t theirs) {
  if (mine != theirs)
    throw ValidationError(std::string("pretrained network differs in ") + field + " (" +
                          std::to_string(theirs) + " vs " + std::to_string(mine) + ")");
}

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& [value, name] : kVariantNames)
    if (value == v) return name;
  return "baseline";
}

Variant variant_from_string(std::string_view name) {
  for (const auto& [value, known] : kVariantNames)
    if (known == name) return value;
  throw ValidationError("unknown variant '" + std::string(name) +
                        "' (expected baseline, setup1, setup2 or setup3)");
}

PlaceScope place_scope(Variant v) {
  return v == Variant::setup1 || v == Variant::baseline ? PlaceScope::all : PlaceScope::frequent;
}

ModelConfig ModelConfig::published(Variant variant, std::size_t top_k, std::size_t all_types,
                               std::size_t frequent_types) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.output_classes = top_k + 2;
  switch (variant) {
    case Variant::baseline:
      break;
    case Variant::setup1:
      cfg.place_input_dim = all_types;
      break;
    case Variant::setup2:
      cfg.place_input_dim = frequent_types;
      break;
    case Variant::setup3:
      cfg.place_input_dim = frequent_types;
      cfg.place_dense_units = 16;
      break;
  }
  return cfg;
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden == 0 || layers == 0 || dense_units == 0)
    throw ValidationError("model sizes must be positive");
  if (output_classes < 3) throw ValidationError("model needs at least one word, unk and pad class");
  if (variant == Variant::baseline && place_input_dim != 0)
    throw ValidationError("baseline takes no place input");
  if (variant != Variant::baseline && place_input_dim == 0)
    throw ValidationError(std::string(to_string(variant)) + " needs a place input width");
  if (variant == Variant::setup3 && place_dense_units == 0)
    throw ValidationError("setup3 needs place_dense_units");
  if (variant != Variant::setup3 && place_dense_units != 0)
    throw ValidationError("only setup3 has a place dense layer");
}

std::size_t ModelConfig::place_feature_dim() const {
  switch (variant) {
    case Variant::baseline:
      return 0;
    case Variant::setup3:
      return place_dense_units;
    default:
      return place_input_dim;
  }
}

template <typename T>
NetworkParams<T> NetworkParams<T>::zeros(const ModelConfig& config) {
  config.validate();
  NetworkParams<T> p;
  p.config = config;
  const auto C = static_cast<Eigen::Index>(config.output_classes);
  const auto D = static_cast<Eigen::Index>(config.embed_dim);
  const auto H = static_cast<Eigen::Index>(config.hidden);
  p.embedding = Matrix<T>::Zero(C, D);
  p.lstm.resize(config.layers);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const Eigen::Index in = l == 0 ? D : 2 * H;
    for (auto& dir : p.lstm[l]) {
      dir.w_input = Matrix<T>::Zero(4 * H, in);
      dir.w_recurrent = Matrix<T>::Zero(4 * H, H);
      dir.bias = Matrix<T>::Zero(4 * H, 1);
    }
  }
  if (config.variant == Variant::setup3) {
    p.place_weight = Matrix<T>::Zero(static_cast<Eigen::Index>(config.place_dense_units),
                                     static_cast<Eigen::Index>(config.place_input_dim));
    p.place_bias = Matrix<T>::Zero(static_cast<Eigen::Index>(config.place_dense_units), 1);
  }
  const auto M = static_cast<Eigen::Index>(config.dense_units);
  p.dense_weight = Matrix<T>::Zero(M, static_cast<Eigen::Index>(config.concat_dim()));
  p.dense_bias = Matrix<T>::Zero(M, 1);
  p.output_weight = Matrix<T>::Zero(C, M);
  p.output_bias = Matrix<T>::Zero(C, 1);
  p.frozen_rows.assign(config.output_classes, 0);
  return p;
}

template <typename T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix<T>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
template <typename U>
NetworkParams<U> NetworkParams<T>::cast() const {
  NetworkParams<U> out = NetworkParams<U>::zeros(config);
  out.frozen_rows = frozen_rows;
  std::vector<const Matrix<T>*> src;
  for_each([&](const std::string&, const Matrix<T>& m) { src.push_back(&m); });
  std::size_t k = 0;
  out.for_each([&](const std::string&, Matrix<U>& m) { m = src[k++]->template cast<U>(); });
  return out;
}

template <typename T>
Matrix<T> forward(const NetworkParams<T>& params, std::span<const TrainingExample> batch) {
  check_batch(params, batch);
  if (batch.empty()) return Matrix<T>(0, static_cast<Eigen::Index>(params.config.output_classes));
  Trace<T> tr;
  run_forward(params, batch, tr);
  return softmax_columns<T>(tr.logits).transpose();
}

template <typename T>
LossAndGradients<T> loss_and_gradients(const NetworkParams<T>& params,
                                       std::span<const TrainingExample> batch,
                                       std::size_t threads) {
  if (batch.empty()) throw ValidationError("loss_and_gradients needs a nonempty batch");
  check_batch(params, batch);
  const ClassId pad = static_cast<ClassId>(params.config.output_classes - 1);
  for (std::size_t b = 0; b < batch.size(); ++b)
    if (batch[b].target >= pad)
      throw ValidationError("example " + std::to_string(b) + " targets pad or an unknown class");

  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<NetworkParams<T>> partial(chunks);
  std::vector<double> losses(chunks, 0.0);
  std::vector<std::exception_ptr> errors(chunks);
  auto work = [&](std::size_t c) {
    try {
      partial[c] = NetworkParams<T>::zeros(params.config);
      const std::size_t begin = c * kChunk;
      const std::size_t len = std::min(kChunk, batch.size() - begin);
      losses[c] = backward_chunk(params, batch.subspan(begin, len), begin, partial[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) work(c);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  LossAndGradients<T> out;
  out.gradients = std::move(partial[0]);
  double loss = losses[0];
  std::vector<Matrix<T>*> acc = arrays_of(out.gradients);
  for (std::size_t c = 1; c < chunks; ++c) {
    loss += losses[c];
    std::vector<Matrix<T>*> part = arrays_of(partial[c]);
    for (std::size_t k = 0; k < acc.size(); ++k) *acc[k] += *part[k];
  }
  const T scale = T(1) / static_cast<T>(batch.size());
  for (Matrix<T>* m : acc) *m *= scale;
  for (std::size_t r = 0; r < params.frozen_rows.size(); ++r)
    if (params.frozen_rows[r]) out.gradients.embedding.row(static_cast<Eigen::Index>(r)).setZero();
  out.gradients.frozen_rows = params.frozen_rows;
  out.loss = static_cast<T>(loss / static_cast<double>(batch.size()));
  return out;
}

template <typename T>
std::vector<ClassId> predict_topk(const NetworkParams<T>& params, const TrainingExample& example,
                                  std::size_t k_best) {
  const std::size_t C = params.config.output_classes;
  if (k_best < 1 || k_best > C - 1)
    throw ValidationError("k_best must lie in [1, " + std::to_string(C - 1) + "]");
  const Matrix<T> probs = forward(params, std::span<const TrainingExample>(&example, 1));
  const Eigen::Matrix<T, Eigen::Dynamic, 1> row = probs.row(0).transpose();
  return rank_row(row.data(), C, static_cast<ClassId>(C - 1), k_best);
}

std::vector<ClassId> rank_classes(std::span<const float> probs, ClassId pad_id,
                                  std::size_t k_best) {
  return rank_row(probs.data(), probs.size(), pad_id, k_best);
}

NetworkParams<float> init_params(const ModelConfig& config, const EmbeddingTable* table,
                                 const Vocabulary& vocab, const NetworkParams<float>* pretrained,
                                 std::uint64_t seed) {
  NetworkParams<float> p = NetworkParams<float>::zeros(config);
  if (vocab.num_classes() != config.output_classes)
    throw ValidationError("vocabulary has " + std::to_string(vocab.num_classes()) +
                          " classes but the model expects " +
                          std::to_string(config.output_classes));
  if (table && table->dim() != config.embed_dim)
    throw ValidationError("embedding table dimension " + std::to_string(table->dim()) +
                          " does not match embed_dim " + std::to_string(config.embed_dim));
  if (pretrained) {
    const ModelConfig& pc = pretrained->config;
    require_same("embed_dim", config.embed_dim, pc.embed_dim);
    require_same("hidden", config.hidden, pc.hidden);
    require_same("layers", config.layers, pc.layers);
    require_same("dense_units", config.dense_units, pc.dense_units);
    require_same("output_classes", config.output_classes, pc.output_classes);
  }
  rnd::Engine rng(seed);
  const auto H = static_cast<Eigen::Index>(config.hidden);

  // Embedding.
  if (pretrained) {
    p.embedding = pretrained->embedding;
    if (config.embeddings_frozen) p.frozen_rows = pretrained->frozen_rows;
  } else {
    std::vector<double> spread(config.embed_dim, kNoTableEmbeddingStd);
    if (table && table->size() > 1) spread = table->per_dimension_std();
    for (std::size_t c = 0; c < config.output_classes; ++c) {
      const auto row = static_cast<Eigen::Index>(c);
      const std::vector<float>* vec =
          table && c < vocab.top_k() ? table->find(vocab.decode(static_cast<ClassId>(c))) : nullptr;
      if (vec) {
        for (std::size_t d = 0; d < config.embed_dim; ++d)
          p.embedding(row, static_cast<Eigen::Index>(d)) = (*vec)[d];
        p.frozen_rows[c] = config.embeddings_frozen ? 1 : 0;
      } else {
        for (std::size_t d = 0; d < config.embed_dim; ++d)
          p.embedding(row, static_cast<Eigen::Index>(d)) =
              static_cast<float>(spread[d] * rnd::normal(rng));
      }
    }
  }

  // Recurrent stack.
  for (std::size_t l = 0; l < config.layers; ++l) {
    for (std::size_t d = 0; d < 2; ++d) {
      LstmDirection<float>& w = p.lstm[l][d];
      if (pretrained) {
        w = pretrained->lstm[l][d];
        continue;
      }
      w.w_input = uniform_fan_in(w.w_input.rows(), w.w_input.cols(), rng);
      w.w_recurrent = uniform_fan_in(w.w_recurrent.rows(), w.w_recurrent.cols(), rng);
      w.bias.setZero();
      w.bias.middleRows(H, H).setOnes();
    }
  }

  // Dense, place branch and output.
  const auto place_cols = static_cast<Eigen::Index>(config.place_feature_dim());
  if (pretrained) {
    const Matrix<float>& pw = pretrained->dense_weight;
    const double mean = pw.cast<double>().mean();
    const double var = (pw.cast<double>().array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (config.variant == Variant::setup3) {
      p.place_weight = normal_like(p.place_weight.rows(), p.place_weight.cols(), mean, sd, rng);
      p.place_bias.setZero();
    }
    p.dense_weight.leftCols(2 * H) = pw.leftCols(2 * H);
    if (place_cols > 0)
      p.dense_weight.rightCols(place_cols) =
          normal_like(p.dense_weight.rows(), place_cols, mean, sd, rng);
    p.dense_bias = pretrained->dense_bias;
    p.output_weight = pretrained->output_weight;
    p.output_bias = pretrained->output_bias;
  } else {
    if (config.variant == Variant::setup3)
      p.place_weight = uniform_fan_in(p.place_weight.rows(), p.place_weight.cols(), rng);
    p.dense_weight = uniform_fan_in(p.dense_weight.rows(), p.dense_weight.cols(), rng);
    p.output_weight = uniform_fan_in(p.output_weight.rows(), p.output_weight.cols(), rng);
  }
  return p;
}

std::vector<std::size_t> target_ranks(const NetworkParams<float>& params,
                                      std::span<const TrainingExample> examples,
                                      std::size_t batch_size) {
  const std::size_t C = params.config.output_classes;
  const auto pad = static_cast<ClassId>(C - 1);
  std::vector<std::size_t> ranks;
  ranks.reserve(examples.size());
  for (std::size_t begin = 0; begin < examples.size(); begin += batch_size) {
    const auto batch = examples.subspan(begin, std::min(batch_size, examples.size() - begin));
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> probs =
        forward(params, batch);
    for (std::size_t b = 0; b < batch.size(); ++b)
      ranks.push_back(rank_of(probs.data() + b * C, C, pad, batch[b].target));
  }
  return ranks;
}

std::pair<double, double> evaluate_top1_top5(const NetworkParams<float>& params,
                                             std::span<const TrainingExample> examples,
                                             std::size_t batch_size) {
  if (examples.empty()) throw ValidationError("cannot evaluate on an empty set");
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t r : target_ranks(params, examples, batch_size)) {
    if (r < 1) ++hit1;
    if (r < 5) ++hit5;
  }
  const auto n = static_cast<double>(examples.size());
  return {static_cast<double>(hit1) / n, static_cast<double>(hit5) / n};
}

TrainResult train(NetworkParams<float> params, const TrainConfig& cfg,
                  std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> validation_set, const EpochCallback& on_epoch) {
  TrainResult result;
  result.params = params;
  if (cfg.epochs == 0) return result;
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (validation_set.empty()) throw ValidationError("validation set is empty");
  if (cfg.batch_size == 0) throw ValidationError("batch size must be positive");

  NetworkParams<float> m = NetworkParams<float>::zeros(params.config);
  NetworkParams<float> v = NetworkParams<float>::zeros(params.config);
  std::vector<Matrix<float>*> p_arr = arrays_of(params);
  std::vector<Matrix<float>*> m_arr = arrays_of(m);
  std::vector<Matrix<float>*> v_arr = arrays_of(v);
  std::uint64_t step = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainingExample> batch;
  batch.reserve(cfg.batch_size);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rnd::Engine rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * epoch));
    rnd::shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(train_set[order[k]]);

      LossAndGradients<float> lg;
      try {
        lg = loss_and_gradients(params, std::span<const TrainingExample>(batch), cfg.threads);
      } catch (const NumericalError& e) {
        result.diverged = true;
        result.message = "epoch " + std::to_string(epoch) + ", batch starting at " +
                         std::to_string(begin) + ": " + e.what();
        return result;
      }
      loss_sum += static_cast<double>(lg.loss) * static_cast<double>(batch.size());

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      const auto lr = static_cast<float>(cfg.learning_rate / bc1);
      const auto inv_bc2 = static_cast<float>(1.0 / bc2);
      const auto eps = static_cast<float>(cfg.epsilon);
      std::vector<Matrix<float>*> g_arr = arrays_of(lg.gradients);
      for (std::size_t k = 0; k < p_arr.size(); ++k) {
        auto g = g_arr[k]->array();
        m_arr[k]->array() = b1 * m_arr[k]->array() + (1.0f - b1) * g;
        v_arr[k]->array() = b2 * v_arr[k]->array() + (1.0f - b2) * g.square();
        p_arr[k]->array() -=
            lr * m_arr[k]->array() / ((v_arr[k]->array() * inv_bc2).sqrt() + eps);
      }
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss_sum / static_cast<double>(order.size());
    bool finite = std::isfinite(metrics.train_loss);
    for (const Matrix<float>* a : p_arr) finite = finite && a->allFinite();
    if (!finite) {
      result.diverged = true;
      result.message = "epoch " + std::to_string(epoch) + " produced non-finite values";
      return result;
    }
    std::tie(metrics.val_top1, metrics.val_top5) = evaluate_top1_top5(params, validation_set);
    result.params = params;
    result.log.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
  }
  return result;
}

template struct NetworkParams<float>;
template struct NetworkParams<double>;
template NetworkParams<double> NetworkParams<float>::cast<double>() const;
template NetworkParams<float> NetworkParams<double>::cast<float>() const;
template NetworkParams<float> NetworkParams<float>::cast<float>() const;
template NetworkParams<double> NetworkParams<double>::cast<double>() const;
template Matrix<float> forward(const NetworkParams<float>&, std::span<const TrainingExample>);
template Matrix<double> forward(const NetworkParams<double>&, std::span<const TrainingExample>);
template LossAndGradients<float> loss_and_gradients(const NetworkParams<float>&,
                                                    std::span<const TrainingExample>, std::size_t);
template LossAndGradients<double> loss_and_gradients(const NetworkParams<double>&,
                                                     std::span<const TrainingExample>,
                                                     std::size_t);
template std::vector<ClassId> predict_topk(const NetworkParams<float>&, const TrainingExample&,
                                           std::size_t);
template std::vector<ClassId> predict_topk(const NetworkParams<double>&, const TrainingExample&,
                                           std::size_t);

}  // namespace geolm::nn
