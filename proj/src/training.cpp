#include "xglad/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "xglad/rng.hpp"

namespace xglad {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::uint64_t kSaltEpoch = 0x65706f63;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (!(learning_rate > 0.0) && learning_rate != 0.0)
    throw ConfigError("train: learning_rate must be non-negative");
  if (grad_clip < 0.0) throw ConfigError("train: grad_clip must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be non-negative");
  loss.validate();
  if (loss.beta > 0.0 && !two_extractor)
    throw ConfigError("train: beta > 0 requires two_extractor");
}

ModelConfig TrainConfig::model_config(int feat_dim, int dual_feat_dim) const {
  ModelConfig mc;
  mc.feat_dim = feat_dim;
  mc.dual_feat_dim = dual_feat_dim;
  mc.layers_enc = layers_enc;
  mc.dim_enc = dim_enc;
  mc.extractor = extractor;
  mc.layers_ext = layers_ext;
  mc.dim_ext = dim_ext;
  mc.two_extractor = two_extractor;
  return mc;
}

ModelState init_params(const TrainConfig& cfg, int feat_dim, int dual_feat_dim) {
  cfg.validate();
  ModelState state;
  state.cfg = cfg;
  state.seed = cfg.seed;
  state.model = build_model(cfg.model_config(feat_dim, dual_feat_dim));
  Rng rng(cfg.seed);
  visit_params(state.model, [&rng](const std::string& name, Tensor& t) {
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) return;  // biases stay zero
    const double bound = std::sqrt(6.0 / (t.rows() + t.cols()));
    for (double& v : t.values()) v = rng_uniform(rng, -bound, bound);
  });
  visit_params(state.model, [&state](const std::string&, Tensor& t) {
    state.adam_m.emplace_back(t.rows(), t.cols());
    state.adam_v.emplace_back(t.rows(), t.cols());
  });
  return state;
}

void zero_all_grads(Model& m) {
  visit_params(m, [](const std::string&, Tensor& t) { t.zero_grad(); });
}

void adam_step(ModelState& state) {
  ++state.step;
  const double lr = state.cfg.learning_rate;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  std::size_t slot = 0;
  visit_params(state.model, [&](const std::string&, Tensor& t) {
    std::vector<double>& m = state.adam_m[slot].values();
    std::vector<double>& v = state.adam_v[slot].values();
    const std::vector<double>& g = t.grad();
    std::vector<double>& p = t.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p[i] -= lr * mh / (std::sqrt(vh) + kAdamEps);
    }
    ++slot;
  });
}

namespace {

void clip_gradients(Model& m, double max_norm) {
  double sq = 0.0;
  visit_params(m, [&sq](const std::string&, const Tensor& t) {
    for (double g : t.grad()) sq += g * g;
  });
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  visit_params(m, [factor](const std::string&, Tensor& t) {
    for (double& g : t.grad_ref()) g *= factor;
  });
}

}  // namespace

double train_epoch(ModelState& state, const std::vector<Graph>& train) {
  const TrainConfig& cfg = state.cfg;
  if (train.size() < 2) throw UsageError("train_epoch: need at least 2 training graphs");
  const int batch_size = std::min<int>(cfg.batch_size, static_cast<int>(train.size()));

  std::vector<int> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(mix_seed(state.seed, kSaltEpoch + static_cast<std::uint64_t>(state.epoch)));
  rng_shuffle(order, rng);

  double total = 0.0;
  int batches = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start < 2) break;  // drop the ragged tail
    std::vector<Graph> batch;
    batch.reserve(end - start);
    for (std::size_t k = start; k < end; ++k)
      batch.push_back(train[static_cast<std::size_t>(order[k])]);
    const GraphBatch gb = batch_graphs(batch);

    zero_all_grads(state.model);
    double loss_value;
    {
      Tape tape;
      const BatchForward out = forward_batch(state.model, gb);
      const Tensor loss = training_loss(out, cfg.loss, cfg.two_extractor);
      loss_value = loss.item();
      if (!std::isfinite(loss_value))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(state.epoch) +
                              ", batch " + std::to_string(batches));
      tape.backward(loss);
    }
    if (cfg.grad_clip > 0.0) clip_gradients(state.model, cfg.grad_clip);
    adam_step(state);
    total += loss_value;
    ++batches;
  }
  ++state.epoch;
  return batches > 0 ? total / batches : std::numeric_limits<double>::quiet_NaN();
}

ModelState fit(const std::vector<Graph>& train, const TrainConfig& cfg,
               const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw UsageError("fit: empty training set");
  std::vector<Graph> usable;
  usable.reserve(train.size());
  for (const Graph& g : train)
    if (g.num_edges() > 0) usable.push_back(g);
  if (usable.size() < train.size() && on_epoch)
    on_epoch(-1, static_cast<double>(train.size() - usable.size()));  // dropped edgeless count
  if (usable.size() < 2) throw UsageError("fit: need at least 2 training graphs with edges");

  ModelState state = init_params(cfg, usable[0].feature_dim(),
                                 usable[0].edge_features ? usable[0].edge_features->cols()
                                                         : usable[0].feature_dim());
  for (int e = 0; e < cfg.epochs; ++e) {
    const double loss = train_epoch(state, usable);
    if (on_epoch) on_epoch(state.epoch, loss);
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        state.epoch % cfg.checkpoint_every == 0)
      save_checkpoint(state, cfg.checkpoint_path);
  }
  return state;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "checkpoints assume IEEE-754 doubles");

constexpr char kMagic[4] = {'X', 'G', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string get_string(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw DataError("checkpoint: truncated file");
  return s;
}

void put_tensor_values(std::ostream& out, const Tensor& t) {
  for (double v : t.values()) put_f64(out, v);
}

void get_tensor_values(std::istream& in, Tensor& t) {
  for (double& v : t.values()) v = get_f64(in);
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot write " + tmp.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);

    const TrainConfig& c = state.cfg;
    put_u32(out, static_cast<std::uint32_t>(c.epochs));
    put_f64(out, c.learning_rate);
    put_u32(out, static_cast<std::uint32_t>(c.batch_size));
    put_u64(out, c.seed);
    put_string(out, estimator_name(c.loss.estimator));
    put_f64(out, c.loss.temperature);
    put_f64(out, c.loss.beta);
    put_string(out, negative_mode_name(c.loss.negative_mode));
    put_u32(out, static_cast<std::uint32_t>(c.layers_enc));
    put_u32(out, static_cast<std::uint32_t>(c.dim_enc));
    put_string(out, extractor_kind_name(c.extractor));
    put_u32(out, static_cast<std::uint32_t>(c.layers_ext));
    put_u32(out, static_cast<std::uint32_t>(c.dim_ext));
    put_u32(out, c.two_extractor ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(c.checkpoint_every));
    put_f64(out, c.grad_clip);
    put_u32(out, static_cast<std::uint32_t>(state.model.cfg.feat_dim));
    put_u32(out, static_cast<std::uint32_t>(state.model.cfg.dual_feat_dim));

    put_u64(out, static_cast<std::uint64_t>(state.step));
    put_u32(out, static_cast<std::uint32_t>(state.epoch));
    put_u64(out, state.seed);

    std::uint32_t count = 0;
    visit_params(state.model, [&count](const std::string&, const Tensor&) { ++count; });
    put_u32(out, count);
    visit_params(state.model, [&out](const std::string& name, const Tensor& t) {
      put_string(out, name);
      put_u32(out, static_cast<std::uint32_t>(t.rows()));
      put_u32(out, static_cast<std::uint32_t>(t.cols()));
      put_tensor_values(out, t);
    });
    for (const Tensor& t : state.adam_m) put_tensor_values(out, t);
    for (const Tensor& t : state.adam_v) put_tensor_values(out, t);
    if (!out) throw DataError("checkpoint: write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint: corrupt header in " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw DataError("checkpoint: incompatible version " + std::to_string(version) +
                    " (expected " + std::to_string(kVersion) + ")");

  TrainConfig c;
  c.epochs = static_cast<int>(get_u32(in));
  c.learning_rate = get_f64(in);
  c.batch_size = static_cast<int>(get_u32(in));
  c.seed = get_u64(in);
  c.loss.estimator = parse_estimator(get_string(in));
  c.loss.temperature = get_f64(in);
  c.loss.beta = get_f64(in);
  c.loss.negative_mode = parse_negative_mode(get_string(in));
  c.layers_enc = static_cast<int>(get_u32(in));
  c.dim_enc = static_cast<int>(get_u32(in));
  c.extractor = parse_extractor_kind(get_string(in));
  c.layers_ext = static_cast<int>(get_u32(in));
  c.dim_ext = static_cast<int>(get_u32(in));
  c.two_extractor = get_u32(in) != 0;
  c.checkpoint_every = static_cast<int>(get_u32(in));
  c.grad_clip = get_f64(in);
  const int feat_dim = static_cast<int>(get_u32(in));
  const int dual_feat_dim = static_cast<int>(get_u32(in));

  ModelState state;
  state.cfg = c;
  state.step = static_cast<std::int64_t>(get_u64(in));
  state.epoch = static_cast<int>(get_u32(in));
  state.seed = get_u64(in);
  state.model = build_model(c.model_config(feat_dim, dual_feat_dim));

  const std::uint32_t count = get_u32(in);
  std::uint32_t expected = 0;
  visit_params(state.model, [&expected](const std::string&, const Tensor&) { ++expected; });
  if (count != expected)
    throw DataError("checkpoint: parameter count " + std::to_string(count) + " does not match " +
                    std::to_string(expected));
  visit_params(state.model, [&in, &path](const std::string& name, Tensor& t) {
    const std::string stored = get_string(in);
    const int rows = static_cast<int>(get_u32(in));
    const int cols = static_cast<int>(get_u32(in));
    if (stored != name || rows != t.rows() || cols != t.cols())
      throw DataError("checkpoint: tensor '" + stored + "' does not match expected '" + name +
                      "' in " + path);
    get_tensor_values(in, t);
  });
  visit_params(state.model, [&state](const std::string&, const Tensor& t) {
    state.adam_m.emplace_back(t.rows(), t.cols());
    state.adam_v.emplace_back(t.rows(), t.cols());
  });
  for (Tensor& t : state.adam_m) get_tensor_values(in, t);
  for (Tensor& t : state.adam_v) get_tensor_values(in, t);
  return state;
}

}  // namespace xglad
