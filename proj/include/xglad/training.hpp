#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xglad/model.hpp"
#include "xglad/objective.hpp"

namespace xglad {

struct TrainConfig {
  int epochs = 1000;
  double learning_rate = 1e-2;
  int batch_size = 64;  // clipped to the dataset size, last ragged batch kept if >= 2
  std::uint64_t seed = 1;
  LossConfig loss;
  int layers_enc = 5;
  int dim_enc = 16;
  ExtractorKind extractor = ExtractorKind::gnn;
  int layers_ext = 2;
  int dim_ext = 16;
  bool two_extractor = false;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 disables
  std::string checkpoint_path;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  void validate() const;
  ModelConfig model_config(int feat_dim, int dual_feat_dim) const;
};

// Trainable parameters plus optimizer state. The rng state is the
// (seed, epoch) pair: every epoch reseeds its shuffle stream from them, so
// a restored checkpoint resumes the exact same draw sequence.
struct ModelState {
  Model model;
  TrainConfig cfg;
  std::vector<Tensor> adam_m, adam_v;  // aligned with visit_params order
  std::int64_t step = 0;               // adam timestep t
  int epoch = 0;
  std::uint64_t seed = 0;
};

// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases,
// zero moments; deterministic under cfg.seed.
ModelState init_params(const TrainConfig& cfg, int feat_dim, int dual_feat_dim);

// One bias-corrected adaptive-moment step over all parameters; gradients are
// read from the tensors' grad buffers.
void adam_step(ModelState& state);

void zero_all_grads(Model& m);

// One pass over the training set: epoch-seeded shuffle, batched forward /
// loss / backward / optimizer step. Returns the mean batch loss. Batches
// smaller than 2 at the tail are dropped. Throws DivergenceError (with
// epoch and batch index) on a non-finite loss.
double train_epoch(ModelState& state, const std::vector<Graph>& train);

using EpochCallback = std::function<void(int epoch, double loss)>;

// Full optimization loop; checkpoints every cfg.checkpoint_every epochs when
// enabled. Training graphs without edges cannot enter the dual view and are
// skipped (their count is reported through the callback channel as epoch -1).
ModelState fit(const std::vector<Graph>& train, const TrainConfig& cfg,
               const EpochCallback& on_epoch = nullptr);

// Binary checkpoint with magic/version header; save is atomic
// (temp file + rename) and the roundtrip is bit-exact for parameters and
// optimizer moments.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace xglad
