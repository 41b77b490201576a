#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maint/data.hpp"
#include "maint/evaluation.hpp"
#include "maint/model.hpp"
#include "maint/optim.hpp"

namespace maint {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;  // epochs without validation HR@10 improvement
  std::uint64_t seed = 1;

  void validate() const;
};

// One prediction step: events before visible_events and the first
// visible_targets target events are the input; the labels are the next
// target event's item and category.
struct SupervisionTuple {
  std::size_t visible_events = 0;
  std::size_t visible_targets = 0;
  std::size_t label_item = 0;
  std::size_t label_category = 0;
};

// One tuple per consecutive pair of target events; < 2 targets -> empty.
std::vector<SupervisionTuple> step_targets(const UserSequence& seq);

// Sum over the batch of item cross-entropy + gamma * category cross-entropy,
// plus lambda * l2_penalty over all parameters (added once per batch).
Tape::Var compute_loss(Model& model, Tape& tape,
                       const std::vector<const UserSequence*>& sequences,
                       bool training, std::mt19937_64& rng);

struct EpochStats {
  std::size_t epoch = 0;
  std::size_t n_batches = 0;
  std::size_t n_tuples = 0;
  double mean_batch_loss = 0.0;
  double seconds = 0.0;
  double tuples_per_second = 0.0;
};

// One pass of seeded mini-batches: forward, backward, adam_step per batch.
// Throws TrainingError naming the batch when the loss is non-finite.
EpochStats train_epoch(Model& model, const DatasetSplit& split,
                       const TrainConfig& config, std::size_t epoch);

struct ParamSnapshot {
  std::string name;
  Tensor value, adam_m, adam_v;
  std::uint64_t step_count = 0;
};

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  std::size_t epoch = 0;
  std::vector<double> validation_history;  // HR@10 per epoch
  std::vector<ParamSnapshot> params;
};

Checkpoint snapshot(Model& model, const TrainConfig& config, std::size_t epoch,
                    const std::vector<double>& validation_history);
// Writes values and optimizer state back; names/shapes must match.
void restore(Model& model, const Checkpoint& ckpt);

// Binary tensor file (magic, version, text manifest, float64 payload) plus a
// human-readable <path>.meta config snapshot.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct FitHistoryEntry {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_hr10 = 0.0;
};

struct FitResult {
  Checkpoint best;
  std::size_t best_epoch = 0;
  double best_hr10 = 0.0;
  std::vector<FitHistoryEntry> history;
};

// Algorithm loop with early stopping on validation HR@10. The model is left
// holding the best checkpoint's parameters.
FitResult fit(Model& model, const DatasetSplit& split, const TrainConfig& config);

struct GradCheckGroup {
  std::string name;
  double worst_rel_err = 0.0;
};

// End-to-end finite-difference check of the full loss on the given sequences.
// The step is wide because toy-scale gradients reach 1e-8, where narrow
// central differences are cancellation-noise dominated.
std::vector<GradCheckGroup> gradient_check(Model& model,
                                           const std::vector<UserSequence>& sequences,
                                           double h = 1e-3);

}  // namespace maint
