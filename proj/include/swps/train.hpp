#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swps/lru_net.hpp"
#include "swps/pipeline.hpp"

namespace swps {

struct TrainConfig {
  double lr0 = 1e-3;
  double lr_decay = 0.5;
  long step_period = 4500;  // optimizer steps (batches) between decays
  double lr_min = 1e-6;
  double clip_norm = 1.0;
  double l2 = 1e-4;
  double dropout = 0.3;
  int batch_size = 64;
  int epochs = 300;
  std::uint64_t seed = 0;
  /// Evaluate the validation set every `val_every` epochs (and always on the
  /// last one). 0 disables validation.
  int val_every = 1;
  int threads = 1;

  void validate() const;
};

/// max(lr_min, lr0 * lr_decay^floor(step / step_period)).
double lr_at(long step, const TrainConfig& cfg);

/// Scales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global(LruParams& grads, double max_norm);

struct AdamState {
  LruParams m;
  LruParams v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const LruParams& params);
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, LruParams& params, const LruParams& grads, double lr);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;
  double lr = 0.0;  // rate used by the last step of the epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,loss,train_acc,val_acc,lr with an empty val_acc when absent.
  std::string to_csv() const;
};

struct TrainCallbacks {
  /// Called after each epoch; returning false stops training.
  std::function<bool(const EpochRecord&, const LruModel&)> on_epoch;
};

struct TrainResult {
  LruModel model;                 // parameters after the last epoch
  std::optional<LruModel> best;   // best validation accuracy, if validated
  TrainHistory history;
  long steps = 0;
};

/// Mini-batch training. Each epoch shuffles the set, draws a fresh rotation
/// and augmentation per sample presentation, featurizes, and takes one
/// clipped Adam step per batch. Deterministic for a fixed seed.
TrainResult train_loop(LruModel model, const std::vector<Example>& train,
                       const std::vector<Example>* validation, const TrainConfig& cfg,
                       const PipelineConfig& pipeline, const TrainCallbacks& callbacks = {});

}  // namespace swps
