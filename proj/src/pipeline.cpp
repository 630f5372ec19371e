#include "swps/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace swps {

void PipelineConfig::validate() const {
  preprocess.validate();
  window.validate();
  if (window.w > preprocess.target_length) {
    throw ConfigError("window.w exceeds preprocess.target_length");
  }
  const auto& a = geometry.augment_ranges;
  if (!(a.scale >= 0.0 && a.scale < 1.0)) throw ConfigError("geometry.scale_jitter must lie in [0, 1)");
  if (!(a.shift >= 0.0)) throw ConfigError("geometry.translate_jitter must be >= 0");
  if (!(a.elastic_max >= 0.0)) throw ConfigError("geometry.elastic_max must be >= 0");
  if (!(geometry.rotation_range >= 0.0 && geometry.rotation_range <= kPi + 1e-12)) {
    throw ConfigError("geometry.rotation_range must lie in [0, 180] degrees");
  }
}

std::vector<Example> prepare_examples(const Dataset& dataset, const PreprocessConfig& cfg) {
  std::vector<Example> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out.push_back({prepare_trajectory(dataset.samples[i].trajectory, cfg), dataset.label_of(i), 0.0});
  }
  return out;
}

FeatureSequence feature_sequence(const Trajectory& prepared, double rotation,
                                 const AugmentParams* aug, const PipelineConfig& cfg,
                                 bool* degenerate) {
  Trajectory t = rotation != 0.0 ? rotate(prepared, rotation) : prepared;
  if (aug) t = augment(t, *aug);
  bool flagged = false;
  if (cfg.geometry.hanging) {
    try {
      t = hanging_normalize(t, cfg.geometry.mode);
    } catch (const DegenerateKeypoints&) {
      flagged = true;
    }
  }
  if (degenerate) *degenerate = flagged;
  return assemble_features(t, cfg.preprocess);
}

Featurized featurize(const Trajectory& prepared, double rotation, const AugmentParams* aug,
                     const PipelineConfig& cfg) {
  Featurized f;
  const FeatureSequence seq = feature_sequence(prepared, rotation, aug, cfg, &f.degenerate);
  f.windows = sliding_window_signature(seq.rows, cfg.window);
  return f;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace swps
