#pragma once

#include <functional>
#include <vector>

#include "swps/geometry.hpp"
#include "swps/ingest.hpp"
#include "swps/preprocess.hpp"
#include "swps/signature.hpp"

namespace swps {

struct GeometryConfig {
  bool hanging = true;
  HangingMode mode = HangingMode::SC;
  /// Training rotations are uniform on [-rotation_range, rotation_range].
  double rotation_range = kPi;
  bool augment = true;
  AugmentRanges augment_ranges;
};

/// Everything that maps a trajectory to a window-signature matrix.
struct PipelineConfig {
  PreprocessConfig preprocess;
  GeometryConfig geometry;
  WindowSpec window;

  void validate() const;
  int feature_dim() const { return sig_dim(col::kCount, window.m); }
  int window_count() const { return window.window_count(preprocess.target_length); }
};

/// A labeled trajectory after the orientation-independent stages
/// (redundancy removal, size normalization, resampling), plus the rotation
/// the pipeline applies to it.
struct Example {
  Trajectory prepared;
  int label = 0;
  double rotation = 0.0;
};

std::vector<Example> prepare_examples(const Dataset& dataset, const PreprocessConfig& cfg);

struct Featurized {
  RowMatrix windows;      // K x feature_dim
  bool degenerate = false;  // hanging keypoints coincided; identity was used
};

/// rotate -> augment (when `aug` is non-null) -> hanging normalization ->
/// 9-channel features -> sliding-window signatures.
Featurized featurize(const Trajectory& prepared, double rotation, const AugmentParams* aug,
                     const PipelineConfig& cfg);

/// 9-channel sequence for the same stages, without the signature step.
FeatureSequence feature_sequence(const Trajectory& prepared, double rotation,
                                 const AugmentParams* aug, const PipelineConfig& cfg,
                                 bool* degenerate = nullptr);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results to pre-sized slots.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace swps
