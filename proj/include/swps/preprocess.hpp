#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "swps/common.hpp"
#include "swps/trajectory.hpp"

namespace swps {

/// Per-step pen state and its two-channel encoding.
enum class PenState { PenDown, Continuous, PenUp };

std::array<double, 2> pen_vector(PenState state);

/// Column layout of a feature sequence.
namespace col {
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kInk = 2;
inline constexpr int kPen1 = 3;
inline constexpr int kPen2 = 4;
inline constexpr int kDx = 5;
inline constexpr int kDy = 6;
inline constexpr int kDdx = 7;
inline constexpr int kDdy = 8;
inline constexpr int kCount = 9;
}  // namespace col

enum class PadPolicy { RepeatLast };

struct PreprocessConfig {
  double redundancy_tol = 1e-3;   // unit-box units
  double resample_spacing = 0.02; // unit-box arc length
  int target_length = 128;
  PadPolicy pad_policy = PadPolicy::RepeatLast;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Fixed-length L x 9 feature matrix; mask[i] is true for real steps.
struct FeatureSequence {
  RowMatrix rows;
  std::vector<std::uint8_t> mask;

  int length() const { return static_cast<int>(rows.rows()); }
  int real_length() const;
};

/// Collapses near-duplicate neighbours and drops interior points that lie
/// within `tol` of the chord joining their neighbours. Repeats until nothing
/// changes, so the result is a fixed point. Stroke endpoints are kept.
Trajectory remove_redundant(const Trajectory& traj, double tol);

/// Scales by the longer bounding-box side and centres the box on the origin.
/// Returns the scale factor applied through `scale_out` when non-null.
Trajectory size_normalize(const Trajectory& traj, double* scale_out = nullptr);

/// Replaces each stroke by points equally spaced in arc length. The stroke
/// length is split into round(length / spacing) equal pieces (at least one),
/// so both endpoints are always present and the interval stays within a
/// factor 1.5 of `spacing`. Zero-length strokes keep a single point.
Trajectory resample_penspeed(const Trajectory& traj, double spacing);

/// First and second backward differences with a zero first entry.
std::pair<std::vector<double>, std::vector<double>> derivative_features(
    std::span<const double> x);

/// Affine map of each selected column onto [-1, 1]; constant columns become 0.
void scale_channels(RowMatrix& m, std::span<const int> channels);

/// Truncates or pads to `length` rows. Padding repeats the last row with the
/// derivative channels zeroed and the pen vector set to Continuous.
std::pair<RowMatrix, std::vector<std::uint8_t>> fit_length(const RowMatrix& rows, int length,
                                                           PadPolicy policy = PadPolicy::RepeatLast);

/// Builds the 9-channel sequence [x, y, ink, p1, p2, dx, dy, ddx, ddy].
/// Throws std::invalid_argument for an empty trajectory.
FeatureSequence assemble_features(const Trajectory& traj, const PreprocessConfig& cfg);

/// remove_redundant, size_normalize and resample_penspeed in that order.
/// The redundancy tolerance is given in unit-box units and converted to
/// source units before the first stage.
Trajectory prepare_trajectory(const Trajectory& raw, const PreprocessConfig& cfg);

}  // namespace swps
