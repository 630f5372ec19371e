#pragma once

#include <string>

#include "swps/common.hpp"
#include "swps/trajectory.hpp"

namespace swps {

/// Rotation by `alpha` radians about the origin in row-vector form:
/// [x', y'] = [x, y] * [[cos a, -sin a], [sin a, cos a]].
Trajectory rotate(const Trajectory& traj, double alpha);

struct AugmentParams {
  double scale_x = 0.0;  // dx
  double scale_y = 0.0;  // dy
  double shift_x = 0.0;  // dtx
  double shift_y = 0.0;  // dty
  double elastic = 0.0;  // epsilon, >= 0
};

/// Symmetric sampling ranges for AugmentParams.
struct AugmentRanges {
  double scale = 0.1;
  double shift = 0.05;
  double elastic_max = 0.05;
};

AugmentParams sample_augment(const AugmentRanges& ranges, Rng& rng);

/// x' = x(1 + dx) + dtx, y' = y(1 + dy) + dty.
Trajectory affine_jitter(const Trajectory& traj, const AugmentParams& params);

/// x'' = x' + eps sin(2 pi y'), y'' = y' + eps sin(2 pi x').
Trajectory elastic_distort(const Trajectory& traj, double eps);

/// Affine jitter followed by elastic distortion.
Trajectory augment(const Trajectory& traj, const AugmentParams& params);

enum class HangingMode { SC, SE, ASE };

HangingMode parse_hanging_mode(const std::string& name);
std::string to_string(HangingMode mode);

struct Keypoints {
  Point first;   // S: the point that ends up on top
  Point second;  // C (or end point) that ends up directly below
};

Keypoints hanging_keypoints(const Trajectory& traj, HangingMode mode);

/// Rotates the trajectory about the first keypoint so that the second one
/// lies directly below it, then translates the first keypoint to the origin.
/// The result depends only on the shape, not on its orientation or position.
///
/// Throws DegenerateKeypoints if the keypoints are closer than 1e-9.
Trajectory hanging_normalize(const Trajectory& traj, HangingMode mode = HangingMode::SC);

}  // namespace swps
