#include "swps/geometry.hpp"

#include <cmath>

namespace swps {

namespace {

template <class F>
Trajectory map_points(const Trajectory& traj, F&& f) {
  Trajectory out = traj;
  for (auto& s : out.strokes)
    for (auto& p : s) p = f(p);
  return out;
}

Point rotate_point(Point p, double c, double s) {
  return {p.x * c + p.y * s, -p.x * s + p.y * c};
}

}  // namespace

Trajectory rotate(const Trajectory& traj, double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  return map_points(traj, [&](Point p) { return rotate_point(p, c, s); });
}

AugmentParams sample_augment(const AugmentRanges& r, Rng& rng) {
  AugmentParams p;
  p.scale_x = uniform(rng, -r.scale, r.scale);
  p.scale_y = uniform(rng, -r.scale, r.scale);
  p.shift_x = uniform(rng, -r.shift, r.shift);
  p.shift_y = uniform(rng, -r.shift, r.shift);
  p.elastic = uniform(rng, 0.0, r.elastic_max);
  return p;
}

Trajectory affine_jitter(const Trajectory& traj, const AugmentParams& a) {
  return map_points(traj, [&](Point p) {
    return Point{p.x * (1.0 + a.scale_x) + a.shift_x, p.y * (1.0 + a.scale_y) + a.shift_y};
  });
}

Trajectory elastic_distort(const Trajectory& traj, double eps) {
  if (eps < 0.0) throw std::invalid_argument("elastic strength must be non-negative");
  if (eps == 0.0) return traj;
  return map_points(traj, [&](Point p) {
    return Point{p.x + eps * std::sin(2.0 * kPi * p.y), p.y + eps * std::sin(2.0 * kPi * p.x)};
  });
}

Trajectory augment(const Trajectory& traj, const AugmentParams& params) {
  return elastic_distort(affine_jitter(traj, params), params.elastic);
}

HangingMode parse_hanging_mode(const std::string& name) {
  if (name == "SC" || name == "sc") return HangingMode::SC;
  if (name == "SE" || name == "se") return HangingMode::SE;
  if (name == "ASE" || name == "ase") return HangingMode::ASE;
  throw ConfigError("unknown hanging mode '" + name + "' (expected SC, SE or ASE)");
}

std::string to_string(HangingMode mode) {
  switch (mode) {
    case HangingMode::SC: return "SC";
    case HangingMode::SE: return "SE";
    case HangingMode::ASE: return "ASE";
  }
  return "?";
}

Keypoints hanging_keypoints(const Trajectory& traj, HangingMode mode) {
  if (traj.empty()) throw DegenerateKeypoints("empty trajectory");
  const Point start = traj.strokes.front().front();
  switch (mode) {
    case HangingMode::SC: {
      double sx = 0.0, sy = 0.0;
      std::size_t n = 0;
      for (const auto& s : traj.strokes) {
        for (const auto& p : s) {
          sx += p.x;
          sy += p.y;
          ++n;
        }
      }
      return {start, {sx / static_cast<double>(n), sy / static_cast<double>(n)}};
    }
    case HangingMode::SE:
      return {start, traj.strokes.back().back()};
    case HangingMode::ASE: {
      Point a, b;
      std::size_t n = 0;
      for (const auto& s : traj.strokes) {
        if (s.empty()) continue;
        a.x += s.front().x;
        a.y += s.front().y;
        b.x += s.back().x;
        b.y += s.back().y;
        ++n;
      }
      const double k = 1.0 / static_cast<double>(n);
      return {{a.x * k, a.y * k}, {b.x * k, b.y * k}};
    }
  }
  throw std::logic_error("unreachable");
}

Trajectory hanging_normalize(const Trajectory& traj, HangingMode mode) {
  const Keypoints kp = hanging_keypoints(traj, mode);
  const double dx = kp.second.x - kp.first.x;
  const double dy = kp.second.y - kp.first.y;
  if (std::hypot(dx, dy) <= 1e-9) {
    throw DegenerateKeypoints("hanging keypoints coincide");
  }
  double theta = std::atan2(dy, dx) + kPi / 2.0;
  // theta is the clockwise turn that sends the S->C direction straight down,
  // i.e. rotate(., theta) under the row-vector convention. The half-turn
  // branch only catches rounding at the boundary.
  if (rotate_point({dx, dy}, std::cos(theta), std::sin(theta)).y >= 0.0) theta += kPi;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return map_points(traj, [&](Point p) {
    return rotate_point({p.x - kp.first.x, p.y - kp.first.y}, c, s);
  });
}

}  // namespace swps
