#pragma once

#include <cstddef>
#include <vector>

namespace swps {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

using Stroke = std::vector<Point>;

/// Ordered pen samples grouped into strokes.
struct Trajectory {
  std::vector<Stroke> strokes;

  std::size_t point_count() const;
  bool empty() const { return point_count() == 0; }
  /// All points in writing order.
  std::vector<Point> flatten() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct BoundingBox {
  double min_x, min_y, max_x, max_y;
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
};

BoundingBox bounding_box(const Trajectory& traj);

}  // namespace swps
