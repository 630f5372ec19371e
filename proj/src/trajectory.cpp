#include "swps/trajectory.hpp"

#include <algorithm>
#include <limits>

namespace swps {

std::size_t Trajectory::point_count() const {
  std::size_t n = 0;
  for (const auto& s : strokes) n += s.size();
  return n;
}

std::vector<Point> Trajectory::flatten() const {
  std::vector<Point> out;
  out.reserve(point_count());
  for (const auto& s : strokes) out.insert(out.end(), s.begin(), s.end());
  return out;
}

BoundingBox bounding_box(const Trajectory& traj) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{inf, inf, -inf, -inf};
  for (const auto& s : traj.strokes) {
    for (const auto& p : s) {
      box.min_x = std::min(box.min_x, p.x);
      box.min_y = std::min(box.min_y, p.y);
      box.max_x = std::max(box.max_x, p.x);
      box.max_y = std::max(box.max_y, p.y);
    }
  }
  return box;
}

}  // namespace swps
