#include "swps/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace swps {

std::array<double, 2> pen_vector(PenState state) {
  switch (state) {
    case PenState::PenDown: return {0.0, 1.0};
    case PenState::Continuous: return {0.0, 0.0};
    case PenState::PenUp: return {1.0, 0.0};
  }
  return {0.0, 0.0};
}

void PreprocessConfig::validate() const {
  if (!(redundancy_tol >= 0.0)) throw ConfigError("preprocess.redundancy_tol must be >= 0");
  if (!(resample_spacing > 0.0)) throw ConfigError("preprocess.resample_spacing must be > 0");
  if (target_length < 2) throw ConfigError("preprocess.target_length must be >= 2");
}

int FeatureSequence::real_length() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  if (len2 == 0.0) return dist(p, a);
  double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return dist(p, {a.x + t * vx, a.y + t * vy});
}

Stroke reduce_once(const Stroke& s, double tol) {
  if (s.size() <= 1) return s;
  Stroke d;
  d.push_back(s.front());
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (dist(s[i], d.back()) > tol) {
      d.push_back(s[i]);
    } else if (i + 1 == s.size() && d.size() > 1) {
      d.back() = s[i];
    }
  }
  if (d.size() <= 2) return d;
  Stroke out;
  out.push_back(d.front());
  for (std::size_t i = 1; i + 1 < d.size(); ++i) {
    if (segment_distance(d[i], out.back(), d[i + 1]) > tol) out.push_back(d[i]);
  }
  out.push_back(d.back());
  return out;
}

double stroke_length(const Stroke& s) {
  double len = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) len += dist(s[i - 1], s[i]);
  return len;
}

}  // namespace

Trajectory remove_redundant(const Trajectory& traj, double tol) {
  if (tol < 0.0) throw std::invalid_argument("tolerance must be non-negative");
  Trajectory out;
  out.strokes.reserve(traj.strokes.size());
  for (const auto& stroke : traj.strokes) {
    Stroke cur = stroke;
    for (;;) {
      Stroke next = reduce_once(cur, tol);
      const bool stable = next.size() == cur.size();
      cur = std::move(next);
      if (stable) break;
    }
    out.strokes.push_back(std::move(cur));
  }
  return out;
}

Trajectory size_normalize(const Trajectory& traj, double* scale_out) {
  if (traj.empty()) {
    if (scale_out) *scale_out = 1.0;
    return traj;
  }
  const BoundingBox box = bounding_box(traj);
  const double side = std::max(box.width(), box.height());
  const double scale = side > 0.0 ? 1.0 / side : 1.0;
  const double cx = 0.5 * (box.min_x + box.max_x);
  const double cy = 0.5 * (box.min_y + box.max_y);
  Trajectory out = traj;
  for (auto& s : out.strokes) {
    for (auto& p : s) p = {(p.x - cx) * scale, (p.y - cy) * scale};
  }
  if (scale_out) *scale_out = scale;
  return out;
}

Trajectory resample_penspeed(const Trajectory& traj, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be positive");
  Trajectory out;
  out.strokes.reserve(traj.strokes.size());
  for (const auto& s : traj.strokes) {
    if (s.empty()) continue;
    const double len = stroke_length(s);
    if (len == 0.0) {
      out.strokes.push_back({s.front()});
      continue;
    }
    const auto pieces = std::max<long>(1, std::lround(len / spacing));
    const double step = len / static_cast<double>(pieces);
    Stroke r;
    r.reserve(static_cast<std::size_t>(pieces) + 1);
    r.push_back(s.front());
    std::size_t seg = 1;
    double seg_start = 0.0;  // arc length at s[seg - 1]
    for (long k = 1; k < pieces; ++k) {
      const double target = step * static_cast<double>(k);
      double seg_len = dist(s[seg - 1], s[seg]);
      while (seg + 1 < s.size() && seg_start + seg_len < target) {
        seg_start += seg_len;
        ++seg;
        seg_len = dist(s[seg - 1], s[seg]);
      }
      const double f = seg_len > 0.0 ? std::clamp((target - seg_start) / seg_len, 0.0, 1.0) : 0.0;
      const Point a = s[seg - 1], b = s[seg];
      r.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
    }
    r.push_back(s.back());
    out.strokes.push_back(std::move(r));
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> derivative_features(
    std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> d1(n, 0.0), d2(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) d1[i] = x[i] - x[i - 1];
  for (std::size_t i = 1; i < n; ++i) d2[i] = d1[i] - d1[i - 1];
  return {std::move(d1), std::move(d2)};
}

void scale_channels(RowMatrix& m, std::span<const int> channels) {
  if (m.rows() == 0) return;
  for (int c : channels) {
    auto column = m.col(c);
    const double lo = column.minCoeff();
    const double hi = column.maxCoeff();
    if (hi == lo) {
      column.setZero();
      continue;
    }
    const double range = hi - lo;
    for (Eigen::Index i = 0; i < column.size(); ++i) {
      column(i) = std::clamp(2.0 * ((column(i) - lo) / range) - 1.0, -1.0, 1.0);
    }
  }
}

std::pair<RowMatrix, std::vector<std::uint8_t>> fit_length(const RowMatrix& rows, int length,
                                                           PadPolicy /*policy*/) {
  if (rows.rows() < 1) throw std::invalid_argument("fit_length needs at least one row");
  if (length < 1) throw std::invalid_argument("target length must be positive");
  const auto real = std::min<Eigen::Index>(rows.rows(), length);
  RowMatrix out(length, rows.cols());
  out.topRows(real) = rows.topRows(real);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(length), 0);
  std::fill(mask.begin(), mask.begin() + real, std::uint8_t{1});
  if (real < length) {
    Eigen::RowVectorXd pad = rows.row(rows.rows() - 1);
    if (pad.size() == col::kCount) {
      const auto cont = pen_vector(PenState::Continuous);
      pad(col::kPen1) = cont[0];
      pad(col::kPen2) = cont[1];
      pad.segment(col::kDx, 4).setZero();
    }
    for (Eigen::Index i = real; i < length; ++i) out.row(i) = pad;
  }
  return {std::move(out), std::move(mask)};
}

FeatureSequence assemble_features(const Trajectory& traj, const PreprocessConfig& cfg) {
  const std::size_t n = traj.point_count();
  if (n == 0) throw std::invalid_argument("cannot build features for an empty trajectory");

  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(n), col::kCount);
  std::vector<double> xs, ys;
  xs.reserve(n);
  ys.reserve(n);
  Eigen::Index i = 0;
  for (const auto& stroke : traj.strokes) {
    for (std::size_t k = 0; k < stroke.size(); ++k, ++i) {
      const Point p = stroke[k];
      xs.push_back(p.x);
      ys.push_back(p.y);
      m(i, col::kX) = p.x;
      m(i, col::kY) = p.y;
      m(i, col::kInk) = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
      PenState state = PenState::Continuous;
      if (k == 0) {
        state = PenState::PenDown;
      } else if (k + 1 == stroke.size()) {
        state = PenState::PenUp;
      }
      const auto pv = pen_vector(state);
      m(i, col::kPen1) = pv[0];
      m(i, col::kPen2) = pv[1];
    }
  }
  auto [dx, ddx] = derivative_features(xs);
  auto [dy, ddy] = derivative_features(ys);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto u = static_cast<std::size_t>(r);
    m(r, col::kDx) = dx[u];
    m(r, col::kDy) = dy[u];
    m(r, col::kDdx) = ddx[u];
    m(r, col::kDdy) = ddy[u];
  }
  static constexpr int kScaled[] = {col::kDx, col::kDy, col::kDdx, col::kDdy};
  scale_channels(m, kScaled);

  auto [rows, mask] = fit_length(m, cfg.target_length, cfg.pad_policy);
  return {std::move(rows), std::move(mask)};
}

Trajectory prepare_trajectory(const Trajectory& raw, const PreprocessConfig& cfg) {
  if (raw.empty()) throw std::invalid_argument("empty trajectory");
  double scale = 1.0;
  (void)size_normalize(raw, &scale);
  const Trajectory reduced = remove_redundant(raw, cfg.redundancy_tol / scale);
  return resample_penspeed(size_normalize(reduced), cfg.resample_spacing);
}

}  // namespace swps
