#include "swps/signature.hpp"

#include <climits>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace swps {

namespace {

std::size_t level_size(int d, int k) {
  std::size_t n = 1;
  for (int i = 0; i < k; ++i) n *= static_cast<std::size_t>(d);
  return n;
}

// out_level += a (x) b for flat lexicographic blocks.
void add_outer(std::vector<double>& out, const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t o = 0;
  for (double av : a) {
    for (double bv : b) out[o++] += av * bv;
  }
}

// In-place right multiplication by a segment signature.
void extend_with(TruncatedTensor& acc, const TruncatedTensor& seg) {
  for (int k = acc.m; k >= 1; --k) {
    auto& dst = acc.level(k);
    for (int j = k - 1; j >= 1; --j) add_outer(dst, acc.level(j), seg.level(k - j));
    const auto& s = seg.level(k);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s[i];
  }
}

}  // namespace

TruncatedTensor TruncatedTensor::identity(int d, int m) {
  if (d < 1 || m < 1) throw std::invalid_argument("tensor needs d >= 1 and m >= 1");
  TruncatedTensor t;
  t.d = d;
  t.m = m;
  t.levels.resize(static_cast<std::size_t>(m));
  for (int k = 1; k <= m; ++k) t.level(k).assign(level_size(d, k), 0.0);
  return t;
}

std::vector<double> TruncatedTensor::flatten() const {
  std::vector<double> out;
  for (const auto& l : levels) out.insert(out.end(), l.begin(), l.end());
  return out;
}

int sig_dim(int d, int m) {
  if (d < 1 || m < 1) throw std::invalid_argument("sig_dim needs d >= 1 and m >= 1");
  std::int64_t total = 0;
  std::int64_t term = 1;
  for (int k = 1; k <= m; ++k) {
    if (term > INT_MAX / d) throw std::overflow_error("signature dimension overflows int");
    term *= d;
    total += term;
    if (total > INT_MAX) throw std::overflow_error("signature dimension overflows int");
  }
  return static_cast<int>(total);
}

void WindowSpec::validate() const {
  if (w < 2) throw ConfigError("window.w must be >= 2");
  if (t < 1) throw ConfigError("window.t must be >= 1");
  if (m < 1 || m > 2) throw ConfigError("window.m must be 1 or 2");
}

int WindowSpec::window_count(int length) const {
  if (w < 1 || t < 1) throw std::invalid_argument("window length and stride must be positive");
  if (length < w) {
    throw std::invalid_argument("sequence length " + std::to_string(length) +
                                " is shorter than the window " + std::to_string(w));
  }
  return (length - w) / t + 1;
}

TruncatedTensor segment_sig(std::span<const double> delta, int m) {
  const int d = static_cast<int>(delta.size());
  TruncatedTensor t = TruncatedTensor::identity(d, m);
  t.level(1).assign(delta.begin(), delta.end());
  for (int k = 2; k <= m; ++k) {
    const auto& prev = t.level(k - 1);
    auto& cur = t.level(k);
    const double inv_k = 1.0 / k;
    std::size_t o = 0;
    for (double p : prev) {
      for (double v : delta) cur[o++] = p * v * inv_k;
    }
  }
  return t;
}

TruncatedTensor chen_mul(const TruncatedTensor& a, const TruncatedTensor& b) {
  if (a.d != b.d || a.m != b.m) {
    throw std::invalid_argument("chen_mul operands differ in dimension or degree");
  }
  TruncatedTensor out = TruncatedTensor::identity(a.d, a.m);
  for (int k = 1; k <= a.m; ++k) {
    auto& dst = out.level(k);
    const auto& ak = a.level(k);
    const auto& bk = b.level(k);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = ak[i] + bk[i];
    for (int j = 1; j < k; ++j) add_outer(dst, a.level(j), b.level(k - j));
  }
  return out;
}

TruncatedTensor path_signature_tensor(const Eigen::Ref<const RowMatrix>& points, int m) {
  if (points.rows() < 2) throw std::invalid_argument("path_signature needs at least 2 points");
  const int d = static_cast<int>(points.cols());
  TruncatedTensor acc = TruncatedTensor::identity(d, m);
  std::vector<double> delta(static_cast<std::size_t>(d));
  for (Eigen::Index i = 1; i < points.rows(); ++i) {
    for (int c = 0; c < d; ++c) delta[static_cast<std::size_t>(c)] = points(i, c) - points(i - 1, c);
    extend_with(acc, segment_sig(delta, m));
  }
  return acc;
}

std::vector<double> path_signature(const Eigen::Ref<const RowMatrix>& points, int m) {
  return path_signature_tensor(points, m).flatten();
}

RowMatrix sliding_window_signature(const Eigen::Ref<const RowMatrix>& seq, const WindowSpec& spec) {
  if (spec.w < 2) throw std::invalid_argument("window length must be >= 2");
  if (spec.m < 1) throw std::invalid_argument("truncation degree must be >= 1");
  const int length = static_cast<int>(seq.rows());
  const int k = spec.window_count(length);
  const int d = static_cast<int>(seq.cols());
  RowMatrix out(k, sig_dim(d, spec.m));
  for (int j = 0; j < k; ++j) {
    const auto sig = path_signature(seq.middleRows(static_cast<Eigen::Index>(j) * spec.t, spec.w), spec.m);
    out.row(j) = Eigen::Map<const Eigen::RowVectorXd>(sig.data(), static_cast<Eigen::Index>(sig.size()));
  }
  return out;
}

}  // namespace swps
