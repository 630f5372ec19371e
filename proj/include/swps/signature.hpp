#pragma once

#include <span>
#include <vector>

#include "swps/common.hpp"

namespace swps {

/// Truncated element of the tensor algebra over R^d with the level-0 term
/// fixed at 1. Level k (1-based) holds d^k coefficients indexed
/// lexicographically by (i_1, ..., i_k), the last index varying fastest.
struct TruncatedTensor {
  int d = 0;
  int m = 0;
  std::vector<std::vector<double>> levels;

  /// The unit element (all levels zero).
  static TruncatedTensor identity(int d, int m);

  const std::vector<double>& level(int k) const { return levels.at(static_cast<std::size_t>(k - 1)); }
  std::vector<double>& level(int k) { return levels.at(static_cast<std::size_t>(k - 1)); }

  /// Level-major concatenation of all levels.
  std::vector<double> flatten() const;
};

/// Sum_{k=1..m} d^k. Throws std::overflow_error past INT_MAX.
int sig_dim(int d, int m);

/// Sliding-window parameters: window length w, stride t, truncation degree m.
struct WindowSpec {
  int w = 5;
  int t = 1;
  int m = 2;

  /// Rejects w < 2, t < 1 and m outside {1, 2}.
  void validate() const;
  /// floor((L - w) / t) + 1. Throws if L < w.
  int window_count(int length) const;
};

/// Tensor exponential of a single linear increment: level k = delta^{(x)k} / k!.
TruncatedTensor segment_sig(std::span<const double> delta, int m);

/// Truncated tensor product (Chen concatenation). Throws on (d, m) mismatch.
TruncatedTensor chen_mul(const TruncatedTensor& a, const TruncatedTensor& b);

/// Signature of the piecewise-linear path through the rows of `points`
/// (n x d, n >= 2), flattened level-major.
std::vector<double> path_signature(const Eigen::Ref<const RowMatrix>& points, int m);

/// Same as path_signature but returns the structured tensor.
TruncatedTensor path_signature_tensor(const Eigen::Ref<const RowMatrix>& points, int m);

/// K x sig_dim(d, m) matrix of window signatures, one row per window
/// starting at row j * t. Trailing rows not covered by a full window are
/// dropped.
RowMatrix sliding_window_signature(const Eigen::Ref<const RowMatrix>& seq, const WindowSpec& spec);

}  // namespace swps
