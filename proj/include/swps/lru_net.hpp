#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swps/common.hpp"

namespace swps {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// LRU layer
//
// Diagonal complex recurrence h_t = lambda .* h_{t-1} + gamma .* (B u_t) with
// lambda_i = exp(-exp(nu_log_i) + i theta_i) and gamma_i = sqrt(1 - |lambda_i|^2).
// Output y_t = Re(C h_t) + D .* u_t. Complex matrices are stored as separate
// real and imaginary parts.
// ---------------------------------------------------------------------------

struct LruLayer {
  Vector nu_log;  // d_h
  Vector theta;   // d_h
  Matrix B_re, B_im;  // d_h x H
  Matrix C_re, C_im;  // H x d_h
  Vector D;           // H

  int state_dim() const { return static_cast<int>(nu_log.size()); }
  int width() const { return static_cast<int>(D.size()); }
  ComplexVector lambda() const;
  Vector gamma() const;
};

struct LruInit {
  double r_min = 0.5;
  double r_max = 0.99;
  double max_phase = 2.0 * kPi;
};

/// |lambda|^2 uniform on [r_min^2, r_max^2], phase uniform on [0, max_phase),
/// B and C complex Gaussian with per-component variance 1/(2H) and 1/(2 d_h),
/// D = 1.
LruLayer init_lru_layer(int state_dim, int width, const LruInit& init, std::uint64_t seed);

/// One element of the linear-recurrence scan: the map h -> a h + b.
struct ScanElement {
  std::complex<double> a;
  std::complex<double> b;
};

/// Composition "apply `earlier`, then `later`": (a2 a1, a2 b1 + b2).
inline ScanElement combine(const ScanElement& later, const ScanElement& earlier) {
  return {later.a * earlier.a, later.a * earlier.b + later.b};
}

/// In-place inclusive scan with `combine`: pairwise reduction, recursive scan
/// of the reduced sequence, then expansion. O(n) work, O(log n) depth.
void associative_scan(std::vector<ScanElement>& elems);

/// gamma .* (B u_t) for each row u_t of `u` (K x H); result is K x d_h.
ComplexMatrix lru_project(const LruLayer& layer, const Eigen::Ref<const RowMatrix>& u);

/// h_1 = x_1, h_t = lambda .* h_{t-1} + x_t over the rows of `x` (K x d_h).
ComplexMatrix scan_sequential(const ComplexVector& lambda, const ComplexMatrix& x);
ComplexMatrix scan_parallel(const ComplexVector& lambda, const ComplexMatrix& x);

/// Hidden states of the layer for input `u` (K x H); result is K x d_h.
ComplexMatrix lru_scan_sequential(const LruLayer& layer, const Eigen::Ref<const RowMatrix>& u);
ComplexMatrix lru_scan_parallel(const LruLayer& layer, const Eigen::Ref<const RowMatrix>& u);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ModelConfig {
  int input_dim = 90;
  int hidden = 256;
  int state = 256;
  int blocks = 4;
  int classes = 0;
  double dropout = 0.3;
  LruInit init;
  /// Use the associative scan for eval-mode forwards.
  bool parallel_scan = false;

  void validate() const;
};

struct BatchNormParams {
  Vector scale;
  Vector shift;
};

struct RunningStats {
  Vector mean;
  Vector var;
};

struct BlockParams {
  BatchNormParams norm;
  LruLayer lru;
  Matrix gate_w;  // 2H x H; rows [0, H) are the value half, [H, 2H) the gate
  Vector gate_b;  // 2H
};

/// Every trainable array of the model. Also used to hold gradients and
/// optimizer moments.
struct LruParams {
  Matrix enc_w;  // H x input_dim
  Vector enc_b;
  std::vector<BlockParams> blocks;
  Matrix head_w;  // classes x H
  Vector head_b;

  /// Same shapes, all zeros.
  LruParams zeros_like() const;
};

/// Flat view of one parameter array.
struct ParamRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool weight_decay;  // counted in the L2 penalty

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Vector> vec() const { return {data, size()}; }
};

/// All parameter arrays in declaration order: encoder, blocks (norm scale,
/// norm shift, nu_log, theta, B_re, B_im, C_re, C_im, D, gate_w, gate_b),
/// head. Weight matrices (encoder, B, C, gate, head) carry weight_decay.
std::vector<ParamRef> param_refs(LruParams& p);
std::vector<ParamRef> param_refs(const LruParams& p);  // data must not be written

double global_norm(const LruParams& p);
std::size_t param_count(const LruParams& p);

class LruModel {
 public:
  ModelConfig config;
  LruParams params;
  std::vector<RunningStats> running;  // one per block

  static LruModel init(const ModelConfig& config, std::uint64_t seed);
};

enum class Mode { Train, Eval };

struct ForwardOptions {
  Mode mode = Mode::Eval;
  /// Dropout masks for block b are drawn from stream (dropout_seed, b, 0|1).
  std::uint64_t dropout_seed = 0;
};

struct BlockCache {
  Matrix input;           // H x NK
  Matrix xhat;            // normalized input
  Vector inv_std;
  Matrix z;               // batch-norm output
  Matrix bu_re, bu_im;    // B z
  Matrix h_re, h_im;      // hidden states
  Matrix s;               // Re(C h) + D z
  Matrix mask1, mask2;    // scaled dropout masks (train mode only)
  Matrix g;               // dropout(gelu(s))
  Matrix gate;            // gate_w g + gate_b
  Matrix glu;             // value .* sigmoid(gate half)
  RunningStats batch;     // mean and unbiased variance of this batch
};

struct ForwardCache {
  int batch = 0;
  int steps = 0;
  Matrix inputs;          // input_dim x NK
  std::vector<BlockCache> blocks;
  Matrix final;           // H x NK
  Matrix pooled;          // H x N
};

/// Batch-norm, LRU, GELU, dropout, GLU, dropout, residual. `x` is H x NK
/// with `steps` consecutive columns per sequence. In train mode batch
/// statistics are used and recorded in `cache->batch`.
Matrix block_forward(const BlockParams& block, const RunningStats& running, const Matrix& x,
                     int steps, Mode mode, double dropout, bool parallel_scan, Rng* rng,
                     BlockCache* cache);

/// Single-sequence convenience over block_forward: `seq` is K x H.
RowMatrix lru_block_forward(const BlockParams& block, const RunningStats& running,
                            const Eigen::Ref<const RowMatrix>& seq, Mode mode, double dropout,
                            Rng* rng);

/// Logits (classes x N) for N window-signature matrices sharing K.
Matrix forward_batch(const LruModel& model, std::span<const RowMatrix> inputs,
                     const ForwardOptions& opts, ForwardCache* cache = nullptr);

/// Logits of one K x input_dim window-signature matrix.
Vector model_forward(const LruModel& model, const Eigen::Ref<const RowMatrix>& windows,
                     const ForwardOptions& opts = {});

Vector softmax(const Vector& logits);

/// Half the sum of squares of all weight-decayed arrays.
double l2_penalty(const LruParams& p);

/// -log softmax(logits)[label] + l2 * l2_penalty(model.params).
double loss(const Vector& logits, int label, const LruModel& model, double l2);

struct BatchGradient {
  double loss = 0.0;       // mean cross-entropy + L2 term
  Matrix logits;           // classes x N
  LruParams grads;
  std::vector<RunningStats> batch_stats;  // train mode only
};

/// Exact gradients of the mean batch loss. The recurrence is differentiated
/// through its sequential form. Throws NonFiniteLoss naming the first
/// offending sample.
BatchGradient gradients(const LruModel& model, std::span<const RowMatrix> inputs,
                        std::span<const int> labels, double l2, const ForwardOptions& opts);

/// running = momentum * running + (1 - momentum) * batch.
void update_running_stats(LruModel& model, const std::vector<RunningStats>& batch,
                          double momentum = 0.9);

inline constexpr double kBatchNormEps = 1e-5;

}  // namespace swps
