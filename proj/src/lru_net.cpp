#include "swps/lru_net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace swps {

// ---------------------------------------------------------------------------
// Layer

ComplexVector LruLayer::lambda() const {
  ComplexVector lam(nu_log.size());
  for (Eigen::Index i = 0; i < nu_log.size(); ++i) {
    const double r = std::exp(-std::exp(nu_log(i)));
    lam(i) = std::polar(r, theta(i));
  }
  return lam;
}

Vector LruLayer::gamma() const {
  Vector g(nu_log.size());
  for (Eigen::Index i = 0; i < nu_log.size(); ++i) {
    g(i) = std::sqrt(-std::expm1(-2.0 * std::exp(nu_log(i))));
  }
  return g;
}

LruLayer init_lru_layer(int state_dim, int width, const LruInit& init, std::uint64_t seed) {
  if (state_dim < 1 || width < 1) throw std::invalid_argument("LRU dimensions must be positive");
  if (!(init.r_min > 0.0 && init.r_min < init.r_max && init.r_max < 1.0)) {
    throw std::invalid_argument("LRU init needs 0 < r_min < r_max < 1");
  }
  if (!(init.max_phase > 0.0 && init.max_phase <= 2.0 * kPi + 1e-12)) {
    throw std::invalid_argument("LRU init needs max_phase in (0, 2*pi]");
  }
  Rng rng = make_stream(seed, {0x1a});
  LruLayer l;
  l.nu_log.resize(state_dim);
  l.theta.resize(state_dim);
  const double r2_min = init.r_min * init.r_min;
  const double r2_max = init.r_max * init.r_max;
  for (int i = 0; i < state_dim; ++i) {
    const double u = uniform(rng, 0.0, 1.0);
    l.nu_log(i) = std::log(-0.5 * std::log(u * (r2_max - r2_min) + r2_min));
    l.theta(i) = init.max_phase * uniform(rng, 0.0, 1.0);
  }
  auto gauss = [&](Eigen::Index rows, Eigen::Index cols, double sd) {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = sd * gaussian(rng);
    return m;
  };
  const double b_sd = std::sqrt(1.0 / (2.0 * width));
  const double c_sd = std::sqrt(1.0 / (2.0 * state_dim));
  l.B_re = gauss(state_dim, width, b_sd);
  l.B_im = gauss(state_dim, width, b_sd);
  l.C_re = gauss(width, state_dim, c_sd);
  l.C_im = gauss(width, state_dim, c_sd);
  l.D = Vector::Ones(width);
  return l;
}

void associative_scan(std::vector<ScanElement>& elems) {
  const std::size_t n = elems.size();
  if (n <= 1) return;
  std::vector<ScanElement> reduced(n / 2);
  for (std::size_t i = 0; i < n / 2; ++i) reduced[i] = combine(elems[2 * i + 1], elems[2 * i]);
  associative_scan(reduced);
  for (std::size_t i = 0; i < n / 2; ++i) elems[2 * i + 1] = reduced[i];
  for (std::size_t i = 1; 2 * i < n; ++i) elems[2 * i] = combine(elems[2 * i], reduced[i - 1]);
}

ComplexMatrix lru_project(const LruLayer& layer, const Eigen::Ref<const RowMatrix>& u) {
  if (u.cols() != layer.width()) throw std::invalid_argument("input width does not match layer");
  const Vector g = layer.gamma();
  const Matrix re = (layer.B_re * u.transpose()).array().colwise() * g.array();
  const Matrix im = (layer.B_im * u.transpose()).array().colwise() * g.array();
  ComplexMatrix x(u.rows(), layer.state_dim());
  x.real() = re.transpose();
  x.imag() = im.transpose();
  return x;
}

ComplexMatrix scan_sequential(const ComplexVector& lambda, const ComplexMatrix& x) {
  ComplexMatrix h = x;
  for (Eigen::Index t = 1; t < h.rows(); ++t) {
    h.row(t) += (h.row(t - 1).transpose().array() * lambda.array()).matrix().transpose();
  }
  return h;
}

ComplexMatrix scan_parallel(const ComplexVector& lambda, const ComplexMatrix& x) {
  ComplexMatrix h(x.rows(), x.cols());
  std::vector<ScanElement> elems(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    for (Eigen::Index t = 0; t < x.rows(); ++t) elems[static_cast<std::size_t>(t)] = {lambda(i), x(t, i)};
    associative_scan(elems);
    for (Eigen::Index t = 0; t < x.rows(); ++t) h(t, i) = elems[static_cast<std::size_t>(t)].b;
  }
  return h;
}

ComplexMatrix lru_scan_sequential(const LruLayer& layer, const Eigen::Ref<const RowMatrix>& u) {
  return scan_sequential(layer.lambda(), lru_project(layer, u));
}

ComplexMatrix lru_scan_parallel(const LruLayer& layer, const Eigen::Ref<const RowMatrix>& u) {
  return scan_parallel(layer.lambda(), lru_project(layer, u));
}

// ---------------------------------------------------------------------------
// Parameters

void ModelConfig::validate() const {
  if (input_dim < 1) throw ConfigError("model.input_dim must be positive");
  if (hidden < 1) throw ConfigError("model.hidden must be positive");
  if (state < 1) throw ConfigError("model.state must be positive");
  if (blocks < 0) throw ConfigError("model.blocks must be >= 0");
  if (classes < 1) throw ConfigError("model.classes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(init.r_min > 0.0 && init.r_min < init.r_max && init.r_max < 1.0)) {
    throw ConfigError("model needs 0 < r_min < r_max < 1");
  }
  if (!(init.max_phase > 0.0 && init.max_phase <= 2.0 * kPi + 1e-12)) {
    throw ConfigError("model.max_phase must lie in (0, 2*pi]");
  }
}

LruParams LruParams::zeros_like() const {
  LruParams z = *this;
  for (auto& r : param_refs(z)) r.vec().setZero();
  return z;
}

namespace {

template <class P, class Out>
void collect_refs(P& p, Out& out) {
  auto add = [&](std::string name, auto& m, bool decay) {
    out.push_back(ParamRef{std::move(name), const_cast<double*>(m.data()), m.rows(), m.cols(), decay});
  };
  add("encoder.weight", p.enc_w, true);
  add("encoder.bias", p.enc_b, false);
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    auto& blk = p.blocks[b];
    const std::string pre = "blocks." + std::to_string(b) + ".";
    add(pre + "norm.scale", blk.norm.scale, false);
    add(pre + "norm.shift", blk.norm.shift, false);
    add(pre + "lru.nu_log", blk.lru.nu_log, false);
    add(pre + "lru.theta", blk.lru.theta, false);
    add(pre + "lru.B_re", blk.lru.B_re, true);
    add(pre + "lru.B_im", blk.lru.B_im, true);
    add(pre + "lru.C_re", blk.lru.C_re, true);
    add(pre + "lru.C_im", blk.lru.C_im, true);
    add(pre + "lru.D", blk.lru.D, false);
    add(pre + "gate.weight", blk.gate_w, true);
    add(pre + "gate.bias", blk.gate_b, false);
  }
  add("head.weight", p.head_w, true);
  add("head.bias", p.head_b, false);
}

}  // namespace

std::vector<ParamRef> param_refs(LruParams& p) {
  std::vector<ParamRef> out;
  collect_refs(p, out);
  return out;
}

std::vector<ParamRef> param_refs(const LruParams& p) {
  std::vector<ParamRef> out;
  collect_refs(p, out);
  return out;
}

double global_norm(const LruParams& p) {
  double s = 0.0;
  for (const auto& r : param_refs(p)) s += r.vec().squaredNorm();
  return std::sqrt(s);
}

std::size_t param_count(const LruParams& p) {
  std::size_t n = 0;
  for (const auto& r : param_refs(p)) n += static_cast<std::size_t>(r.size());
  return n;
}

LruModel LruModel::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  LruModel model;
  model.config = config;
  const int H = config.hidden;
  auto dense = [&](Eigen::Index rows, Eigen::Index cols, std::uint64_t key) {
    Rng rng = make_stream(seed, {key});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = uniform(rng, -bound, bound);
    return m;
  };
  auto& p = model.params;
  p.enc_w = dense(H, config.input_dim, 1);
  p.enc_b = Vector::Zero(H);
  for (int b = 0; b < config.blocks; ++b) {
    BlockParams blk;
    blk.norm.scale = Vector::Ones(H);
    blk.norm.shift = Vector::Zero(H);
    blk.lru = init_lru_layer(config.state, H, config.init,
                             derive_seed(seed, {2, static_cast<std::uint64_t>(b)}));
    blk.gate_w = dense(2 * H, H, derive_seed(seed, {3, static_cast<std::uint64_t>(b)}));
    blk.gate_b = Vector::Zero(2 * H);
    p.blocks.push_back(std::move(blk));
    model.running.push_back({Vector::Zero(H), Vector::Ones(H)});
  }
  p.head_w = dense(config.classes, H, 4);
  p.head_b = Vector::Zero(config.classes);
  return model;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  double* d = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = uniform(rng, 0.0, 1.0) < rate ? 0.0 : keep;
  return m;
}

// In-place sequential scan along the columns of each sequence.
void scan_columns(const Vector& lr, const Vector& li, Matrix& hr, Matrix& hi, int steps) {
  const Eigen::Index total = hr.cols();
  for (Eigen::Index c0 = 0; c0 < total; c0 += steps) {
    for (Eigen::Index t = 1; t < steps; ++t) {
      const Eigen::Index c = c0 + t;
      hr.col(c).array() += lr.array() * hr.col(c - 1).array() - li.array() * hi.col(c - 1).array();
      hi.col(c).array() += lr.array() * hi.col(c - 1).array() + li.array() * hr.col(c - 1).array();
    }
  }
}

void scan_columns_parallel(const ComplexVector& lam, Matrix& hr, Matrix& hi, int steps) {
  std::vector<ScanElement> elems(static_cast<std::size_t>(steps));
  for (Eigen::Index c0 = 0; c0 < hr.cols(); c0 += steps) {
    for (Eigen::Index i = 0; i < hr.rows(); ++i) {
      for (int t = 0; t < steps; ++t) elems[static_cast<std::size_t>(t)] = {lam(i), {hr(i, c0 + t), hi(i, c0 + t)}};
      associative_scan(elems);
      for (int t = 0; t < steps; ++t) {
        hr(i, c0 + t) = elems[static_cast<std::size_t>(t)].b.real();
        hi(i, c0 + t) = elems[static_cast<std::size_t>(t)].b.imag();
      }
    }
  }
}

}  // namespace

Matrix block_forward(const BlockParams& block, const RunningStats& running, const Matrix& x,
                     int steps, Mode mode, double dropout, bool parallel_scan, Rng* rng,
                     BlockCache* cache) {
  const Eigen::Index H = x.rows();
  const Eigen::Index cols = x.cols();
  if (steps < 1 || cols % steps != 0) throw std::invalid_argument("column count is not a multiple of steps");
  if (H != block.lru.width()) throw std::invalid_argument("block width mismatch");
  const bool train = mode == Mode::Train;
  const bool use_dropout = train && dropout > 0.0;
  if (use_dropout && rng == nullptr) throw std::invalid_argument("train-mode dropout needs an RNG");

  BlockCache local;
  BlockCache& c = cache ? *cache : local;

  Vector mean;
  if (train) {
    mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;
    const Vector var = centered.array().square().rowwise().mean();
    c.inv_std = (var.array() + kBatchNormEps).rsqrt();
    c.xhat = centered.array().colwise() * c.inv_std.array();
    const double n = static_cast<double>(cols);
    c.batch.mean = mean;
    c.batch.var = cols > 1 ? Vector(var * (n / (n - 1.0))) : var;
  } else {
    c.inv_std = (running.var.array() + kBatchNormEps).rsqrt();
    c.xhat = (x.colwise() - running.mean).array().colwise() * c.inv_std.array();
  }
  c.z = (c.xhat.array().colwise() * block.norm.scale.array()).colwise() + block.norm.shift.array();

  const auto& lru = block.lru;
  const Vector gam = lru.gamma();
  const ComplexVector lam = lru.lambda();
  c.bu_re.noalias() = lru.B_re * c.z;
  c.bu_im.noalias() = lru.B_im * c.z;
  c.h_re = c.bu_re.array().colwise() * gam.array();
  c.h_im = c.bu_im.array().colwise() * gam.array();
  if (parallel_scan && !train) {
    scan_columns_parallel(lam, c.h_re, c.h_im, steps);
  } else {
    scan_columns(lam.real(), lam.imag(), c.h_re, c.h_im, steps);
  }
  c.s.noalias() = lru.C_re * c.h_re;
  c.s.noalias() -= lru.C_im * c.h_im;
  c.s.array() += c.z.array().colwise() * lru.D.array();

  c.g = c.s.unaryExpr([](double v) { return gelu(v); });
  if (use_dropout) {
    c.mask1 = dropout_mask(H, cols, dropout, *rng);
    c.g.array() *= c.mask1.array();
  } else {
    c.mask1.resize(0, 0);
  }
  c.gate = block.gate_w * c.g;
  c.gate.colwise() += block.gate_b;
  c.glu = c.gate.topRows(H).array() * c.gate.bottomRows(H).unaryExpr([](double v) { return sigmoid(v); }).array();

  Matrix out = x;
  if (use_dropout) {
    c.mask2 = dropout_mask(H, cols, dropout, *rng);
    out.array() += c.glu.array() * c.mask2.array();
  } else {
    c.mask2.resize(0, 0);
    out += c.glu;
  }
  if (cache) c.input = x;
  return out;
}

RowMatrix lru_block_forward(const BlockParams& block, const RunningStats& running,
                            const Eigen::Ref<const RowMatrix>& seq, Mode mode, double dropout,
                            Rng* rng) {
  const Matrix x = seq.transpose();
  const Matrix out = block_forward(block, running, x, static_cast<int>(seq.rows()), mode, dropout,
                                   false, rng, nullptr);
  return out.transpose();
}

Matrix forward_batch(const LruModel& model, std::span<const RowMatrix> inputs,
                     const ForwardOptions& opts, ForwardCache* cache) {
  if (inputs.empty()) throw std::invalid_argument("empty batch");
  const auto& cfg = model.config;
  const Eigen::Index K = inputs.front().rows();
  if (K < 1) throw std::invalid_argument("input has no windows");
  const auto N = static_cast<Eigen::Index>(inputs.size());
  Matrix S(cfg.input_dim, N * K);
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto& in = inputs[static_cast<std::size_t>(n)];
    if (in.cols() != cfg.input_dim) {
      throw std::invalid_argument("window feature size " + std::to_string(in.cols()) +
                                  " does not match encoder input " + std::to_string(cfg.input_dim));
    }
    if (in.rows() != K) throw std::invalid_argument("batch members differ in window count");
    S.middleCols(n * K, K) = in.transpose();
  }
  const auto& p = model.params;
  Matrix X = p.enc_w * S;
  X.colwise() += p.enc_b;
  if (cache) {
    cache->batch = static_cast<int>(N);
    cache->steps = static_cast<int>(K);
    cache->inputs = std::move(S);
    cache->blocks.assign(p.blocks.size(), {});
  }
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    Rng rng = make_stream(opts.dropout_seed, {static_cast<std::uint64_t>(b)});
    X = block_forward(p.blocks[b], model.running[b], X, static_cast<int>(K), opts.mode, cfg.dropout,
                      cfg.parallel_scan, &rng, cache ? &cache->blocks[b] : nullptr);
  }
  Matrix pooled(X.rows(), N);
  for (Eigen::Index n = 0; n < N; ++n) pooled.col(n) = X.middleCols(n * K, K).rowwise().mean();
  Matrix logits = p.head_w * pooled;
  logits.colwise() += p.head_b;
  if (cache) {
    cache->final = std::move(X);
    cache->pooled = std::move(pooled);
  }
  return logits;
}

Vector model_forward(const LruModel& model, const Eigen::Ref<const RowMatrix>& windows,
                     const ForwardOptions& opts) {
  const RowMatrix in = windows;
  return forward_batch(model, std::span<const RowMatrix>(&in, 1), opts).col(0);
}

Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp();
  return e / e.sum();
}

double l2_penalty(const LruParams& p) {
  double s = 0.0;
  for (const auto& r : param_refs(p)) {
    if (r.weight_decay) s += r.vec().squaredNorm();
  }
  return 0.5 * s;
}

double loss(const Vector& logits, int label, const LruModel& model, double l2) {
  if (label < 0 || label >= logits.size()) throw std::out_of_range("label out of range");
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (lse - logits(label)) + (l2 != 0.0 ? l2 * l2_penalty(model.params) : 0.0);
}

// ---------------------------------------------------------------------------
// Backward

namespace {

Matrix block_backward(const BlockParams& block, const BlockCache& c, const Matrix& dout, int steps,
                      bool train, BlockParams& g) {
  const Eigen::Index H = dout.rows();
  const Eigen::Index cols = dout.cols();
  const auto& lru = block.lru;

  Matrix dx = dout;  // residual path

  Matrix dglu = c.mask2.size() ? Matrix(dout.array() * c.mask2.array()) : dout;
  const Matrix sig = c.gate.bottomRows(H).unaryExpr([](double v) { return sigmoid(v); });
  Matrix dgate(2 * H, cols);
  dgate.topRows(H) = dglu.array() * sig.array();
  dgate.bottomRows(H) =
      dglu.array() * c.gate.topRows(H).array() * sig.array() * (1.0 - sig.array());
  g.gate_w.noalias() += dgate * c.g.transpose();
  g.gate_b += dgate.rowwise().sum();
  Matrix ds = block.gate_w.transpose() * dgate;
  if (c.mask1.size()) ds.array() *= c.mask1.array();
  ds.array() *= c.s.unaryExpr([](double v) { return gelu_grad(v); }).array();

  g.lru.D += (ds.array() * c.z.array()).rowwise().sum().matrix();
  g.lru.C_re.noalias() += ds * c.h_re.transpose();
  g.lru.C_im.noalias() -= ds * c.h_im.transpose();
  Matrix dhr = lru.C_re.transpose() * ds;
  Matrix dhi = -(lru.C_im.transpose() * ds);

  // Reverse-time accumulation: G_t = dh_t + conj(lambda) G_{t+1}.
  const ComplexVector lam = lru.lambda();
  const Vector lr = lam.real();
  const Vector li = lam.imag();
  Vector dlr = Vector::Zero(lr.size());
  Vector dli = Vector::Zero(lr.size());
  for (Eigen::Index c0 = 0; c0 < cols; c0 += steps) {
    Vector Gr = Vector::Zero(lr.size());
    Vector Gi = Vector::Zero(lr.size());
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const Eigen::Index col = c0 + t;
      const Vector nr = dhr.col(col).array() + lr.array() * Gr.array() + li.array() * Gi.array();
      const Vector ni = dhi.col(col).array() + lr.array() * Gi.array() - li.array() * Gr.array();
      Gr = nr;
      Gi = ni;
      dhr.col(col) = Gr;  // now d/dx_t
      dhi.col(col) = Gi;
      if (t > 0) {
        dlr.array() += c.h_re.col(col - 1).array() * Gr.array() + c.h_im.col(col - 1).array() * Gi.array();
        dli.array() += c.h_re.col(col - 1).array() * Gi.array() - c.h_im.col(col - 1).array() * Gr.array();
      }
    }
  }
  const Vector gam = lru.gamma();
  const Vector dgam = (dhr.array() * c.bu_re.array() + dhi.array() * c.bu_im.array()).rowwise().sum();
  dhr.array().colwise() *= gam.array();  // d/d(B z)
  dhi.array().colwise() *= gam.array();
  g.lru.B_re.noalias() += dhr * c.z.transpose();
  g.lru.B_im.noalias() += dhi * c.z.transpose();

  for (Eigen::Index i = 0; i < lr.size(); ++i) {
    const double nu = std::exp(lru.nu_log(i));
    g.lru.theta(i) += -dlr(i) * li(i) + dli(i) * lr(i);
    const double dgam_dnulog = nu * std::exp(-2.0 * nu) / gam(i);
    g.lru.nu_log(i) += -nu * (dlr(i) * lr(i) + dli(i) * li(i)) + dgam(i) * dgam_dnulog;
  }

  Matrix dz = ds.array().colwise() * lru.D.array();
  dz.noalias() += lru.B_re.transpose() * dhr;
  dz.noalias() += lru.B_im.transpose() * dhi;

  g.norm.scale += (dz.array() * c.xhat.array()).rowwise().sum().matrix();
  g.norm.shift += dz.rowwise().sum();
  Matrix dxhat = dz.array().colwise() * block.norm.scale.array();
  if (train) {
    const double n = static_cast<double>(cols);
    const Vector sum_d = dxhat.rowwise().sum();
    const Vector sum_dx = (dxhat.array() * c.xhat.array()).rowwise().sum();
    Matrix t = (dxhat * n).colwise() - sum_d;
    t.array() -= c.xhat.array().colwise() * sum_dx.array();
    dx.array() += t.array().colwise() * (c.inv_std.array() / n);
  } else {
    dx.array() += dxhat.array().colwise() * c.inv_std.array();
  }
  return dx;
}

}  // namespace

BatchGradient gradients(const LruModel& model, std::span<const RowMatrix> inputs,
                        std::span<const int> labels, double l2, const ForwardOptions& opts) {
  if (inputs.empty()) throw std::invalid_argument("empty batch");
  if (inputs.size() != labels.size()) throw std::invalid_argument("inputs and labels differ in size");
  ForwardCache cache;
  BatchGradient out;
  out.logits = forward_batch(model, inputs, opts, &cache);
  const auto N = static_cast<Eigen::Index>(inputs.size());
  const Eigen::Index classes = out.logits.rows();

  Matrix dlogits(classes, N);
  double ce = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    const int y = labels[static_cast<std::size_t>(n)];
    if (y < 0 || y >= classes) throw std::out_of_range("label out of range");
    const Vector col = out.logits.col(n);
    const double sample_loss = loss(col, y, model, 0.0);
    if (!std::isfinite(sample_loss)) {
      throw NonFiniteLoss("non-finite loss for batch sample " + std::to_string(n),
                          static_cast<std::size_t>(n));
    }
    ce += sample_loss;
    dlogits.col(n) = softmax(col);
    dlogits(y, n) -= 1.0;
  }
  dlogits /= static_cast<double>(N);
  out.loss = ce / static_cast<double>(N) + (l2 != 0.0 ? l2 * l2_penalty(model.params) : 0.0);

  const auto& p = model.params;
  LruParams& g = out.grads = p.zeros_like();
  g.head_w.noalias() = dlogits * cache.pooled.transpose();
  g.head_b = dlogits.rowwise().sum();
  const Matrix dpooled = p.head_w.transpose() * dlogits;
  const int K = cache.steps;
  Matrix dX(dpooled.rows(), N * K);
  for (Eigen::Index n = 0; n < N; ++n) {
    dX.middleCols(n * K, K) = (dpooled.col(n) / static_cast<double>(K)).replicate(1, K);
  }
  const bool train = opts.mode == Mode::Train;
  for (std::size_t b = p.blocks.size(); b-- > 0;) {
    dX = block_backward(p.blocks[b], cache.blocks[b], dX, K, train, g.blocks[b]);
  }
  g.enc_w.noalias() = dX * cache.inputs.transpose();
  g.enc_b = dX.rowwise().sum();

  if (l2 != 0.0) {
    auto prefs = param_refs(p);
    auto grefs = param_refs(g);
    for (std::size_t i = 0; i < prefs.size(); ++i) {
      if (prefs[i].weight_decay) grefs[i].vec() += l2 * prefs[i].vec();
    }
  }
  if (train) {
    for (auto& bc : cache.blocks) out.batch_stats.push_back(std::move(bc.batch));
  }
  return out;
}

void update_running_stats(LruModel& model, const std::vector<RunningStats>& batch, double momentum) {
  if (batch.size() != model.running.size()) throw std::invalid_argument("running stats size mismatch");
  for (std::size_t b = 0; b < batch.size(); ++b) {
    model.running[b].mean = momentum * model.running[b].mean + (1.0 - momentum) * batch[b].mean;
    model.running[b].var = momentum * model.running[b].var + (1.0 - momentum) * batch[b].var;
  }
}

}  // namespace swps
