#include "doctest.h"
#include "gradcheck.hpp"
#include "swps/lru_net.hpp"

using namespace swps;

namespace {

LruLayer scalar_layer(double lambda) {
  LruLayer l;
  // |lambda| = exp(-exp(nu_log)); lambda = 0 is injected through a huge nu_log
  l.nu_log = Vector::Constant(1, lambda > 0 ? std::log(-std::log(lambda)) : 50.0);
  l.theta = Vector::Zero(1);
  l.B_re = Matrix::Ones(1, 1);
  l.B_im = Matrix::Zero(1, 1);
  l.C_re = Matrix::Ones(1, 1);
  l.C_im = Matrix::Zero(1, 1);
  l.D = Vector::Ones(1);
  return l;
}

RowMatrix random_rows(Rng& rng, int rows, int cols, double scale = 1.0) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -scale, scale);
  return m;
}

ModelConfig small_config() {
  ModelConfig mc;
  mc.input_dim = 90;
  mc.hidden = 12;
  mc.state = 10;
  mc.blocks = 2;
  mc.classes = 4;
  return mc;
}

}  // namespace

TEST_CASE("layer initialization") {
  const LruInit init;
  const auto a = init_lru_layer(64, 16, init, 3);
  const auto lam = a.lambda();
  for (int i = 0; i < 64; ++i) {
    CHECK(std::abs(lam(i)) >= init.r_min - 1e-12);
    CHECK(std::abs(lam(i)) <= init.r_max + 1e-12);
    CHECK(std::exp(a.nu_log(i)) > 0.0);
    CHECK(a.gamma()(i) > 0.0);
    CHECK(a.gamma()(i) <= 1.0);
    CHECK(a.theta(i) >= 0.0);
    CHECK(a.theta(i) < init.max_phase);
  }
  CHECK(a.D == Vector::Ones(16));
  const auto b = init_lru_layer(64, 16, init, 3);
  CHECK(a.nu_log == b.nu_log);
  CHECK(a.B_re == b.B_re);
  CHECK(a.C_im == b.C_im);
  CHECK_THROWS(init_lru_layer(4, 4, {0.9, 0.5, 1.0}, 1));
  CHECK_THROWS(init_lru_layer(4, 4, {0.1, 0.5, 7.0}, 1));
}

TEST_CASE("sequential scan examples") {
  RowMatrix u(3, 1);
  u << 1, 1, 1;
  auto half = scalar_layer(0.5);
  half.nu_log(0) = std::log(-std::log(0.5));
  // gamma = sqrt(1 - 0.25) scales the input; undo it through B
  half.B_re(0, 0) = 1.0 / std::sqrt(0.75);
  const auto h = lru_scan_sequential(half, u);
  CHECK(h(0, 0).real() == doctest::Approx(1.0));
  CHECK(h(1, 0).real() == doctest::Approx(1.5));
  CHECK(h(2, 0).real() == doctest::Approx(1.75));

  const auto zero = scalar_layer(0.0);
  Rng rng = make_stream(51, {});
  const RowMatrix r = random_rows(rng, 20, 1);
  const auto hz = lru_scan_sequential(zero, r);
  const auto xz = lru_project(zero, r);
  CHECK((hz - xz).cwiseAbs().maxCoeff() <= 1e-15);

  const RowMatrix c = RowMatrix::Constant(400, 1, 0.7);
  const auto hc = lru_scan_sequential(half, c);
  const auto x = lru_project(half, c)(0, 0);
  CHECK(std::abs(hc(399, 0) - x / (1.0 - 0.5)) <= 1e-12);
}

TEST_CASE("parallel scan equals sequential scan") {
  Rng rng = make_stream(52, {});
  for (int i = 0; i < 40; ++i) {
    const int dh = 1 + static_cast<int>(rng() % 32);
    const int H = 1 + static_cast<int>(rng() % 32);
    const int K = 1 + static_cast<int>(rng() % 300);
    const auto layer = init_lru_layer(dh, H, {}, rng());
    const RowMatrix u = random_rows(rng, K, H);
    const auto s = lru_scan_sequential(layer, u);
    const auto p = lru_scan_parallel(layer, u);
    CHECK((s - p).cwiseAbs().maxCoeff() <= 1e-12);
    if (K == 1) CHECK((p - lru_project(layer, u)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("scan combinator is associative") {
  Rng rng = make_stream(53, {});
  auto rc = [&] { return std::complex<double>(uniform(rng, -1, 1), uniform(rng, -1, 1)); };
  for (int i = 0; i < 1000; ++i) {
    const ScanElement a{rc(), rc()}, b{rc(), rc()}, c{rc(), rc()};
    const auto l = combine(c, combine(b, a));
    const auto r = combine(combine(c, b), a);
    CHECK(std::abs(l.a - r.a) <= 1e-12);
    CHECK(std::abs(l.b - r.b) <= 1e-12);
  }
}

TEST_CASE("hidden state stays bounded on long inputs") {
  const auto layer = init_lru_layer(16, 4, {0.9, 0.999, 2 * kPi}, 5);
  Rng rng = make_stream(54, {});
  const RowMatrix u = random_rows(rng, 10000, 4);
  const auto h = lru_scan_sequential(layer, u);
  const auto x = lru_project(layer, u);
  const double M = x.rowwise().norm().maxCoeff();
  const double lam_max = layer.lambda().cwiseAbs().maxCoeff();
  CHECK(h.allFinite());
  // each channel is a geometric sum of projected inputs
  CHECK(h.rowwise().norm().maxCoeff() <= M / (1.0 - lam_max) + 1e-9);
}

TEST_CASE("block forward") {
  const auto mc = small_config();
  auto model = LruModel::init(mc, 2);
  Rng rng = make_stream(55, {});
  const RowMatrix seq = random_rows(rng, 9, mc.hidden);
  const auto& blk = model.params.blocks[0];
  const auto a = lru_block_forward(blk, model.running[0], seq, Mode::Eval, 0.3, nullptr);
  const auto b = lru_block_forward(blk, model.running[0], seq, Mode::Eval, 0.9, nullptr);
  CHECK(a.rows() == seq.rows());
  CHECK(a.cols() == seq.cols());
  CHECK(a == b);

  auto zeroed = blk;
  zeroed.lru.C_re.setZero();
  zeroed.lru.C_im.setZero();
  zeroed.lru.D.setZero();
  zeroed.gate_b.setZero();
  CHECK(lru_block_forward(zeroed, model.running[0], seq, Mode::Eval, 0.0, nullptr) == seq);
  Rng drop = make_stream(1, {});
  CHECK(lru_block_forward(zeroed, model.running[0], seq, Mode::Train, 0.5, &drop) == seq);
}

TEST_CASE("model forward") {
  const auto mc = small_config();
  const auto model = LruModel::init(mc, 4);
  Rng rng = make_stream(56, {});
  for (int K : {1, 7, 30}) {
    const RowMatrix w = random_rows(rng, K, 90);
    const auto logits = model_forward(model, w);
    CHECK(logits.size() == mc.classes);
    CHECK(model_forward(model, w) == logits);
  }
  const RowMatrix w = random_rows(rng, 12, 90);
  const RowMatrix rev = w.colwise().reverse();
  CHECK((model_forward(model, w) - model_forward(model, rev)).norm() > 1e-9);
  CHECK_THROWS(model_forward(model, random_rows(rng, 5, 89)));

  auto par = model;
  par.config.parallel_scan = true;
  CHECK((model_forward(par, w) - model_forward(model, w)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("softmax") {
  const auto p = softmax(Vector::Zero(2));
  CHECK(p(0) == 0.5);
  CHECK(p(1) == 0.5);
  Vector l(4);
  l << 0.3, -1.2, 2.0, 0.0;
  const auto q = softmax(l);
  CHECK(std::abs(q.sum() - 1.0) <= 1e-12);
  CHECK((softmax((l.array() + 17.0).matrix()) - q).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(q(2) > q(0));
  CHECK(q(0) > q(3));
  Vector big(2);
  big << 1000, 0;
  const auto s = softmax(big);
  CHECK(s.allFinite());
  CHECK(s(0) == doctest::Approx(1.0));
  CHECK(s(1) < 1e-300);
}

TEST_CASE("loss") {
  auto model = LruModel::init(small_config(), 1);
  CHECK(loss(Vector::Zero(2), 0, model, 0.0) == doctest::Approx(std::log(2.0)));
  Vector sure(2);
  sure << 60, 0;
  CHECK(loss(sure, 0, model, 0.0) < 1e-20);

  for (auto& r : param_refs(model.params)) r.vec().setZero();
  model.params.head_w(0, 0) = 2.0;
  model.params.head_b(0) = 5.0;  // biases carry no penalty
  CHECK(l2_penalty(model.params) == doctest::Approx(2.0));
  CHECK(loss(Vector::Zero(2), 0, model, 0.1) - std::log(2.0) == doctest::Approx(0.2));
}

TEST_CASE("weight decay covers weight matrices only") {
  auto model = LruModel::init(small_config(), 1);
  for (const auto& r : param_refs(model.params)) {
    const bool matrix = r.name.find("weight") != std::string::npos || r.name.find("lru.B") != std::string::npos ||
                        r.name.find("lru.C") != std::string::npos;
    CHECK_MESSAGE(r.weight_decay == matrix, r.name);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  auto g = swps::testing::tiny_grad_case();
  const auto errs = swps::testing::gradient_check(g);
  CHECK(errs.size() == 2 + 2 * 11 + 2);
  for (const auto& [name, err] : errs) CHECK_MESSAGE(err <= 1e-4, name << " rel err " << err);
}

TEST_CASE("gradients in eval mode also match finite differences") {
  auto g = swps::testing::tiny_grad_case(11, 0.0);
  g.opts.mode = Mode::Eval;
  Rng rng = make_stream(57, {});
  for (auto& rs : g.model.running) {
    for (Eigen::Index i = 0; i < rs.mean.size(); ++i) {
      rs.mean(i) = uniform(rng, -0.5, 0.5);
      rs.var(i) = uniform(rng, 0.5, 2.0);
    }
  }
  const auto errs = swps::testing::gradient_check(g);
  for (const auto& [name, err] : errs) CHECK_MESSAGE(err <= 1e-4, name << " rel err " << err);
}

TEST_CASE("gradients: duplicated batch and dead paths") {
  auto g = swps::testing::tiny_grad_case(3, 0.0);
  const std::vector<RowMatrix> one{g.inputs[0]};
  const std::vector<RowMatrix> two{g.inputs[0], g.inputs[0]};
  const std::vector<int> l1{1}, l2{1, 1};
  const auto a = gradients(g.model, one, l1, 0.0, g.opts);
  const auto b = gradients(g.model, two, l2, 0.0, g.opts);
  auto ra = param_refs(a.grads);
  auto rb = param_refs(b.grads);
  for (std::size_t k = 0; k < ra.size(); ++k) {
    const Vector va = ra[k].vec(), vb = rb[k].vec();
    CHECK_MESSAGE((va - vb).norm() <= 1e-12 * std::max(1.0, va.norm()), ra[k].name);
  }

  // With C and D zeroed the LRU output never reaches the block output, so
  // B, nu_log and theta receive exactly zero gradient.
  for (auto& blk : g.model.params.blocks) {
    blk.lru.C_re.setZero();
    blk.lru.C_im.setZero();
    blk.lru.D.setZero();
  }
  const auto dead = gradients(g.model, g.inputs, g.labels, 0.0, g.opts);
  for (const auto& blk : dead.grads.blocks) {
    CHECK(blk.lru.B_re.isZero(0.0));
    CHECK(blk.lru.B_im.isZero(0.0));
    CHECK(blk.lru.nu_log.isZero(0.0));
    CHECK(blk.lru.theta.isZero(0.0));
  }
}

TEST_CASE("non-finite loss names the sample") {
  auto g = swps::testing::tiny_grad_case(5, 0.0);
  g.inputs[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  g.opts.mode = Mode::Eval;
  try {
    gradients(g.model, g.inputs, g.labels, 0.0, g.opts);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.sample() == 1);
  }
}

TEST_CASE("parameter bookkeeping") {
  const auto model = LruModel::init(small_config(), 1);
  const auto z = model.params.zeros_like();
  CHECK(global_norm(z) == 0.0);
  CHECK(param_count(z) == param_count(model.params));
  CHECK(LruModel::init(small_config(), 1).params.enc_w == model.params.enc_w);
  CHECK(LruModel::init(small_config(), 2).params.enc_w != model.params.enc_w);
}
