#include <algorithm>

#include "doctest.h"
#include "swps/evaluate.hpp"
#include "swps/train.hpp"

using namespace swps;

namespace {

struct TinySetup {
  std::vector<Example> train;
  PipelineConfig pipeline;
  ModelConfig model;
  TrainConfig cfg;
};

TinySetup tiny_setup(int epochs) {
  TinySetup s;
  s.pipeline.preprocess.target_length = 32;
  s.pipeline.geometry.rotation_range = 0.0;
  s.train = prepare_examples(synth_generate(5, 6, 0.02, 3), s.pipeline.preprocess);
  s.model.hidden = 16;
  s.model.state = 16;
  s.model.blocks = 1;
  s.model.classes = 5;
  s.cfg.epochs = epochs;
  s.cfg.batch_size = 8;
  s.cfg.seed = 4;
  s.cfg.val_every = 0;
  s.cfg.lr0 = 3e-3;
  return s;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 1e-3);
  CHECK(lr_at(4499, cfg) == 1e-3);
  CHECK(lr_at(4500, cfg) == 5e-4);
  CHECK(lr_at(9000, cfg) == 2.5e-4);
  CHECK(lr_at(100000, cfg) == 1e-6);
  double prev = lr_at(0, cfg);
  for (long s = 0; s < 200000; s += 997) {
    const double lr = lr_at(s, cfg);
    CHECK(lr <= prev);
    CHECK(lr >= cfg.lr_min);
    CHECK(lr <= cfg.lr0);
    prev = lr;
  }
  CHECK_THROWS(lr_at(-1, cfg));
}

TEST_CASE("global clipping") {
  ModelConfig mc;
  mc.input_dim = 4;
  mc.hidden = 3;
  mc.state = 2;
  mc.blocks = 1;
  mc.classes = 2;
  auto g = LruModel::init(mc, 1).params.zeros_like();
  g.head_b(0) = 2.0;
  auto big = g;
  CHECK(clip_global(big, 1.0) == doctest::Approx(2.0));
  CHECK(big.head_b(0) == doctest::Approx(1.0));

  g.head_b(0) = 0.5;
  auto small = g;
  clip_global(small, 1.0);
  CHECK(small.head_b(0) == 0.5);

  auto rnd = LruModel::init(mc, 3).params;
  for (double max : {1e-3, 0.1, 1.0, 10.0}) {
    auto c = rnd;
    clip_global(c, max);
    CHECK(global_norm(c) <= max * (1.0 + 1e-12));
  }
  CHECK_THROWS(clip_global(rnd, 0.0));
}

TEST_CASE("Adam") {
  ModelConfig mc;
  mc.input_dim = 2;
  mc.hidden = 2;
  mc.state = 2;
  mc.blocks = 1;
  mc.classes = 2;
  auto params = LruModel::init(mc, 1).params;
  const auto before = params;
  auto state = AdamState::for_params(params);

  auto g = params.zeros_like();
  g.head_b(0) = 1.0;
  adam_step(state, params, g, 1e-3);
  CHECK(state.step == 1);
  CHECK(before.head_b(0) - params.head_b(0) == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(params.head_b(1) == before.head_b(1));

  auto p2 = before;
  auto s2 = AdamState::for_params(p2);
  const auto zero = p2.zeros_like();
  for (int i = 0; i < 10; ++i) adam_step(s2, p2, zero, 1e-2);
  CHECK(p2.enc_w == before.enc_w);
  CHECK(p2.head_b == before.head_b);

  auto p3 = before;
  auto s3 = AdamState::for_params(p3);
  auto rg = before;  // arbitrary gradient values
  adam_step(s3, p3, rg, 1e-3);
  auto r3 = param_refs(p3);
  const auto r0 = param_refs(before);
  for (std::size_t k = 0; k < r3.size(); ++k) {
    CHECK((r3[k].vec() - r0[k].vec()).cwiseAbs().maxCoeff() <= 1e-3 * (1 + 1e-8));
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  auto s = tiny_setup(20);
  const auto a = train_loop(LruModel::init(s.model, 1), s.train, nullptr, s.cfg, s.pipeline);
  const auto b = train_loop(LruModel::init(s.model, 1), s.train, nullptr, s.cfg, s.pipeline);
  CHECK(a.history.to_csv() == b.history.to_csv());
  CHECK(a.model.params.head_w == b.model.params.head_w);
  REQUIRE(a.history.epochs.size() == 20);
  const long batches = (static_cast<long>(s.train.size()) + s.cfg.batch_size - 1) / s.cfg.batch_size;
  CHECK(a.steps == 20 * batches);

  // trend, not per-epoch monotonicity: medians of consecutive 5-epoch blocks
  std::vector<double> medians;
  for (int blk = 0; blk < 4; ++blk) {
    std::vector<double> l;
    for (int e = 0; e < 5; ++e) l.push_back(a.history.epochs[static_cast<std::size_t>(blk * 5 + e)].loss);
    std::nth_element(l.begin(), l.begin() + 2, l.end());
    medians.push_back(l[2]);
  }
  for (std::size_t i = 1; i < medians.size(); ++i) CHECK(medians[i] < medians[i - 1]);

  auto threaded = s.cfg;
  threaded.threads = 3;
  const auto c = train_loop(LruModel::init(s.model, 1), s.train, nullptr, threaded, s.pipeline);
  CHECK(c.history.to_csv() == a.history.to_csv());
}

TEST_CASE("step counter drives the schedule") {
  auto s = tiny_setup(3);
  s.cfg.step_period = 4;
  const auto r = train_loop(LruModel::init(s.model, 1), s.train, nullptr, s.cfg, s.pipeline);
  // 30 samples in batches of 8: 4 steps per epoch, last step of epoch e uses step 4e-1
  CHECK(r.history.epochs[0].lr == s.cfg.lr0);
  CHECK(r.history.epochs[1].lr == s.cfg.lr0 * 0.5);
  CHECK(r.history.epochs[2].lr == s.cfg.lr0 * 0.25);
}

TEST_CASE("validation keeps the best model and callbacks can stop") {
  auto s = tiny_setup(6);
  s.cfg.val_every = 2;
  int calls = 0;
  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord&, const LruModel&) { return ++calls < 4; };
  const auto r = train_loop(LruModel::init(s.model, 1), s.train, &s.train, s.cfg, s.pipeline, cb);
  CHECK(calls == 4);
  CHECK(r.history.epochs.size() == 4);
  CHECK(!r.history.epochs[0].val_acc);
  CHECK(r.history.epochs[1].val_acc);
  CHECK(r.best.has_value());
  const std::string csv = r.history.to_csv();
  CHECK(csv.rfind("epoch,loss,train_acc,val_acc,lr\n", 0) == 0);
  CHECK(csv.find("\n1,") != std::string::npos);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr_min = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lr_decay = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  auto s = tiny_setup(1);
  CHECK_THROWS(train_loop(LruModel::init(s.model, 1), {}, nullptr, s.cfg, s.pipeline));
}
