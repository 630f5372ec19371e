#include "swps/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "swps/evaluate.hpp"

namespace swps {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train.lr0 must be > 0");
  if (!(lr_min >= 0.0 && lr_min <= lr0)) throw ConfigError("train.lr_min must lie in [0, lr0]");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("train.lr_decay must lie in (0, 1)");
  if (step_period < 1) throw ConfigError("train.step_period must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be > 0");
  if (!(l2 >= 0.0)) throw ConfigError("train.l2 must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (val_every < 0) throw ConfigError("train.val_every must be >= 0");
}

double lr_at(long step, const TrainConfig& cfg) {
  if (step < 0) throw std::invalid_argument("step must be non-negative");
  const long decays = step / cfg.step_period;
  const double lr = cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(decays));
  return std::max(cfg.lr_min, lr);
}

double clip_global(LruParams& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& r : param_refs(grads)) r.vec() *= s;
  }
  return norm;
}

AdamState AdamState::for_params(const LruParams& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(AdamState& state, LruParams& params, const LruParams& grads, double lr) {
  auto p = param_refs(params);
  auto g = param_refs(grads);
  auto m = param_refs(state.m);
  auto v = param_refs(state.v);
  if (p.size() != g.size() || p.size() != m.size()) throw std::invalid_argument("shape mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != g[i].size()) throw std::invalid_argument("shape mismatch in " + p[i].name);
    auto mv = m[i].vec();
    auto vv = v[i].vec();
    const auto gv = g[i].vec();
    mv = state.beta1 * mv + (1.0 - state.beta1) * gv;
    vv = state.beta2 * vv + (1.0 - state.beta2) * gv.cwiseAbs2();
    p[i].vec().array() -= lr * (mv.array() / c1) / ((vv.array() / c2).sqrt() + state.eps);
  }
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,train_acc,val_acc,lr\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.train_acc << ',';
    if (e.val_acc) out << *e.val_acc;
    out << ',' << e.lr << '\n';
  }
  return out.str();
}

TrainResult train_loop(LruModel model, const std::vector<Example>& train,
                       const std::vector<Example>* validation, const TrainConfig& cfg,
                       const PipelineConfig& pipeline, const TrainCallbacks& callbacks) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  cfg.validate();
  pipeline.validate();
  model.config.dropout = cfg.dropout;

  TrainResult result{model, std::nullopt, {}, 0};
  LruModel& m = result.model;
  AdamState adam = AdamState::for_params(m.params);
  std::optional<double> best_val;

  const std::size_t n = train.size();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  const double range = pipeline.geometry.rotation_range;
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto ep = static_cast<std::uint64_t>(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_stream(cfg.seed, {0x5f, ep});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng() % (i + 1)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    double lr = lr_at(result.steps, cfg);
    std::uint64_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch_size, ++batch_index) {
      const std::size_t count = std::min(batch_size, n - start);
      std::vector<RowMatrix> inputs(count);
      std::vector<int> labels(count);
      parallel_for(count, cfg.threads, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        const Example& ex = train[idx];
        Rng rng = make_stream(cfg.seed, {0xa6, ep, static_cast<std::uint64_t>(idx)});
        const double alpha = range > 0.0 ? uniform(rng, -range, range) : 0.0;
        std::optional<AugmentParams> aug;
        if (pipeline.geometry.augment) aug = sample_augment(pipeline.geometry.augment_ranges, rng);
        inputs[k] = featurize(ex.prepared, ex.rotation + alpha, aug ? &*aug : nullptr, pipeline).windows;
        labels[k] = ex.label;
      });

      ForwardOptions opts{Mode::Train, derive_seed(cfg.seed, {0xd0, ep, batch_index})};
      BatchGradient bg;
      try {
        bg = gradients(m, inputs, labels, cfg.l2, opts);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_index) + ": " + e.what(),
                            order[start + e.sample()]);
      }
      clip_global(bg.grads, cfg.clip_norm);
      lr = lr_at(result.steps, cfg);
      adam_step(adam, m.params, bg.grads, lr);
      update_running_stats(m, bg.batch_stats);
      ++result.steps;

      loss_sum += bg.loss * static_cast<double>(count);
      for (std::size_t k = 0; k < count; ++k) {
        Eigen::Index pred = 0;
        bg.logits.col(static_cast<Eigen::Index>(k)).maxCoeff(&pred);
        if (pred == labels[k]) ++correct;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    rec.lr = lr;
    const bool validate_now = validation && !validation->empty() && cfg.val_every > 0 &&
                              (epoch % cfg.val_every == 0 || epoch == cfg.epochs);
    if (validate_now) {
      rec.val_acc = accuracy(m, *validation, pipeline, cfg.threads);
      if (!best_val || *rec.val_acc > *best_val) {
        best_val = rec.val_acc;
        result.best = m;
      }
    }
    result.history.epochs.push_back(rec);
    if (callbacks.on_epoch && !callbacks.on_epoch(rec, m)) break;
  }
  return result;
}

}  // namespace swps
