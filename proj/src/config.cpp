#include "swps/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace swps {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kDeg = kPi / 180.0;

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

json to_json(const RunConfig& c) {
  const auto& p = c.pipeline;
  const auto& g = p.geometry;
  json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["data"] = {{"train", c.data.train},
               {"test", c.data.test},
               {"binary", c.data.binary},
               {"codepage", c.data.codepage},
               {"split", c.data.split},
               {"synthetic",
                {{"n_classes", c.data.synthetic.n_classes},
                 {"per_class", c.data.synthetic.per_class},
                 {"noise", c.data.synthetic.noise},
                 {"seed", c.data.synthetic.seed}}}};
  j["preprocess"] = {{"redundancy_tol", p.preprocess.redundancy_tol},
                     {"resample_spacing", p.preprocess.resample_spacing},
                     {"target_length", p.preprocess.target_length}};
  j["geometry"] = {{"hanging", g.hanging},
                   {"mode", to_string(g.mode)},
                   {"rotation_range_deg", g.rotation_range / kDeg},
                   {"augment", g.augment},
                   {"scale_jitter", g.augment_ranges.scale},
                   {"translate_jitter", g.augment_ranges.shift},
                   {"elastic_max", g.augment_ranges.elastic_max}};
  j["window"] = {{"w", p.window.w}, {"t", p.window.t}, {"m", p.window.m}};
  j["model"] = {{"hidden", c.model.hidden},
                {"state", c.model.state},
                {"blocks", c.model.blocks},
                {"r_min", c.model.init.r_min},
                {"r_max", c.model.init.r_max},
                {"max_phase", c.model.init.max_phase},
                {"parallel_scan", c.model.parallel_scan}};
  j["train"] = {{"lr0", c.train.lr0},
                {"lr_decay", c.train.lr_decay},
                {"step_period", c.train.step_period},
                {"lr_min", c.train.lr_min},
                {"clip_norm", c.train.clip_norm},
                {"l2", c.train.l2},
                {"dropout", c.train.dropout},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"val_every", c.train.val_every}};
  j["eval"] = {{"grid_count", c.eval.grid.count},
               {"grid_step_deg", c.eval.grid.step / kDeg},
               {"checkpoint", c.eval.checkpoint},
               {"members", c.eval.members},
               {"vote", c.eval.vote == VoteMode::Soft ? "soft" : "hard"},
               {"confusion", c.eval.confusion}};
  j["sweep"] = {{"kind", c.sweep.kind},
                {"w_list", c.sweep.w_list},
                {"m_list", c.sweep.m_list},
                {"hanging", c.sweep.hanging},
                {"ranges_deg", c.sweep.ranges_deg},
                {"seeds", c.sweep.seeds}};
  return j;
}

// Overlays `src` onto `dst`, which holds every known key.
void merge(json& dst, const json& src, const std::string& path, std::vector<std::string>& errors) {
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!dst.contains(it.key())) {
      errors.push_back(key + ": unknown key");
      continue;
    }
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) {
        errors.push_back(key + ": expected a section");
        continue;
      }
      merge(slot, *it, key, errors);
    } else if (it->is_object()) {
      errors.push_back(key + ": expected a value, got a section");
    } else {
      slot = *it;
    }
  }
}

void apply_override(json& tree, const std::string& text, std::vector<std::string>& errors) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back(text + ": override must look like key.path=value");
    return;
  }
  const std::string path = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  json* node = &tree;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) {
      errors.push_back(path + ": unknown key");
      return;
    }
    node = &(*node)[part];
  }
  if (node->is_object()) {
    errors.push_back(path + ": cannot override a whole section");
    return;
  }
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  *node = std::move(value);
}

class FieldReader {
 public:
  FieldReader(const json& root, std::vector<std::string>& errors) : root_(root), errors_(errors) {}

  template <class T>
  void get(const std::string& path, T& out) {
    const json* node = &root_;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) node = &node->at(part);
    try {
      if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!node->is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (node->is_number_integer() && !node->is_number_unsigned()) {
            throw std::invalid_argument("expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_same_v<T, double>) {
        if (!node->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!node->is_boolean()) throw std::invalid_argument("expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!node->is_string()) throw std::invalid_argument("expected a string");
      } else {
        if (!node->is_array()) throw std::invalid_argument("expected a list");
      }
      out = node->get<T>();
    } catch (const std::exception& e) {
      std::string why = e.what();
      if (dynamic_cast<const json::exception*>(&e)) why = "wrong element type";
      errors_.push_back(path + ": " + why);
    }
  }

 private:
  const json& root_;
  std::vector<std::string>& errors_;
};

RunConfig from_json(const json& j, std::vector<std::string>& errors) {
  RunConfig c;
  FieldReader r(j, errors);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.get("output_dir", c.output_dir);
  r.get("data.train", c.data.train);
  r.get("data.test", c.data.test);
  r.get("data.binary", c.data.binary);
  r.get("data.codepage", c.data.codepage);
  r.get("data.split", c.data.split);
  r.get("data.synthetic.n_classes", c.data.synthetic.n_classes);
  r.get("data.synthetic.per_class", c.data.synthetic.per_class);
  r.get("data.synthetic.noise", c.data.synthetic.noise);
  r.get("data.synthetic.seed", c.data.synthetic.seed);

  auto& p = c.pipeline;
  r.get("preprocess.redundancy_tol", p.preprocess.redundancy_tol);
  r.get("preprocess.resample_spacing", p.preprocess.resample_spacing);
  r.get("preprocess.target_length", p.preprocess.target_length);
  r.get("geometry.hanging", p.geometry.hanging);
  std::string mode = to_string(p.geometry.mode);
  r.get("geometry.mode", mode);
  try {
    p.geometry.mode = parse_hanging_mode(mode);
  } catch (const std::exception&) {
    errors.push_back("geometry.mode: expected SC, SE or ASE");
  }
  double range_deg = 180.0;
  r.get("geometry.rotation_range_deg", range_deg);
  p.geometry.rotation_range = range_deg * kDeg;
  r.get("geometry.augment", p.geometry.augment);
  r.get("geometry.scale_jitter", p.geometry.augment_ranges.scale);
  r.get("geometry.translate_jitter", p.geometry.augment_ranges.shift);
  r.get("geometry.elastic_max", p.geometry.augment_ranges.elastic_max);
  r.get("window.w", p.window.w);
  r.get("window.t", p.window.t);
  r.get("window.m", p.window.m);

  r.get("model.hidden", c.model.hidden);
  r.get("model.state", c.model.state);
  r.get("model.blocks", c.model.blocks);
  r.get("model.r_min", c.model.init.r_min);
  r.get("model.r_max", c.model.init.r_max);
  r.get("model.max_phase", c.model.init.max_phase);
  r.get("model.parallel_scan", c.model.parallel_scan);

  r.get("train.lr0", c.train.lr0);
  r.get("train.lr_decay", c.train.lr_decay);
  r.get("train.step_period", c.train.step_period);
  r.get("train.lr_min", c.train.lr_min);
  r.get("train.clip_norm", c.train.clip_norm);
  r.get("train.l2", c.train.l2);
  r.get("train.dropout", c.train.dropout);
  r.get("train.batch_size", c.train.batch_size);
  r.get("train.epochs", c.train.epochs);
  r.get("train.val_every", c.train.val_every);

  r.get("eval.grid_count", c.eval.grid.count);
  double step_deg = 12.0;
  r.get("eval.grid_step_deg", step_deg);
  c.eval.grid.step = step_deg * kDeg;
  r.get("eval.checkpoint", c.eval.checkpoint);
  r.get("eval.members", c.eval.members);
  std::string vote = "soft";
  r.get("eval.vote", vote);
  if (vote == "soft") {
    c.eval.vote = VoteMode::Soft;
  } else if (vote == "hard") {
    c.eval.vote = VoteMode::Hard;
  } else {
    errors.push_back("eval.vote: expected soft or hard");
  }
  r.get("eval.confusion", c.eval.confusion);

  r.get("sweep.kind", c.sweep.kind);
  r.get("sweep.w_list", c.sweep.w_list);
  r.get("sweep.m_list", c.sweep.m_list);
  r.get("sweep.hanging", c.sweep.hanging);
  r.get("sweep.ranges_deg", c.sweep.ranges_deg);
  r.get("sweep.seeds", c.sweep.seeds);

  c.model.dropout = c.train.dropout;
  c.train.seed = c.seed;
  c.train.threads = c.threads;
  return c;
}

void check(std::vector<std::string>& errors, bool ok, const std::string& msg) {
  if (!ok) errors.push_back(msg);
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<std::string> errors)
    : ConfigError(join_errors(errors)), errors_(std::move(errors)) {}

void validate_run_config(const RunConfig& c) {
  std::vector<std::string> e;
  check(e, c.threads >= 1, "threads: must be >= 1");
  check(e, !c.output_dir.empty(), "output_dir: must not be empty");
  check(e, c.data.split > 0.0 && c.data.split < 1.0, "data.split: must lie in (0, 1)");
  const auto& s = c.data.synthetic;
  check(e, s.n_classes >= 1 && static_cast<std::size_t>(s.n_classes) <= synth_template_count(),
        "data.synthetic.n_classes: must lie in [1, " + std::to_string(synth_template_count()) + "]");
  check(e, s.per_class >= 1, "data.synthetic.per_class: must be >= 1");
  check(e, s.noise >= 0.0, "data.synthetic.noise: must be >= 0");

  const auto& p = c.pipeline;
  check(e, p.preprocess.redundancy_tol >= 0.0, "preprocess.redundancy_tol: must be >= 0");
  check(e, p.preprocess.resample_spacing > 0.0, "preprocess.resample_spacing: must be > 0");
  check(e, p.preprocess.target_length >= 2, "preprocess.target_length: must be >= 2");
  const auto& g = p.geometry;
  check(e, g.rotation_range >= 0.0 && g.rotation_range <= kPi + 1e-12,
        "geometry.rotation_range_deg: must lie in [0, 180]");
  check(e, g.augment_ranges.scale >= 0.0 && g.augment_ranges.scale < 1.0,
        "geometry.scale_jitter: must lie in [0, 1)");
  check(e, g.augment_ranges.shift >= 0.0, "geometry.translate_jitter: must be >= 0");
  check(e, g.augment_ranges.elastic_max >= 0.0, "geometry.elastic_max: must be >= 0");
  check(e, p.window.w >= 2, "window.w: must be >= 2");
  check(e, p.window.t >= 1, "window.t: must be >= 1");
  check(e, p.window.m == 1 || p.window.m == 2, "window.m: must be 1 or 2");
  check(e, p.window.w <= p.preprocess.target_length, "window.w: exceeds preprocess.target_length");

  const auto& m = c.model;
  check(e, m.hidden >= 1, "model.hidden: must be >= 1");
  check(e, m.state >= 1, "model.state: must be >= 1");
  check(e, m.blocks >= 0, "model.blocks: must be >= 0");
  check(e, m.init.r_min > 0.0 && m.init.r_min < m.init.r_max && m.init.r_max < 1.0,
        "model.r_min/r_max: need 0 < r_min < r_max < 1");
  check(e, m.init.max_phase > 0.0 && m.init.max_phase <= 2.0 * kPi + 1e-12,
        "model.max_phase: must lie in (0, 2*pi]");

  const auto& t = c.train;
  check(e, t.lr0 > 0.0, "train.lr0: must be > 0");
  check(e, t.lr_decay > 0.0 && t.lr_decay < 1.0, "train.lr_decay: must lie in (0, 1)");
  check(e, t.step_period >= 1, "train.step_period: must be >= 1");
  check(e, t.lr_min >= 0.0 && t.lr_min <= t.lr0, "train.lr_min: must lie in [0, lr0]");
  check(e, t.clip_norm > 0.0, "train.clip_norm: must be > 0");
  check(e, t.l2 >= 0.0, "train.l2: must be >= 0");
  check(e, t.dropout >= 0.0 && t.dropout < 1.0, "train.dropout: must lie in [0, 1)");
  check(e, t.batch_size >= 1, "train.batch_size: must be >= 1");
  check(e, t.epochs >= 1, "train.epochs: must be >= 1");
  check(e, t.val_every >= 0, "train.val_every: must be >= 0");

  check(e, c.eval.grid.count >= 1, "eval.grid_count: must be >= 1");
  check(e, std::isfinite(c.eval.grid.step), "eval.grid_step_deg: must be finite");

  const auto& sw = c.sweep;
  check(e, sw.kind == "window" || sw.kind == "rotation", "sweep.kind: expected window or rotation");
  check(e, !sw.seeds.empty(), "sweep.seeds: must not be empty");
  check(e, std::is_sorted(sw.ranges_deg.begin(), sw.ranges_deg.end()),
        "sweep.ranges_deg: must be ascending");
  for (double r : sw.ranges_deg) {
    if (!(r >= 0.0 && r <= 180.0)) {
      e.push_back("sweep.ranges_deg: entries must lie in [0, 180]");
      break;
    }
  }
  if (!e.empty()) throw ConfigErrors(std::move(e));
}

RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  std::vector<std::string> errors;
  json tree = to_json(RunConfig{});
  if (!json_text.empty()) {
    json user;
    try {
      user = json::parse(json_text);
    } catch (const json::parse_error& ex) {
      throw ConfigErrors({std::string("config is not valid JSON: ") + ex.what()});
    }
    if (!user.is_object()) throw ConfigErrors({"config: top level must be an object"});
    merge(tree, user, "", errors);
  }
  for (const auto& o : overrides) apply_override(tree, o, errors);
  RunConfig cfg = from_json(tree, errors);
  try {
    validate_run_config(cfg);
  } catch (const ConfigErrors& ce) {
    errors.insert(errors.end(), ce.errors().begin(), ce.errors().end());
  }
  if (!errors.empty()) throw ConfigErrors(std::move(errors));
  return cfg;
}

std::string run_config_json(const RunConfig& cfg) { return to_json(cfg).dump(2); }

}  // namespace swps
