#include "swps/cli.hpp"

#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "swps/config.hpp"
#include "swps/evaluate.hpp"
#include "swps/io.hpp"

namespace swps {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  RunConfig cfg;
  std::string config_text;  // canonical JSON of cfg
  std::string input;
  std::string output;
  std::ostream& out;
  std::ostream& err;

  fs::path out_path(const std::string& name) const { return fs::path(cfg.output_dir) / name; }
};

Dataset load_path(const std::string& path, const RunConfig& c) {
  if (!fs::exists(path)) throw InputError("no such dataset file '" + path + "'");
  return load_dataset_file(path, c.data.binary, {c.data.codepage});
}

/// The full input dataset: the train file, or synthetic glyphs when no file
/// is configured.
Dataset load_primary(const RunConfig& c) {
  if (c.data.train.empty()) {
    const auto& s = c.data.synthetic;
    return synth_generate(s.n_classes, s.per_class, s.noise, s.seed);
  }
  return load_path(c.data.train, c);
}

/// Train and test sets sharing the train label map.
std::pair<Dataset, Dataset> load_train_test(const RunConfig& c) {
  Dataset all = load_primary(c);
  if (c.data.test.empty()) return split(all, {c.data.split, c.seed});
  Dataset test = load_path(c.data.test, c);
  for (const auto& s : test.samples) {
    if (!all.labels.contains(s.label)) {
      throw InputError("test sample tag '" + s.label + "' does not occur in the train set");
    }
  }
  Dataset remapped{std::move(test.samples), all.labels};
  return {std::move(all), std::move(remapped)};
}

ModelConfig model_config_for(const RunConfig& c, int classes) {
  ModelConfig mc = c.model;
  mc.input_dim = c.pipeline.feature_dim();
  mc.classes = classes;
  mc.dropout = c.train.dropout;
  return mc;
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_sidecar(const Context& ctx, const std::string& command, double seconds) {
  char host[256] = {0};
  gethostname(host, sizeof(host) - 1);
  json meta = {{"command", command},
               {"finished_utc", utc_now()},
               {"host", host},
               {"elapsed_seconds", seconds},
               {"threads", ctx.cfg.threads}};
  write_file_atomic(ctx.out_path(command + ".meta.json").string(), meta.dump(2) + "\n");
}

std::string checkpoint_payload(const Context& ctx, const LabelMap& labels) {
  // the thread cap lives in the sidecar; it never changes results
  json config = json::parse(ctx.config_text);
  config.erase("threads");
  json j = {{"config", std::move(config)}, {"labels", labels.tags()}};
  return j.dump();
}

std::vector<std::string> checkpoint_labels(const Checkpoint& ck) {
  if (ck.run_config.empty()) return {};
  const json j = json::parse(ck.run_config);
  return j.value("labels", std::vector<std::string>{});
}

Checkpoint load_member(const std::string& path, const Dataset& train) {
  if (!fs::exists(path)) throw InputError("no such checkpoint '" + path + "'");
  Checkpoint ck = load_checkpoint(path);
  const auto tags = checkpoint_labels(ck);
  if (!tags.empty() && tags != train.labels.tags()) {
    throw InputError("checkpoint '" + path + "' was trained on a different label set");
  }
  if (ck.model.config.classes != static_cast<int>(train.labels.size())) {
    throw InputError("checkpoint '" + path + "' has " + std::to_string(ck.model.config.classes) +
                     " classes, the data has " + std::to_string(train.labels.size()));
  }
  return ck;
}

int cmd_synth(Context& ctx) {
  const auto& s = ctx.cfg.data.synthetic;
  const Dataset ds = synth_generate(s.n_classes, s.per_class, s.noise, s.seed);
  const std::string path = ctx.output.empty() ? ctx.out_path("synth.txt").string() : ctx.output;
  write_file_atomic(path, serialize_text_dataset(ds));
  ctx.out << "wrote " << ds.size() << " samples to " << path << "\n";
  return kExitOk;
}

int cmd_preprocess(Context& ctx) {
  Dataset ds = ctx.input.empty() ? load_primary(ctx.cfg) : load_path(ctx.input, ctx.cfg);
  for (auto& s : ds.samples) s.trajectory = prepare_trajectory(s.trajectory, ctx.cfg.pipeline.preprocess);
  const std::string path =
      ctx.output.empty() ? ctx.out_path("preprocessed.txt").string() : ctx.output;
  write_file_atomic(path, serialize_text_dataset(ds));
  ctx.out << "wrote " << ds.size() << " samples to " << path << "\n";
  return kExitOk;
}

int cmd_featurize(Context& ctx) {
  const Dataset ds = ctx.input.empty() ? load_primary(ctx.cfg) : load_path(ctx.input, ctx.cfg);
  const auto& p = ctx.cfg.pipeline;
  const auto examples = prepare_examples(ds, p.preprocess);
  std::vector<Featurized> feats(examples.size());
  parallel_for(examples.size(), ctx.cfg.threads, [&](std::size_t i) {
    feats[i] = featurize(examples[i].prepared, 0.0, nullptr, p);
  });
  std::vector<std::uint8_t> bytes;
  std::ostringstream index;
  index << "record,tag,label,K,dim,degenerate\n";
  for (std::size_t i = 0; i < feats.size(); ++i) {
    append_feature_record(bytes, feats[i].windows);
    index << i << ',' << ds.samples[i].label << ',' << examples[i].label << ','
          << feats[i].windows.rows() << ',' << feats[i].windows.cols() << ','
          << (feats[i].degenerate ? 1 : 0) << '\n';
  }
  const std::string path = ctx.output.empty() ? ctx.out_path("features.swpf").string() : ctx.output;
  write_file_atomic(path, bytes);
  write_file_atomic(path + ".index.csv", index.str());
  ctx.out << "wrote " << feats.size() << " feature records (K=" << p.window_count()
          << ", dim=" << p.feature_dim() << ") to " << path << "\n";
  return kExitOk;
}

int cmd_train(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto [train_ds, test_ds] = load_train_test(c);
  const auto train = prepare_examples(train_ds, c.pipeline.preprocess);
  const auto test = rotation_grid_expand(prepare_examples(test_ds, c.pipeline.preprocess), c.eval.grid);
  const ModelConfig mc = model_config_for(c, static_cast<int>(train_ds.labels.size()));

  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& rec, const LruModel&) {
    ctx.out << "epoch " << rec.epoch << " loss " << rec.loss << " train_acc " << rec.train_acc;
    if (rec.val_acc) ctx.out << " val_acc " << *rec.val_acc;
    ctx.out << " lr " << rec.lr << "\n";
    return true;
  };
  auto result = train_loop(LruModel::init(mc, c.seed), train, test.empty() ? nullptr : &test, c.train,
                           c.pipeline, cb);
  save_checkpoint(ctx.out_path("model.ckpt").string(),
                  {result.model, checkpoint_payload(ctx, train_ds.labels)});
  if (result.best) {
    save_checkpoint(ctx.out_path("best.ckpt").string(),
                    {*result.best, checkpoint_payload(ctx, train_ds.labels)});
  }
  write_file_atomic(ctx.out_path("history.csv").string(), result.history.to_csv());
  ctx.out << "saved " << ctx.out_path("model.ckpt").string() << "\n";
  return kExitOk;
}

struct EvalData {
  Dataset train;
  std::vector<Example> test;
  std::vector<int> labels;
};

EvalData eval_data(const RunConfig& c) {
  auto [train_ds, test_ds] = load_train_test(c);
  EvalData d{std::move(train_ds), {}, {}};
  d.test = rotation_grid_expand(prepare_examples(test_ds, c.pipeline.preprocess), c.eval.grid);
  if (d.test.empty()) throw InputError("the test set is empty");
  for (const auto& ex : d.test) d.labels.push_back(ex.label);
  return d;
}

void write_predictions(Context& ctx, const std::string& name, const std::string& header_key,
                       const std::string& key, const EvalData& d, const std::vector<int>& pred) {
  const double acc = accuracy_of(pred, d.labels);
  std::ostringstream csv;
  csv << header_key << ",accuracy,n_samples\n" << key << ',' << format_double(acc) << ',' << d.labels.size() << '\n';
  write_file_atomic(ctx.out_path(name + ".csv").string(), csv.str());
  if (ctx.cfg.eval.confusion) {
    const auto counts = confusion_counts(d.labels, pred, static_cast<int>(d.train.labels.size()));
    write_file_atomic(ctx.out_path(name + "_confusion.csv").string(),
                      confusion_csv(counts, d.train.labels.tags()));
  }
  ctx.out << name << " accuracy " << format_double(acc) << " on " << d.labels.size() << " samples\n";
}

int cmd_eval(Context& ctx) {
  const auto& c = ctx.cfg;
  const std::string path = c.eval.checkpoint.empty() ? ctx.out_path("model.ckpt").string() : c.eval.checkpoint;
  const EvalData d = eval_data(c);
  const Checkpoint ck = load_member(path, d.train);
  const Matrix probs = predict_proba(ck.model, d.test, c.pipeline, c.threads);
  write_predictions(ctx, "eval", "checkpoint", path, d, argmax_columns(probs));
  return kExitOk;
}

int cmd_ensemble(Context& ctx) {
  const auto& c = ctx.cfg;
  if (c.eval.members.empty()) throw ConfigErrors({"eval.members: ensemble needs at least one checkpoint"});
  const EvalData d = eval_data(c);
  std::vector<Matrix> probs;
  std::string key;
  for (const auto& m : c.eval.members) {
    const Checkpoint ck = load_member(m, d.train);
    probs.push_back(predict_proba(ck.model, d.test, c.pipeline, c.threads));
    key += (key.empty() ? "" : ";") + m;
  }
  write_predictions(ctx, "ensemble", "members", key, d, ensemble_predict(probs, c.eval.vote));
  return kExitOk;
}

int cmd_sweep(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto [train_ds, test_ds] = load_train_test(c);
  ExperimentSetup setup;
  setup.train = prepare_examples(train_ds, c.pipeline.preprocess);
  setup.test = prepare_examples(test_ds, c.pipeline.preprocess);
  setup.classes = static_cast<int>(train_ds.labels.size());
  setup.model = c.model;
  setup.train_cfg = c.train;
  setup.pipeline = c.pipeline;
  setup.grid = c.eval.grid;
  setup.seeds = c.sweep.seeds;
  setup.threads = c.threads;
  const ExperimentReport report =
      c.sweep.kind == "window" ? sweep_window_degree(setup, c.sweep.w_list, c.sweep.m_list, c.sweep.hanging)
                               : rotation_range_experiment(setup, c.sweep.ranges_deg);
  write_file_atomic(ctx.out_path("sweep.csv").string(), report.to_csv());
  for (const auto& e : report.errors) ctx.err << "sweep cell failed: " << e << "\n";
  for (const auto& r : report.rows) ctx.out << r.config_key << " accuracy " << format_double(r.accuracy) << "\n";
  if (report.rows.empty() && !report.errors.empty()) return kExitRuntime;
  return kExitOk;
}

int dispatch(Context& ctx, const std::string& command) {
  if (command == "synth") return cmd_synth(ctx);
  if (command == "preprocess") return cmd_preprocess(ctx);
  if (command == "featurize") return cmd_featurize(ctx);
  if (command == "train") return cmd_train(ctx);
  if (command == "eval") return cmd_eval(ctx);
  if (command == "ensemble") return cmd_ensemble(ctx);
  return cmd_sweep(ctx);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotation-free online handwriting recognition", "swps-lru"};
  std::string command;
  std::string config_path;
  std::string input;
  std::string output;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  app.add_option("command", command, "synth | preprocess | featurize | train | eval | ensemble | sweep")
      ->required()
      ->check(CLI::IsMember({"synth", "preprocess", "featurize", "train", "eval", "ensemble", "sweep"}));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--threads", threads, "Worker thread cap");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--input", input, "Dataset to read (preprocess, featurize)");
  app.add_option("--output", output, "Output file (synth, preprocess, featurize)");
  app.add_option("overrides", overrides, "key.path=value config overrides");

  std::vector<std::string> argv_store{"swps-lru"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunConfig cfg;
  std::string text;
  try {
    if (!fs::exists(config_path)) {
      err << "error: no such config file '" << config_path << "'\n";
      return kExitConfig;
    }
    text = read_file_text(config_path);
    if (threads) overrides.push_back("threads=" + std::to_string(*threads));
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    cfg = parse_run_config(text, overrides);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  Context ctx{cfg, run_config_json(cfg), input, output, out, err};
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::create_directories(cfg.output_dir);
    const int code = dispatch(ctx, command);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_sidecar(ctx, command, secs);
    return code;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const StructuralError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace swps
