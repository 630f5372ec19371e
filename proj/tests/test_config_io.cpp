#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "swps/cli.hpp"
#include "swps/config.hpp"
#include "swps/io.hpp"

using namespace swps;
namespace fs = std::filesystem;

namespace {

bool mentions(const ConfigErrors& e, const std::string& path) {
  for (const auto& s : e.errors()) {
    if (s.rfind(path, 0) == 0) return true;
  }
  return false;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("swps_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string tiny_config(const fs::path& dir) {
  return R"({"output_dir": ")" + (dir / "out").string() + R"(",
  "data": {"synthetic": {"n_classes": 3, "per_class": 4}},
  "preprocess": {"target_length": 24},
  "model": {"hidden": 8, "state": 8, "blocks": 1},
  "train": {"epochs": 2, "batch_size": 4, "val_every": 1},
  "eval": {"grid_count": 3, "grid_step_deg": 120}})";
}

}  // namespace

TEST_CASE("run config: defaults and round trip") {
  const auto c = parse_run_config("");
  CHECK(c.pipeline.window.w == 5);
  CHECK(c.pipeline.window.m == 2);
  CHECK(c.pipeline.preprocess.target_length == 128);
  CHECK(c.model.hidden == 256);
  CHECK(c.eval.grid.count == 30);
  CHECK(c.pipeline.geometry.rotation_range == doctest::Approx(kPi));
  const auto text = run_config_json(c);
  CHECK(run_config_json(parse_run_config(text)) == text);
}

TEST_CASE("run config: overrides") {
  const auto c = parse_run_config(R"({"window": {"w": 7}})",
                                  {"window.m=1", "geometry.mode=SE", "eval.vote=hard", "output_dir=x/y"});
  CHECK(c.pipeline.window.w == 7);
  CHECK(c.pipeline.window.m == 1);
  CHECK(c.pipeline.geometry.mode == HangingMode::SE);
  CHECK(c.eval.vote == VoteMode::Hard);
  CHECK(c.output_dir == "x/y");
}

TEST_CASE("run config: errors are collected with field paths") {
  try {
    parse_run_config(R"({"window": {"m": 3, "zz": 1}, "train": {"lr0": "fast", "epochs": 0}})",
                     {"model.hidden=0", "nope=1"});
    FAIL("expected ConfigErrors");
  } catch (const ConfigErrors& e) {
    CHECK(mentions(e, "window.m"));
    CHECK(mentions(e, "window.zz"));
    CHECK(mentions(e, "train.lr0"));
    CHECK(mentions(e, "train.epochs"));
    CHECK(mentions(e, "model.hidden"));
    CHECK(mentions(e, "nope"));
    CHECK(e.errors().size() == 6);
  }
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[1]"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"window": 5})"), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig mc;
  mc.input_dim = 90;
  mc.hidden = 6;
  mc.state = 5;
  mc.blocks = 2;
  mc.classes = 3;
  Checkpoint ck{LruModel::init(mc, 9), R"({"a":1})"};
  ck.model.running[1].mean(2) = 0.25;
  const auto bytes = encode_checkpoint(ck);
  CHECK(bytes == encode_checkpoint(ck));
  const auto back = decode_checkpoint(bytes);
  CHECK(back.run_config == ck.run_config);
  CHECK(back.model.params.enc_w == ck.model.params.enc_w);
  CHECK(back.model.params.blocks[1].lru.theta == ck.model.params.blocks[1].lru.theta);
  CHECK(back.model.running[1].mean == ck.model.running[1].mean);
  CHECK(encode_checkpoint(back) == bytes);

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(cut), ParseError);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);

  const auto dir = scratch("ckpt");
  save_checkpoint((dir / "m.ckpt").string(), ck);
  CHECK(encode_checkpoint(load_checkpoint((dir / "m.ckpt").string())) == bytes);
  CHECK(!fs::exists(dir / "m.ckpt.tmp"));
}

TEST_CASE("feature records round trip") {
  std::vector<std::uint8_t> bytes;
  RowMatrix a = RowMatrix::Random(4, 90), b = RowMatrix::Random(1, 14);
  append_feature_record(bytes, a);
  append_feature_record(bytes, b);
  CHECK(bytes.size() == 2 * 16 + (4 * 90 + 14) * 8);
  const auto back = decode_feature_records(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_feature_records(bytes), ParseError);
}

TEST_CASE("cli: featurize writes one 90-wide record per sample") {
  const auto dir = scratch("featurize");
  write_file_atomic((dir / "c.json").string(), tiny_config(dir));
  const auto syn = cli({"synth", "--config", (dir / "c.json").string(), "data.synthetic.n_classes=2",
                        "data.synthetic.per_class=5"});
  REQUIRE(syn.code == kExitOk);
  const auto input = (dir / "out" / "synth.txt").string();
  const auto r = cli({"featurize", "--config", (dir / "c.json").string(), "--input", input});
  REQUIRE(r.code == kExitOk);
  const auto recs = decode_feature_records(read_file_bytes((dir / "out" / "features.swpf").string()));
  REQUIRE(recs.size() == 10);
  for (const auto& m : recs) {
    CHECK(m.cols() == 90);
    CHECK(m.rows() == 20);
  }
  const auto index = read_file_text((dir / "out" / "features.swpf.index.csv").string());
  CHECK(std::count(index.begin(), index.end(), '\n') == 11);

  // bad config: exit 2 and nothing written
  write_file_atomic((dir / "bad.json").string(), R"({"output_dir": ")" + (dir / "bad").string() +
                                                     R"(", "window": {"m": 7}})");
  const auto bad = cli({"featurize", "--config", (dir / "bad.json").string(), "--input", input});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("window.m") != std::string::npos);
  CHECK(!fs::exists(dir / "bad"));

  // unreadable input: exit 1
  write_file_atomic((dir / "broken.txt").string(), std::string("A 0,0;x,1\n"));
  const auto broken = cli({"featurize", "--config", (dir / "c.json").string(), "--input",
                           (dir / "broken.txt").string()});
  CHECK(broken.code == kExitInput);
  CHECK(broken.err.find("line 1") != std::string::npos);
  CHECK(cli({"featurize", "--config", (dir / "c.json").string(), "--input", (dir / "none.txt").string()}).code ==
        kExitInput);
  CHECK(cli({"bogus", "--config", (dir / "c.json").string()}).code == kExitConfig);
}

TEST_CASE("cli: train, eval, ensemble, sweep") {
  const auto dir = scratch("train");
  const auto cfg = (dir / "c.json").string();
  write_file_atomic(cfg, tiny_config(dir));
  const auto out = dir / "out";

  REQUIRE(cli({"train", "--config", cfg}).code == kExitOk);
  const auto history = read_file_text((out / "history.csv").string());
  const auto ckpt = read_file_bytes((out / "model.ckpt").string());
  CHECK(fs::exists(out / "train.meta.json"));

  // eval reproduces the final validation accuracy
  REQUIRE(cli({"eval", "--config", cfg}).code == kExitOk);
  const auto last = history.substr(history.rfind('\n', history.size() - 2) + 1);
  std::vector<std::string> fields;
  std::stringstream ls(last);
  for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
  const double val_acc = std::stod(fields[3]);
  const auto eval_csv = read_file_text((out / "eval.csv").string());
  const auto eval_row = eval_csv.substr(eval_csv.find('\n') + 1);
  CHECK(std::stod(eval_row.substr(eval_row.find(',') + 1)) == val_acc);

  // a one-member ensemble agrees with eval
  const std::string member = "eval.members=[\"" + (out / "model.ckpt").string() + "\"]";
  REQUIRE(cli({"ensemble", "--config", cfg, member}).code == kExitOk);
  const auto ens_csv = read_file_text((out / "ensemble.csv").string());
  const auto ens_row = ens_csv.substr(ens_csv.find('\n') + 1);
  CHECK(ens_row.substr(ens_row.find(',')) == eval_row.substr(eval_row.find(',')));
  CHECK(cli({"ensemble", "--config", cfg}).code == kExitConfig);

  // retraining reproduces the primary outputs byte for byte
  REQUIRE(cli({"train", "--config", cfg, "--threads", "2"}).code == kExitOk);
  CHECK(read_file_text((out / "history.csv").string()) == history);
  CHECK(read_file_bytes((out / "model.ckpt").string()) == ckpt);

  // a checkpoint for a different label set is an input error
  CHECK(cli({"eval", "--config", cfg, "data.synthetic.n_classes=4"}).code == kExitInput);

  const auto sw = cli({"sweep", "--config", cfg, "sweep.w_list=[3]", "sweep.m_list=[1,2]", "train.epochs=1"});
  REQUIRE(sw.code == kExitOk);
  const auto sweep = read_file_text((out / "sweep.csv").string());
  CHECK(sweep.rfind("config_key,accuracy,n_samples,seeds\n", 0) == 0);
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 5);
}
