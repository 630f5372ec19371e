#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swps/evaluate.hpp"
#include "swps/lru_net.hpp"
#include "swps/pipeline.hpp"
#include "swps/train.hpp"

namespace swps {

struct SyntheticSpec {
  int n_classes = 10;
  int per_class = 50;
  double noise = 0.04;
  std::uint64_t seed = 1;
};

struct DataConfig {
  std::string train;      // dataset path; empty means synthetic data
  std::string test;       // optional; when empty the train set is split
  bool binary = false;
  std::string codepage;   // binary tag decoding, empty = raw bytes
  double split = 0.8;     // train fraction when `test` is empty
  SyntheticSpec synthetic;
};

struct EvalConfig {
  RotationGrid grid;
  std::string checkpoint;            // empty = <output_dir>/model.ckpt
  std::vector<std::string> members;  // ensemble checkpoints
  VoteMode vote = VoteMode::Soft;
  bool confusion = false;
};

struct SweepConfig {
  std::string kind = "window";  // "window" or "rotation"
  std::vector<int> w_list{3, 5, 7};
  std::vector<int> m_list{1, 2};
  std::vector<bool> hanging{true, false};
  std::vector<double> ranges_deg{0, 45, 90, 180};
  std::vector<std::uint64_t> seeds{1};
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output_dir = "out";
  DataConfig data;
  PipelineConfig pipeline;
  ModelConfig model;  // input_dim and classes are derived at run time
  TrainConfig train;
  EvalConfig eval;
  SweepConfig sweep;
};

/// Every invalid field, one "path: reason" entry each.
class ConfigErrors : public ConfigError {
 public:
  explicit ConfigErrors(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parses a JSON config document on top of the defaults, then applies
/// `key.path=value` overrides (value parsed as JSON, else taken as a
/// string). Unknown keys, type mismatches and out-of-range values are all
/// collected and thrown together as ConfigErrors.
RunConfig parse_run_config(const std::string& json_text,
                           const std::vector<std::string>& overrides = {});

/// Canonical JSON (sorted keys, 2-space indent). parse_run_config of the
/// result reproduces the same config.
std::string run_config_json(const RunConfig& cfg);

/// Validates the whole config, collecting all problems.
void validate_run_config(const RunConfig& cfg);

}  // namespace swps
