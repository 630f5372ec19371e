#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swps/lru_net.hpp"
#include "swps/pipeline.hpp"
#include "swps/train.hpp"

namespace swps {

struct RotationGrid {
  int count = 30;
  double step = 2.0 * kPi / 30.0;  // 12 degrees

  void validate() const;
  /// k * step for k = 0..count-1.
  std::vector<double> angles() const;
};

/// Replicates every example `grid.count` times with rotations k * step added
/// to its own. Output order: example-major, angle-minor.
std::vector<Example> rotation_grid_expand(const std::vector<Example>& examples,
                                          const RotationGrid& grid);

/// Like rotation_grid_expand but keeps only grid angles whose wrapped value
/// in (-pi, pi] has magnitude <= max_abs_angle (plus 1e-9).
std::vector<Example> rotation_grid_expand_within(const std::vector<Example>& examples,
                                                 const RotationGrid& grid, double max_abs_angle);

/// Softmax probabilities (classes x N), eval mode, no augmentation.
Matrix predict_proba(const LruModel& model, const std::vector<Example>& examples,
                     const PipelineConfig& pipeline, int threads = 1, int batch = 128);

std::vector<int> argmax_columns(const Matrix& probs);

/// Fraction of examples whose argmax probability equals the label.
double accuracy(const LruModel& model, const std::vector<Example>& examples,
                const PipelineConfig& pipeline, int threads = 1);

double accuracy_of(std::span<const int> predicted, std::span<const int> labels);

/// Argmax of the mean probability vector; ties go to the lowest index.
int soft_vote(const std::vector<Vector>& probs);
/// Most frequent label; ties go to the lowest label.
int hard_vote(std::span<const int> labels);

enum class VoteMode { Soft, Hard };

/// Per-sample ensemble decisions from member probability matrices
/// (each classes x N, same ordering).
std::vector<int> ensemble_predict(const std::vector<Matrix>& member_probs, VoteMode mode);

/// counts(true, predicted).
Eigen::MatrixXi confusion_counts(std::span<const int> labels, std::span<const int> predicted,
                                 int classes);
std::string confusion_csv(const Eigen::MatrixXi& counts, const std::vector<std::string>& tags);

struct ReportRow {
  std::string config_key;
  double accuracy = 0.0;
  std::size_t n_samples = 0;
  std::vector<std::uint64_t> seeds;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> errors;  // cells that failed, with reason

  /// config_key,accuracy,n_samples,seeds (seeds joined by ';').
  std::string to_csv() const;
};

/// Inputs shared by the experiment drivers.
struct ExperimentSetup {
  std::vector<Example> train;
  std::vector<Example> test;  // unexpanded
  int classes = 0;
  ModelConfig model;
  TrainConfig train_cfg;
  PipelineConfig pipeline;
  RotationGrid grid;
  std::vector<std::uint64_t> seeds{1};
  int threads = 1;
};

/// Trains one model per seed and returns the mean grid-expanded test
/// accuracy together with each member's probabilities.
struct CellResult {
  double mean_accuracy = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> accuracies;
  std::vector<Matrix> probs;
  std::vector<int> labels;
};

CellResult run_cell(const ExperimentSetup& setup, const PipelineConfig& pipeline,
                    const std::vector<Example>& test_expanded);

/// One row per (w, m, hanging) cell; rows in (w, m, hanging on/off) order.
ExperimentReport sweep_window_degree(const ExperimentSetup& setup, const std::vector<int>& w_list,
                                     const std::vector<int>& m_list,
                                     const std::vector<bool>& hanging = {true, false});

/// One row per training rotation range (degrees, ascending); each range is
/// tested on the grid angles inside it.
ExperimentReport rotation_range_experiment(const ExperimentSetup& setup,
                                           const std::vector<double>& ranges_deg);

}  // namespace swps
