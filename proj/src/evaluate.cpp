#include "swps/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace swps {

void RotationGrid::validate() const {
  if (count < 1) throw ConfigError("grid.count must be >= 1");
  if (!std::isfinite(step)) throw ConfigError("grid.step must be finite");
}

std::vector<double> RotationGrid::angles() const {
  std::vector<double> a(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) a[static_cast<std::size_t>(k)] = k * step;
  return a;
}

std::vector<Example> rotation_grid_expand(const std::vector<Example>& examples,
                                          const RotationGrid& grid) {
  grid.validate();
  const auto angles = grid.angles();
  std::vector<Example> out;
  out.reserve(examples.size() * angles.size());
  for (const auto& ex : examples) {
    for (double a : angles) out.push_back({ex.prepared, ex.label, ex.rotation + a});
  }
  return out;
}

std::vector<Example> rotation_grid_expand_within(const std::vector<Example>& examples,
                                                 const RotationGrid& grid, double max_abs_angle) {
  grid.validate();
  std::vector<double> kept;
  for (double a : grid.angles()) {
    const double wrapped = std::remainder(a, 2.0 * kPi);
    if (std::abs(wrapped) <= max_abs_angle + 1e-9) kept.push_back(a);
  }
  std::vector<Example> out;
  out.reserve(examples.size() * kept.size());
  for (const auto& ex : examples) {
    for (double a : kept) out.push_back({ex.prepared, ex.label, ex.rotation + a});
  }
  return out;
}

Matrix predict_proba(const LruModel& model, const std::vector<Example>& examples,
                     const PipelineConfig& pipeline, int threads, int batch) {
  Matrix probs(model.config.classes, static_cast<Eigen::Index>(examples.size()));
  const auto bs = static_cast<std::size_t>(std::max(1, batch));
  for (std::size_t start = 0; start < examples.size(); start += bs) {
    const std::size_t count = std::min(bs, examples.size() - start);
    std::vector<RowMatrix> inputs(count);
    parallel_for(count, threads, [&](std::size_t k) {
      const auto& ex = examples[start + k];
      inputs[k] = featurize(ex.prepared, ex.rotation, nullptr, pipeline).windows;
    });
    const Matrix logits = forward_batch(model, inputs, {Mode::Eval, 0});
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      probs.col(static_cast<Eigen::Index>(start) + k) = softmax(logits.col(k));
    }
  }
  return probs;
}

std::vector<int> argmax_columns(const Matrix& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.cols()));
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < probs.rows(); ++r) {
      if (probs(r, c) > probs(best, c)) best = r;
    }
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

double accuracy_of(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("size mismatch");
  if (labels.empty()) throw std::invalid_argument("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy(const LruModel& model, const std::vector<Example>& examples,
                const PipelineConfig& pipeline, int threads) {
  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const auto& ex : examples) {
    if (ex.label < 0 || ex.label >= model.config.classes) {
      throw std::invalid_argument("example label outside the model's class range");
    }
    labels.push_back(ex.label);
  }
  return accuracy_of(argmax_columns(predict_proba(model, examples, pipeline, threads)), labels);
}

int soft_vote(const std::vector<Vector>& probs) {
  if (probs.empty()) throw std::invalid_argument("soft_vote needs at least one member");
  Vector mean = Vector::Zero(probs.front().size());
  for (const auto& p : probs) {
    if (p.size() != mean.size()) throw std::invalid_argument("members disagree on class count");
    mean += p;
  }
  mean /= static_cast<double>(probs.size());
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < mean.size(); ++i) {
    if (mean(i) > mean(best)) best = i;
  }
  return static_cast<int>(best);
}

int hard_vote(std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("hard_vote needs at least one member");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  int best = counts.begin()->first;
  int best_count = counts.begin()->second;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

std::vector<int> ensemble_predict(const std::vector<Matrix>& member_probs, VoteMode mode) {
  if (member_probs.empty()) throw std::invalid_argument("ensemble needs at least one member");
  const Eigen::Index n = member_probs.front().cols();
  for (const auto& m : member_probs) {
    if (m.cols() != n || m.rows() != member_probs.front().rows()) {
      throw std::invalid_argument("ensemble members disagree on shape");
    }
  }
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mode == VoteMode::Soft) {
      std::vector<Vector> col;
      for (const auto& m : member_probs) col.push_back(m.col(i));
      out[static_cast<std::size_t>(i)] = soft_vote(col);
    } else {
      std::vector<int> votes;
      for (const auto& m : member_probs) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < m.rows(); ++r) {
          if (m(r, i) > m(best, i)) best = r;
        }
        votes.push_back(static_cast<int>(best));
      }
      out[static_cast<std::size_t>(i)] = hard_vote(votes);
    }
  }
  return out;
}

Eigen::MatrixXi confusion_counts(std::span<const int> labels, std::span<const int> predicted,
                                 int classes) {
  if (labels.size() != predicted.size()) throw std::invalid_argument("size mismatch");
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < labels.size(); ++i) ++c(labels[i], predicted[i]);
  return c;
}

std::string confusion_csv(const Eigen::MatrixXi& counts, const std::vector<std::string>& tags) {
  std::ostringstream out;
  out << "true\\predicted";
  for (Eigen::Index j = 0; j < counts.cols(); ++j) {
    out << ',' << (static_cast<std::size_t>(j) < tags.size() ? tags[static_cast<std::size_t>(j)] : std::to_string(j));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < counts.rows(); ++i) {
    out << (static_cast<std::size_t>(i) < tags.size() ? tags[static_cast<std::size_t>(i)] : std::to_string(i));
    for (Eigen::Index j = 0; j < counts.cols(); ++j) out << ',' << counts(i, j);
    out << '\n';
  }
  return out.str();
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "config_key,accuracy,n_samples,seeds\n";
  for (const auto& r : rows) {
    out << r.config_key << ',' << r.accuracy << ',' << r.n_samples << ',';
    for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? ";" : "") << r.seeds[i];
    out << '\n';
  }
  return out.str();
}

CellResult run_cell(const ExperimentSetup& setup, const PipelineConfig& pipeline,
                    const std::vector<Example>& test_expanded) {
  if (setup.seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  ModelConfig mc = setup.model;
  mc.input_dim = pipeline.feature_dim();
  mc.classes = setup.classes;
  CellResult cell;
  cell.n_samples = test_expanded.size();
  for (const auto& ex : test_expanded) cell.labels.push_back(ex.label);
  for (auto seed : setup.seeds) {
    TrainConfig tc = setup.train_cfg;
    tc.seed = seed;
    tc.val_every = 0;
    tc.threads = setup.threads;
    auto result = train_loop(LruModel::init(mc, seed), setup.train, nullptr, tc, pipeline);
    Matrix probs = predict_proba(result.model, test_expanded, pipeline, setup.threads);
    cell.accuracies.push_back(accuracy_of(argmax_columns(probs), cell.labels));
    cell.probs.push_back(std::move(probs));
  }
  cell.mean_accuracy = std::accumulate(cell.accuracies.begin(), cell.accuracies.end(), 0.0) /
                       static_cast<double>(cell.accuracies.size());
  return cell;
}

namespace {

// Key order with embedded numbers compared by value: w=3 < w=11.
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && (std::isdigit(static_cast<unsigned char>(a[ie])) || a[ie] == '.')) ++ie;
      while (je < b.size() && (std::isdigit(static_cast<unsigned char>(b[je])) || b[je] == '.')) ++je;
      const double x = std::stod(a.substr(i, ie - i)), y = std::stod(b.substr(j, je - j));
      if (x != y) return x < y;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

void sort_rows(ExperimentReport& report) {
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& x, const ReportRow& y) { return natural_less(x.config_key, y.config_key); });
}

}  // namespace

ExperimentReport sweep_window_degree(const ExperimentSetup& setup, const std::vector<int>& w_list,
                                     const std::vector<int>& m_list,
                                     const std::vector<bool>& hanging) {
  ExperimentReport report;
  const auto test = rotation_grid_expand(setup.test, setup.grid);
  for (int w : w_list) {
    for (int m : m_list) {
      for (bool h : hanging) {
        std::ostringstream key;
        key << "w=" << w << "/m=" << m << "/hanging=" << (h ? "on" : "off");
        try {
          PipelineConfig p = setup.pipeline;
          p.window.w = w;
          p.window.m = m;
          p.geometry.hanging = h;
          p.validate();
          const CellResult cell = run_cell(setup, p, test);
          report.rows.push_back({key.str(), cell.mean_accuracy, cell.n_samples, setup.seeds});
        } catch (const std::exception& e) {
          report.errors.push_back(key.str() + ": " + e.what());
        }
      }
    }
  }
  sort_rows(report);
  return report;
}

ExperimentReport rotation_range_experiment(const ExperimentSetup& setup,
                                           const std::vector<double>& ranges_deg) {
  if (!std::is_sorted(ranges_deg.begin(), ranges_deg.end())) {
    throw std::invalid_argument("rotation ranges must be sorted ascending");
  }
  ExperimentReport report;
  for (double r : ranges_deg) {
    std::ostringstream key;
    key << "range=" << r << "deg";
    try {
      PipelineConfig p = setup.pipeline;
      p.geometry.rotation_range = r * kPi / 180.0;
      p.validate();
      const auto test = rotation_grid_expand_within(setup.test, setup.grid, p.geometry.rotation_range);
      const CellResult cell = run_cell(setup, p, test);
      report.rows.push_back({key.str(), cell.mean_accuracy, cell.n_samples, setup.seeds});
    } catch (const std::exception& e) {
      report.errors.push_back(key.str() + ": " + e.what());
    }
  }
  sort_rows(report);
  return report;
}

}  // namespace swps
