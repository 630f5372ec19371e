#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "json.hpp"

#include "swps/cli.hpp"
#include "swps/config.hpp"
#include "swps/evaluate.hpp"
#include "swps/io.hpp"
#include "swps/signature.hpp"
#include "swps/train.hpp"

namespace py = pybind11;
using namespace swps;

namespace {

using Strokes = std::vector<RowMatrix>;

Trajectory to_trajectory(const Strokes& strokes) {
  Trajectory t;
  for (const auto& m : strokes) {
    if (m.cols() != 2) throw std::invalid_argument("each stroke must be an N x 2 array");
    Stroke s;
    for (Eigen::Index i = 0; i < m.rows(); ++i) s.push_back({m(i, 0), m(i, 1)});
    t.strokes.push_back(std::move(s));
  }
  return t;
}

Strokes to_strokes(const Trajectory& t) {
  Strokes out;
  for (const auto& s : t.strokes) {
    RowMatrix m(static_cast<Eigen::Index>(s.size()), 2);
    for (std::size_t i = 0; i < s.size(); ++i) m.row(static_cast<Eigen::Index>(i)) << s[i].x, s[i].y;
    out.push_back(std::move(m));
  }
  return out;
}

RunConfig config_of(const std::string& json_text, const std::vector<std::string>& overrides) {
  return parse_run_config(json_text, overrides);
}

struct Model {
  LruModel model;
  std::vector<std::string> tags;
};

}  // namespace

PYBIND11_MODULE(swps_lru, m) {
  m.doc() = "Sliding-window path signatures with a linear recurrent classifier";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("sig_dim", &sig_dim, py::arg("d"), py::arg("m"));
  m.def(
      "path_signature",
      [](const RowMatrix& points, int depth) {
        const auto s = path_signature(points, depth);
        return Vector(Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size())));
      },
      py::arg("points"), py::arg("m") = 2);
  m.def(
      "sliding_window_signature",
      [](const RowMatrix& seq, int w, int t, int depth) {
        WindowSpec spec{w, t, depth};
        spec.validate();
        return sliding_window_signature(seq, spec);
      },
      py::arg("seq"), py::arg("w") = 5, py::arg("t") = 1, py::arg("m") = 2);
  m.def(
      "lr_at", [](long step, const std::string& config) { return lr_at(step, config_of(config, {}).train); },
      py::arg("step"), py::arg("config") = "");
  m.def(
      "canonical_config",
      [](const std::string& config, const std::vector<std::string>& overrides) {
        return run_config_json(config_of(config, overrides));
      },
      py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{});

  py::class_<Dataset>(m, "Dataset")
      .def_static("from_text", py::overload_cast<const std::string&>(&parse_text_dataset), py::arg("text"))
      .def_static(
          "from_samples",
          [](const std::vector<std::pair<std::string, Strokes>>& items) {
            std::vector<RawSample> samples;
            for (const auto& [label, strokes] : items) samples.push_back({label, to_trajectory(strokes)});
            return Dataset::from_samples(std::move(samples));
          },
          py::arg("samples"))
      .def("to_text", &serialize_text_dataset)
      .def("__len__", &Dataset::size)
      .def_property_readonly("labels", [](const Dataset& d) { return d.labels.tags(); })
      .def("label_of", &Dataset::label_of, py::arg("index"))
      .def(
          "sample",
          [](const Dataset& d, std::size_t i) {
            const auto& s = d.samples.at(i);
            return std::make_pair(s.label, to_strokes(s.trajectory));
          },
          py::arg("index"))
      .def(
          "split",
          [](const Dataset& d, double fraction, std::uint64_t seed) { return split(d, {fraction, seed}); },
          py::arg("train_fraction") = 0.8, py::arg("seed") = 1);

  m.def("synth_generate", &synth_generate, py::arg("n_classes"), py::arg("per_class"),
        py::arg("noise") = 0.02, py::arg("seed") = 1);

  m.def(
      "prepare",
      [](const Strokes& strokes, const std::string& config) {
        return to_strokes(prepare_trajectory(to_trajectory(strokes), config_of(config, {}).pipeline.preprocess));
      },
      py::arg("strokes"), py::arg("config") = "");
  m.def(
      "featurize",
      [](const Strokes& strokes, double rotation, const std::string& config,
         const std::vector<std::string>& overrides) {
        const auto c = config_of(config, overrides);
        const auto prepared = prepare_trajectory(to_trajectory(strokes), c.pipeline.preprocess);
        auto f = featurize(prepared, rotation, nullptr, c.pipeline);
        return py::make_tuple(std::move(f.windows), f.degenerate);
      },
      py::arg("strokes"), py::arg("rotation") = 0.0, py::arg("config") = "",
      py::arg("overrides") = std::vector<std::string>{});

  py::class_<Model>(m, "Model")
      .def_static(
          "load",
          [](const std::string& path) {
            auto ck = load_checkpoint(path);
            std::vector<std::string> tags;
            if (!ck.run_config.empty()) {
              const auto j = nlohmann::json::parse(ck.run_config);
              if (j.contains("labels")) tags = j["labels"].get<std::vector<std::string>>();
            }
            return Model{std::move(ck.model), std::move(tags)};
          },
          py::arg("path"))
      .def("save", [](const Model& self, const std::string& path) { save_checkpoint(path, {self.model, ""}); },
           py::arg("path"))
      .def_property_readonly("labels", [](const Model& self) { return self.tags; })
      .def_property_readonly("param_count", [](const Model& self) { return param_count(self.model.params); })
      .def(
          "predict_proba",
          [](const Model& self, const Dataset& data, const std::string& config,
             const std::vector<std::string>& overrides) {
            const auto c = config_of(config, overrides);
            const auto ex = prepare_examples(data, c.pipeline.preprocess);
            return predict_proba(self.model, ex, c.pipeline, c.threads);
          },
          py::arg("data"), py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{})
      .def(
          "accuracy",
          [](const Model& self, const Dataset& data, const std::string& config,
             const std::vector<std::string>& overrides) {
            const auto c = config_of(config, overrides);
            const auto ex = rotation_grid_expand(prepare_examples(data, c.pipeline.preprocess), c.eval.grid);
            return accuracy(self.model, ex, c.pipeline, c.threads);
          },
          py::arg("data"), py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "train",
      [](const Dataset& data, const std::string& config, const std::vector<std::string>& overrides) {
        const auto c = config_of(config, overrides);
        auto mc = c.model;
        mc.input_dim = c.pipeline.feature_dim();
        mc.classes = static_cast<int>(data.labels.size());
        const auto ex = prepare_examples(data, c.pipeline.preprocess);
        std::optional<TrainResult> r;
        {
          py::gil_scoped_release release;
          r.emplace(train_loop(LruModel::init(mc, c.seed), ex, nullptr, c.train, c.pipeline));
        }
        return py::make_tuple(Model{std::move(r->model), data.labels.tags()}, r->history.to_csv());
      },
      py::arg("data"), py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{});

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
