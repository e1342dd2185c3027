// Copyright 2026 The otprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings for the graph, thresholding, surgery, training and
// pipeline entry points. Structured results cross the boundary as JSON.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "otprune/complexity.hpp"
#include "otprune/dataset.hpp"
#include "otprune/errors.hpp"
#include "otprune/pipeline.hpp"
#include "otprune/presets.hpp"
#include "otprune/serialization.hpp"
#include "otprune/surgery.hpp"
#include "otprune/thresholding.hpp"
#include "otprune/trainer.hpp"

namespace py = pybind11;
using namespace otprune;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

GammaSet gamma_set(const std::vector<double>& values) {
  return GammaSet::from_scales(std::span<const double>(values), "python");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Batch-norm scaling-factor channel pruning";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<GraphError>(m, "GraphError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<SerializationError>(m, "SerializationError", base.ptr());
  py::register_exception<DegenerateDistribution>(m, "DegenerateDistribution", base.ptr());
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", base.ptr());
  py::register_exception<PlanMismatch>(m, "PlanMismatch", base.ptr());
  py::register_exception<DatasetError>(m, "DatasetError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<NetworkGraph>(m, "Graph")
      .def_property_readonly("name", &NetworkGraph::name)
      .def("batchnorm_names", &NetworkGraph::batchnorm_names)
      .def("gammas",
           [](const NetworkGraph& g, const std::string& bn) {
             return g.at(bn).as<BatchNormParams>().gamma;
           })
      .def("set_gammas",
           [](NetworkGraph& g, const std::string& bn, const std::vector<float>& v) {
             auto& p = g.at(bn).as<BatchNormParams>();
             if (v.size() != p.gamma.size()) throw ConfigError("gamma length mismatch for " + bn);
             p.gamma = v;
           })
      .def("validate",
           [](const NetworkGraph& g) {
             std::vector<std::string> out;
             for (const auto& v : validate(g)) out.push_back(v.message);
             return out;
           })
      .def("complexity",
           [](const NetworkGraph& g) {
             const auto c = count_complexity(g);
             return py::make_tuple(c.flops, c.params);
           })
      .def("save", [](const NetworkGraph& g, const std::filesystem::path& p) { save_graph(g, p); })
      .def("structure", [](const NetworkGraph& g) { return to_py(graph_structure_to_json(g)); })
      .def(py::self == py::self);

  m.def("load_graph", [](const std::filesystem::path& p) { return load_graph(p); });
  m.def("preset_names", &preset_names);
  m.def(
      "build_preset",
      [](const std::string& name, int num_classes, std::uint64_t seed) {
        PresetOptions o;
        o.num_classes = num_classes;
        o.seed = seed;
        return build_preset(name, o);
      },
      py::arg("name"), py::arg("num_classes") = 10, py::arg("seed") = 0);

  m.def(
      "find_threshold",
      [](const std::vector<double>& values, double delta, double p) {
        return find_threshold(gamma_set(values), ThresholdConfig{delta, p});
      },
      py::arg("values"), py::arg("delta") = 1e-3, py::arg("p") = 2.0);
  m.def(
      "ns_threshold",
      [](const std::vector<double>& values, double percent) {
        return ns_threshold(gamma_set(values), percent);
      },
      py::arg("values"), py::arg("percent"));
  m.def(
      "separation_stats",
      [](const std::vector<double>& values, double threshold, double p) {
        const auto s = separation_stats(gamma_set(values), threshold, p);
        py::dict d;
        d["alpha"] = s.alpha;
        d["beta"] = s.beta;
        d["ratio_n_i"] = s.ratio_n_i;
        d["lower_bound"] = s.lower_bound;
        d["upper_bound"] = s.upper_bound;
        d["negligible"] = s.negligible;
        d["important"] = s.important;
        d["one_sided"] = s.one_sided;
        return d;
      },
      py::arg("values"), py::arg("threshold"), py::arg("p") = 2.0);

  m.def(
      "plan_prune",
      [](const NetworkGraph& g, const std::string& method, double delta, double ns_percent,
         double shift_log10) {
        PlanOptions o;
        o.method = prune_method_from_string(method);
        o.threshold.delta = delta;
        o.ns_percent = ns_percent;
        o.shift_log10 = shift_log10;
        return to_py(plan_prune(g, o).to_json());
      },
      py::arg("graph"), py::arg("method") = "OT", py::arg("delta") = 1e-3,
      py::arg("ns_percent") = 0.5, py::arg("shift_log10") = 0.0);
  m.def(
      "apply_prune",
      [](const NetworkGraph& g, const py::object& plan) {
        return apply_prune(g, PrunePlan::from_json(from_py(plan))).graph;
      },
      py::arg("graph"), py::arg("plan"));

  m.def(
      "sparse_train",
      [](const NetworkGraph& g, double lambda, int epochs, std::uint64_t seed, int samples_per_class) {
        const auto data = make_synthetic(4, samples_per_class, 8, seed);
        auto c = TrainConfig::toy_sparse(lambda);
        c.epochs = epochs;
        c.seed = seed;
        TrainResult r;
        double acc = 0.0;
        {
          py::gil_scoped_release release;
          r = train(g, data, c);
          acc = accuracy(r.graph, data.test);
        }
        return py::make_tuple(r.graph, acc);
      },
      py::arg("graph"), py::arg("lambda_"), py::arg("epochs"), py::arg("seed") = 0,
      py::arg("samples_per_class") = 100,
      "Trains on the synthetic 4-class data (8x8); returns (graph, test accuracy).");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& out, const std::string& method, double lambda, int iterations,
         const std::string& post, std::uint64_t seed, int samples_per_class, int epochs,
         int recover_epochs) {
        PipelineConfig c;
        c.out = out;
        c.method = prune_method_from_string(method);
        c.lambdas = {lambda};
        c.iterations = iterations;
        c.post = post_mode_from_string(post);
        c.seed = seed;
        c.data.samples_per_class = samples_per_class;
        c.sparse.epochs = epochs;
        c.recover.epochs = recover_epochs;
        std::vector<PruneReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_pipeline(c);
        }
        py::list rows;
        for (const auto& r : reports) rows.append(to_py(r.to_json()));
        return rows;
      },
      py::arg("out"), py::arg("method") = "OT", py::arg("lambda_") = kToyLambdaSweep.back(),
      py::arg("iterations") = 1, py::arg("post") = "fine_tune", py::arg("seed") = 0,
      py::arg("samples_per_class") = 500, py::arg("epochs") = 30, py::arg("recover_epochs") = 5);
}
