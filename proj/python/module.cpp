#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sparselab/checkpoint.hpp"
#include "sparselab/continual.hpp"
#include "sparselab/experiments.hpp"
#include "sparselab/powerprop.hpp"
#include "sparselab/report.hpp"

namespace py = pybind11;
using namespace sparselab;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() == 1) {
    Tensor t = Tensor::zeros(static_cast<std::size_t>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), t.data());
    return t;
  }
  if (a.ndim() == 2) {
    Tensor t = Tensor::zeros(static_cast<std::size_t>(a.shape(0)),
                             static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), t.data());
    return t;
  }
  throw ShapeError("expected a 1-d or 2-d array");
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (std::size_t extent : t.shape()) shape.push_back(static_cast<py::ssize_t>(extent));
  py::array_t<double> a(shape);
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

RunConfig config_from_dict(const py::dict& d) {
  nlohmann::json j = nlohmann::json::parse(
      py::str(py::module_::import("json").attr("dumps")(d)).cast<std::string>());
  nlohmann::json merged = to_json(RunConfig{});
  merged.update(j);
  return run_config_from_json(merged);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "powerprop training, magnitude pruning and continual learning";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericalError>(m, "NumericalError");

  m.attr("__version__") = "0.1.0";
  m.def("git_describe", &git_describe);

  // core maps
  m.def("psi", [](py::array_t<double> x, double alpha) {
    return array_from_tensor(powerprop::psi(tensor_from_array(x), alpha));
  }, py::arg("x"), py::arg("alpha"));
  m.def("psi_inverse", [](py::array_t<double> theta, double alpha) {
    return array_from_tensor(powerprop::psi_inverse(tensor_from_array(theta), alpha));
  }, py::arg("theta"), py::arg("alpha"));
  m.def("grad_scale", [](py::array_t<double> upstream, py::array_t<double> phi, double alpha) {
    return array_from_tensor(
        powerprop::grad_scale(tensor_from_array(upstream), tensor_from_array(phi), alpha));
  }, py::arg("upstream"), py::arg("phi"), py::arg("alpha"));

  m.def("matmul", [](py::array_t<double> a, py::array_t<double> b) {
    return array_from_tensor(matmul(tensor_from_array(a), tensor_from_array(b)));
  });
  m.def("topk_indices_by_magnitude", [](py::array_t<double> t, std::size_t k) {
    return topk_indices_by_magnitude(tensor_from_array(t), k);
  }, py::arg("t"), py::arg("k"));
  m.def("sample_gaussian", [](std::uint64_t seed, std::size_t rows, std::size_t cols,
                              double mean, double std) {
    Rng rng(seed);
    return array_from_tensor(sample_gaussian(rng, rows, cols, mean, std));
  }, py::arg("seed"), py::arg("rows"), py::arg("cols"), py::arg("mean") = 0.0,
     py::arg("std") = 1.0);

  m.def("magnitude_mask_bits",
        [](const std::vector<py::array_t<double>>& weights, double keep, const std::string& scope,
           double output_layer_factor) {
          std::vector<Tensor> ws;
          for (const auto& w : weights) ws.push_back(tensor_from_array(w));
          const MaskSet masks =
              magnitude_mask(ws, keep, scope_from_string(scope), output_layer_factor);
          std::vector<py::array_t<double>> out;
          for (const Mask& mask : masks) out.push_back(array_from_tensor(mask.bits));
          return out;
        },
        py::arg("weights"), py::arg("keep_fraction"), py::arg("scope") = "layerwise",
        py::arg("output_layer_factor") = 1.0);

  // experiment drivers (dict mirrors the JSON config files)
  m.def("gen_data", [](const py::dict& cfg) { cmd_gen_data(config_from_dict(cfg)); });
  m.def("train", [](const py::dict& cfg) {
    const TrainOutputs out = cmd_train(config_from_dict(cfg));
    py::dict d;
    d["checkpoint"] = out.checkpoint.string();
    d["init_checkpoint"] = out.init_checkpoint.string();
    d["metrics_csv"] = out.metrics_csv.string();
    d["final_test_accuracy"] = out.final_test_accuracy;
    return d;
  });
  m.def("prune_sweep", [](const py::dict& cfg, const std::string& checkpoint) {
    const SweepOutputs out = cmd_prune_sweep(config_from_dict(cfg), checkpoint);
    py::list reports;
    for (const SparsityReport& r : out.reports) {
      py::dict item;
      item["keep_fraction"] = r.keep_fraction;
      item["accuracy"] = r.accuracy;
      item["layer_density"] = r.layer_density;
      reports.append(item);
    }
    py::dict d;
    d["reports"] = reports;
    d["overlaps"] = out.overlaps;
    d["sweep_csv"] = out.sweep_csv.string();
    return d;
  });
  m.def("continual", [](const py::dict& cfg) {
    const ContinualOutputs out = cmd_continual(config_from_dict(cfg));
    py::dict d;
    d["accuracy_matrix"] = out.accuracy_matrix;
    d["average_accuracy"] = out.average_accuracy;
    d["protected_fraction"] = out.protected_fraction;
    d["chosen_keep"] = out.chosen_keep;
    d["state_dir"] = out.state_dir.string();
    return d;
  });
  m.def("infer_task", [](const py::dict& cfg, const std::string& state_dir) {
    const InferOutputs out = cmd_infer_task(config_from_dict(cfg), state_dir);
    py::dict d;
    d["task_id_accuracy"] = out.task_id_accuracy;
    d["class_accuracy"] = out.class_accuracy;
    d["max_rounds"] = out.max_rounds;
    d["examples"] = out.examples;
    return d;
  });
  m.def("appendix_a", [](const py::dict& cfg) {
    const AppendixAOutputs out = cmd_appendix_a(config_from_dict(cfg));
    py::dict d;
    d["modes"] = out.modes;
    d["dense_accuracy"] = out.dense_accuracy;
    py::list sweeps;
    for (const auto& sweep : out.sweeps) {
      py::list rows;
      for (const SparsityReport& r : sweep) {
        rows.append(py::make_tuple(r.keep_fraction, r.accuracy));
      }
      sweeps.append(rows);
    }
    d["sweeps"] = sweeps;
    return d;
  });
  m.def("preset", [](const std::string& name) {
    return py::module_::import("json").attr("loads")(to_json(preset(name)).dump());
  });
  m.def("preset_names", &preset_names);
  m.def("default_keep_schedule", &default_keep_schedule);
}
