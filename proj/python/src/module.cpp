#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dflbench/benchcli.hpp"
#include "dflbench/qptl.hpp"

namespace py = pybind11;
using namespace dflbench;

namespace {

py::dict solution_dict(const Solution& s) {
  py::dict d;
  d["x"] = s.x;
  d["objective"] = s.objective;
  d["status"] = to_string(s.status);
  return d;
}

std::unique_ptr<Oracle> make_oracle(const std::string& kind, const py::dict& args) {
  if (kind == "shortest_path") return make_shortest_path_oracle({args["grid_side"].cast<int>()});
  if (kind == "knapsack")
    return make_knapsack_oracle({args["weights"].cast<std::vector<int>>(), args["capacity"].cast<int>()});
  if (kind == "topk") return make_topk_oracle({args["n"].cast<int>(), args["k"].cast<int>()});
  throw py::value_error("oracle kind must be shortest_path, knapsack or topk");
}

// Config and summary documents cross the boundary through the json module.
py::object from_json(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
Json to_json(const py::object& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Decision-focused learning benchmark";

  py::register_exception<Error>(m, "DflbenchError", PyExc_RuntimeError);

  m.def("solve_shortest_path", [](int grid_side, const Vector& c) {
    return solution_dict(solve_grid_shortest_path({grid_side}, c));
  }, py::arg("grid_side"), py::arg("c"));
  m.def("solve_knapsack", [](const std::vector<int>& weights, int capacity, const Vector& c) {
    return solution_dict(solve_knapsack({weights, capacity}, c));
  }, py::arg("weights"), py::arg("capacity"), py::arg("c"));
  m.def("solve_topk", [](int n, int k, const Vector& c) { return solution_dict(solve_topk({n, k}, c)); },
        py::arg("n"), py::arg("k"), py::arg("c"));

  m.def("qptl", [](const std::string& kind, const py::dict& args, double mu, const Vector& c_hat,
                   const Vector& upstream) {
    const auto oracle = make_oracle(kind, args);
    const QptlLayer layer(*oracle, mu);
    const QptlForward fwd = layer.forward(c_hat);
    return py::make_tuple(fwd.v, layer.backward(fwd, upstream));
  }, py::arg("kind"), py::arg("args"), py::arg("mu"), py::arg("c_hat"), py::arg("upstream"),
        "Smoothed solution and dL/dc_hat for the upstream dL/dv.");

  m.def("preset_names", &preset_names);
  m.def("preset_config", [](const std::string& name) { return from_json(preset_config(name)); });
  m.def("resolve_config", [](const py::object& doc) {
    return from_json(parse_config_json(to_json(doc)).resolved);
  });
  m.def("run_experiment", [](const py::object& doc, int parallel) {
    const ExperimentConfig cfg = parse_config_json(to_json(doc));
    RunOptions ro;
    ro.parallel = parallel;
    ExperimentResult res;
    {
      py::gil_scoped_release release;
      res = run_experiment(cfg, ro);
    }
    py::dict out;
    out["csv"] = to_csv(res.rows);
    out["summary"] = from_json(res.summary);
    return out;
  }, py::arg("config"), py::arg("parallel") = 1);
}
