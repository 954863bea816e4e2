#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rbdpipe/model_io.hpp"
#include "rbdpipe/pipesim.hpp"
#include "rbdpipe/state_io.hpp"

namespace py = pybind11;
using namespace rbdpipe;

namespace {

RobotState make_state(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& qdd_or_tau) {
  RobotState s = RobotState::zero(model);
  if (q.size() != model.n_dof()) throw std::invalid_argument("q has the wrong length");
  s.q = q;
  if (qd.size() > 0) s.qd = qd;
  if (qdd_or_tau.size() > 0) s.qdd_or_tau = qdd_or_tau;
  return s;
}

py::dict simulate_summary(const RobotModel& model_in, const std::string& function, int batch,
                          const std::string& config_path, const std::string& deps) {
  RobotModel model = model_in;
  if (model.root_mode == RootMode::FloatingSplit && !model.joints.empty() &&
      model.joints[0].kind == JointKind::Floating) {
    model = split_root(model);
  }
  pipesim::PipelineConfig cfg;
  if (!config_path.empty()) cfg = pipesim::load_pipeline_config(config_path);
  const auto fn = function_from_name(function);
  if (!fn) throw std::invalid_argument("unknown function '" + function + "'");
  const BranchLayout layout = branch_decompose(model, cfg.multiplex);
  const pipesim::PipelineGraph graph = pipesim::build_pipeline(model, layout, *fn, cfg);
  const pipesim::TaskSet tasks = deps == "rk4" ? pipesim::TaskSet::chains(batch / 4, 4, *fn)
                                               : pipesim::TaskSet::independent(batch, *fn);
  const pipesim::TraceReport tr = pipesim::simulate(graph, tasks);
  py::dict out;
  out["function"] = function;
  out["stages"] = graph.stages.size();
  out["tasks"] = tr.tasks.size();
  out["makespan"] = tr.makespan;
  out["first_latency"] = tr.first_latency;
  out["steady_ii"] = tr.steady_ii;
  out["ii_bound"] = pipesim::bottleneck_interval(graph);
  out["text"] = pipesim::report_text(tr, graph);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "rigid body dynamics (inverse/forward dynamics, mass matrix and inverse, analytic "
            "derivatives) with a cycle-approximate pipeline simulator";

  py::class_<RobotModel>(m, "RobotModel")
      .def_property_readonly("name", [](const RobotModel& r) { return r.name; })
      .def_property_readonly("n_dof", &RobotModel::n_dof)
      .def_property_readonly("n_bodies", &RobotModel::n_bodies)
      .def_property_readonly("link_names", [](const RobotModel& r) { return r.link_names; })
      .def_property_readonly("root_mode",
                             [](const RobotModel& r) { return root_mode_name(r.root_mode); })
      .def_property_readonly("total_mass", &RobotModel::total_mass)
      .def("__repr__", [](const RobotModel& r) {
        return "<RobotModel '" + r.name + "' links=" + std::to_string(r.n_bodies()) +
               " dof=" + std::to_string(r.n_dof()) + ">";
      });

  m.def("load_model", &load_model, py::arg("path"));
  m.def("parse_model", &parse_model, py::arg("text"));
  m.def("split_root", &split_root, py::arg("model"));
  m.def(
      "reroot",
      [](const RobotModel& model, int new_root_link) {
        const RerootResult r = reroot(model, new_root_link);
        return py::make_tuple(r.model, r.old_depth, r.new_depth);
      },
      py::arg("model"), py::arg("new_root_link"),
      "Re-root the tree at a link; returns (model, old_depth, new_depth).");
  m.def(
      "sparsity_pattern",
      [](const RobotModel& model) {
        return sparsity_pattern(model).cast<int>().eval();
      },
      py::arg("model"));

  m.def(
      "rnea",
      [](const RobotModel& model, const VecX& q, const VecX& qd, const VecX& qdd) {
        RobotState s = make_state(model, q, qd, qdd);
        DynamicsWorkspace ws;
        return rnea(model, s, ws);
      },
      py::arg("model"), py::arg("q"), py::arg("qd"), py::arg("qdd"),
      "Inverse dynamics: joint forces for the given accelerations.");

  m.def(
      "fd",
      [](const RobotModel& model, const VecX& q, const VecX& qd, const VecX& tau) {
        RobotState s = make_state(model, q, qd, tau);
        DynamicsWorkspace ws;
        return fd(model, s, ws);
      },
      py::arg("model"), py::arg("q"), py::arg("qd"), py::arg("tau"),
      "Forward dynamics: accelerations for the given joint forces.");

  m.def(
      "mass_matrix",
      [](const RobotModel& model, const VecX& q) {
        RobotState s = make_state(model, q, VecX(), VecX());
        DynamicsWorkspace ws;
        return *mminv_gen(model, s, true, false, ws).M;
      },
      py::arg("model"), py::arg("q"));

  m.def(
      "minv",
      [](const RobotModel& model, const VecX& q) {
        RobotState s = make_state(model, q, VecX(), VecX());
        DynamicsWorkspace ws;
        return *mminv_gen(model, s, false, true, ws).Minv;
      },
      py::arg("model"), py::arg("q"), "Inverse of the mass matrix.");

  m.def(
      "drnea",
      [](const RobotModel& model, const VecX& q, const VecX& qd, const VecX& qdd) {
        RobotState s = make_state(model, q, qd, qdd);
        DynamicsWorkspace ws;
        rnea(model, s, ws);
        const DerivativeBlocks b = drnea(model, s, ws);
        return py::make_tuple(b.d_dq, b.d_dqd);
      },
      py::arg("model"), py::arg("q"), py::arg("qd"), py::arg("qdd"),
      "Partials of inverse dynamics: (dtau_dq, dtau_dqd).");

  m.def(
      "dfd",
      [](const RobotModel& model, const VecX& q, const VecX& qd, const VecX& tau) {
        RobotState s = make_state(model, q, qd, tau);
        DynamicsWorkspace ws;
        const DerivativeBlocks b = dfd(model, s, ws);
        return py::make_tuple(b.d_dq, b.d_dqd);
      },
      py::arg("model"), py::arg("q"), py::arg("qd"), py::arg("tau"),
      "Partials of forward dynamics: (dqdd_dq, dqdd_dqd).");

  m.def(
      "difd",
      [](const RobotModel& model, const VecX& q, const VecX& qd, const VecX& qdd,
         const MatX& minv) {
        RobotState s = make_state(model, q, qd, qdd);
        DynamicsWorkspace ws;
        const DerivativeBlocks b = difd(model, s, minv, ws);
        return py::make_tuple(b.d_dq, b.d_dqd);
      },
      py::arg("model"), py::arg("q"), py::arg("qd"), py::arg("qdd"), py::arg("minv"),
      "Forward-dynamics partials from caller-supplied qdd and Minv.");

  m.def(
      "batch_rnea",
      [](const RobotModel& model, const MatX& q, const MatX& qd, const MatX& qdd) {
        if (q.cols() != model.n_dof()) throw std::invalid_argument("q must be batch x n_dof");
        std::vector<RobotState> states;
        for (int t = 0; t < q.rows(); ++t) {
          states.push_back(make_state(model, q.row(t), qd.row(t), qdd.row(t)));
        }
        FunctionCall call;
        call.fn = FunctionId::ID;
        const auto results = batch_evaluate(model, call, states);
        MatX tau(q.rows(), model.n_dof());
        for (int t = 0; t < q.rows(); ++t) {
          if (!results[t].error.empty()) throw std::runtime_error(results[t].error);
          tau.row(t) = results[t].tau;
        }
        return tau;
      },
      py::arg("model"), py::arg("q"), py::arg("qd"), py::arg("qdd"),
      "Batched inverse dynamics over rows of q/qd/qdd.");

  m.def("simulate", &simulate_summary, py::arg("model"), py::arg("function"),
        py::arg("batch") = 256, py::arg("config") = std::string(),
        py::arg("deps") = std::string("none"),
        "Cycle-approximate pipeline simulation; returns a summary dict.");

  m.attr("__version__") = "0.1.0";
}
