// Python bindings for the rbf library.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rbf/duality.hpp"
#include "rbf/formulations.hpp"
#include "rbf/harness.hpp"
#include "rbf/io.hpp"
#include "rbf/oracle.hpp"

namespace py = pybind11;

namespace {

std::vector<rbf::CMatrix> to_dense(const std::vector<rbf::HermMatrix>& w) {
  std::vector<rbf::CMatrix> out;
  for (const auto& m : w) out.push_back(m.mat());
  return out;
}

std::vector<rbf::HermMatrix> to_herm(const std::vector<rbf::CMatrix>& w) {
  std::vector<rbf::HermMatrix> out;
  for (const auto& m : w) out.push_back(rbf::HermMatrix::checked(m));
  return out;
}

py::dict solve_robust(const rbf::ProblemInstance& inst, const rbf::sdp::SolverOptions& opts) {
  inst.validate();
  const auto prog = rbf::build_wsp_sdr(inst);
  const auto sol = rbf::sdp::solve(prog.program, opts);
  py::dict out;
  out["status"] = rbf::sdp::to_string(sol.status);
  out["iterations"] = sol.iterations;
  if (sol.status == rbf::sdp::Status::Optimal) {
    out["design"] = rbf::decode_design(prog, sol);
  } else {
    out["design"] = py::none();
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(rbf, m) {
  m.doc() = "Robust downlink beamforming: SDR solve, duality certification, sweeps";

  py::class_<rbf::ProblemInstance>(m, "ProblemInstance")
      .def(py::init<>())
      .def_readwrite("nt", &rbf::ProblemInstance::nt)
      .def_readwrite("k", &rbf::ProblemInstance::k)
      .def_readwrite("hbar", &rbf::ProblemInstance::hbar)
      .def_readwrite("radius", &rbf::ProblemInstance::radius)
      .def_readwrite("noise", &rbf::ProblemInstance::noise)
      .def_readwrite("sinr_target", &rbf::ProblemInstance::sinr_target)
      .def("validate", &rbf::ProblemInstance::validate)
      .def("to_json", &rbf::instance_to_json)
      .def_static("from_json", &rbf::instance_from_json);

  py::register_exception<rbf::JsonError>(m, "JsonError", PyExc_ValueError);

  py::class_<rbf::sdp::SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("gap_tol", &rbf::sdp::SolverOptions::gap_tol)
      .def_readwrite("feas_tol", &rbf::sdp::SolverOptions::feas_tol)
      .def_readwrite("max_iterations", &rbf::sdp::SolverOptions::max_iterations)
      .def_readwrite("step_fraction", &rbf::sdp::SolverOptions::step_fraction)
      .def_readwrite("min_centering", &rbf::sdp::SolverOptions::min_centering)
      .def_readwrite("verbose", &rbf::sdp::SolverOptions::verbose);

  py::class_<rbf::RobustDesign>(m, "RobustDesign")
      .def(py::init<>())
      .def_property(
          "W", [](const rbf::RobustDesign& d) { return to_dense(d.W); },
          [](rbf::RobustDesign& d, const std::vector<rbf::CMatrix>& w) { d.W = to_herm(w); })
      .def_readwrite("lambda_", &rbf::RobustDesign::lambda)
      .def_readwrite("objective", &rbf::RobustDesign::objective)
      .def("to_json", &rbf::design_to_json)
      .def_static("from_json", &rbf::design_from_json);

  py::class_<rbf::BeamformerSet>(m, "BeamformerSet")
      .def(py::init(&rbf::BeamformerSet::from), py::arg("w"))
      .def_readonly("w", &rbf::BeamformerSet::w)
      .def_readonly("power", &rbf::BeamformerSet::power);

  py::class_<rbf::Extraction>(m, "Extraction")
      .def_readonly("beams", &rbf::Extraction::beams)
      .def_readonly("rank_profile", &rbf::Extraction::rank_profile)
      .def_readonly("fallback", &rbf::Extraction::fallback)
      .def_readonly("power_scale", &rbf::Extraction::power_scale);

  py::class_<rbf::TrsResult>(m, "TrsResult")
      .def_readonly("value", &rbf::TrsResult::value)
      .def_readonly("argmin", &rbf::TrsResult::argmin)
      .def_readonly("multiplier", &rbf::TrsResult::multiplier)
      .def_readonly("hard_case", &rbf::TrsResult::hard_case);

  m.def("generate_instance", &rbf::generate_instance, py::arg("nt"), py::arg("k"),
        py::arg("sigma2"), py::arg("radius"), py::arg("gamma_db"), py::arg("seed"));
  m.def("trial_seed", &rbf::trial_seed, py::arg("sweep_seed"), py::arg("trial"));
  m.def("db_to_linear", &rbf::db_to_linear);
  m.def("linear_to_db", &rbf::linear_to_db);

  m.def("solve_robust", &solve_robust, py::arg("instance"),
        py::arg("options") = rbf::sdp::SolverOptions{},
        "Solve the robust SDR. Returns {'status', 'iterations', 'design'}.");
  m.def("extract_beamformers", &rbf::extract_beamformers, py::arg("design"),
        py::arg("instance"));
  m.def(
      "trs_min",
      [](const rbf::CMatrix& q, const rbf::CVector& hbar, double r) {
        return rbf::trs_min(rbf::HermMatrix::checked(q), hbar, r);
      },
      py::arg("q"), py::arg("hbar"), py::arg("r"));
  m.def("worst_case_sinr", &rbf::worst_case_sinr, py::arg("instance"), py::arg("beams"),
        py::arg("user"));
  m.def("worst_case_margins", &rbf::worst_case_margins, py::arg("instance"),
        py::arg("beams"));

  m.def(
      "verify_duality",
      [](const rbf::ProblemInstance& inst, bool probe) {
        rbf::VerifyOptions opts;
        opts.probe = probe;
        return py::module_::import("json").attr("loads")(
            rbf::report_to_json(rbf::verify_proposition1(inst, opts)));
      },
      py::arg("instance"), py::arg("probe") = true,
      "Primal and dual solve plus certificate checks; returns the report as a dict.");

  py::class_<rbf::SweepConfig>(m, "SweepConfig")
      .def(py::init<>())
      .def_readwrite("nt", &rbf::SweepConfig::nt)
      .def_readwrite("k", &rbf::SweepConfig::k)
      .def_readwrite("sigma2", &rbf::SweepConfig::sigma2)
      .def_readwrite("radius", &rbf::SweepConfig::radius)
      .def_readwrite("gamma_db_grid", &rbf::SweepConfig::gamma_db_grid)
      .def_readwrite("trials", &rbf::SweepConfig::trials)
      .def_readwrite("seed", &rbf::SweepConfig::seed)
      .def_readwrite("workers", &rbf::SweepConfig::workers)
      .def_readwrite("probe", &rbf::SweepConfig::probe)
      .def_readwrite("solver", &rbf::SweepConfig::solver)
      .def_static("from_json", &rbf::sweep_config_from_json);

  py::class_<rbf::AggregateRow>(m, "AggregateRow")
      .def_readonly("gamma_db", &rbf::AggregateRow::gamma_db)
      .def_readonly("trials", &rbf::AggregateRow::trials)
      .def_readonly("optimal", &rbf::AggregateRow::optimal)
      .def_readonly("feasibility_rate", &rbf::AggregateRow::feasibility_rate)
      .def_readonly("mean_power", &rbf::AggregateRow::mean_power)
      .def_readonly("mean_power_db", &rbf::AggregateRow::mean_power_db);

  py::class_<rbf::SweepRecord>(m, "SweepRecord")
      .def_readonly("gamma_db", &rbf::SweepRecord::gamma_db)
      .def_readonly("trial", &rbf::SweepRecord::trial)
      .def_readonly("seed", &rbf::SweepRecord::seed)
      .def_readonly("status", &rbf::SweepRecord::status)
      .def_readonly("power", &rbf::SweepRecord::power)
      .def_readonly("rel_gap", &rbf::SweepRecord::rel_gap)
      .def_readonly("max_rank_ratio", &rbf::SweepRecord::max_rank_ratio)
      .def_readonly("min_margin", &rbf::SweepRecord::min_margin)
      .def_readonly("condition1", &rbf::SweepRecord::condition1)
      .def_readonly("passed", &rbf::SweepRecord::passed);

  m.def(
      "run_sweep",
      [](const rbf::SweepConfig& cfg) {
        rbf::SweepResult res;
        {
          py::gil_scoped_release release;
          res = rbf::run_sweep(cfg);
        }
        return py::make_tuple(res.records, res.aggregate);
      },
      py::arg("config"), "Returns (records, aggregate).");
}
