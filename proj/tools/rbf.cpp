// rbf: solve, certify and sweep robust downlink beamforming instances.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rbf/duality.hpp"
#include "rbf/formulations.hpp"
#include "rbf/harness.hpp"
#include "rbf/io.hpp"
#include "rbf/oracle.hpp"

namespace {

using json = nlohmann::ordered_json;

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

rbf::ProblemInstance load_instance(const std::string& path) {
  try {
    return rbf::instance_from_json(read_file(path));
  } catch (const rbf::JsonError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

int status_exit(rbf::sdp::Status s) {
  switch (s) {
    case rbf::sdp::Status::Optimal: return kOk;
    case rbf::sdp::Status::PrimalInfeasible: return kInfeasible;
    default: return kNumerical;
  }
}

void dump_conic(const rbf::ProblemInstance& inst, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  rbf::sdp::dump_text(rbf::build_wsp_sdr(inst).program, out);
}

json design_summary(const rbf::RobustDesign& d) {
  json j;
  j["power"] = d.objective;
  j["power_db"] = rbf::linear_to_db(d.objective);
  json ranks = json::array();
  for (const auto& w : d.W) {
    const auto e = rbf::herm_eig(w);
    const Eigen::Index n = w.dim();
    const double top = e.values(n - 1);
    ranks.push_back(n > 1 && top > 0.0 ? std::max(0.0, e.values(n - 2)) / top : 0.0);
  }
  j["rank_profile"] = ranks;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust downlink beamforming: SDR solve, duality certification, sweeps"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 usage or input error, 2 infeasible instance, "
      "3 numerical failure.\nRBF_WORKERS overrides the sweep worker cap.");

  rbf::sdp::SolverOptions solver;
  std::string dump_path;
  app.add_option("--dump-conic", dump_path,
                 "Write the robust SDR conic program (text format) to this path");
  app.add_option("--gap-tol", solver.gap_tol, "Solver relative gap tolerance")
      ->capture_default_str();
  app.add_option("--feas-tol", solver.feas_tol, "Solver feasibility tolerance")
      ->capture_default_str();
  app.add_flag("--verbose", solver.verbose, "Print solver iterations to stderr");

  std::string instance_path, design_path, design_out, config_path, out_dir, gen_out;
  bool no_probe = false;
  int workers = 0;

  auto* solve = app.add_subcommand("solve", "Solve the robust SDR; print power, rank profile and design");
  solve->add_option("instance", instance_path, "Instance JSON")->required();
  solve->add_option("--out", design_out, "Also write the design JSON here");

  auto* verify = app.add_subcommand("verify-duality", "Solve primal and dual; print the duality report JSON");
  verify->add_option("instance", instance_path, "Instance JSON")->required();
  verify->add_flag("--no-probe", no_probe, "Skip the uniqueness probe");

  auto* oracle = app.add_subcommand("oracle", "Worst-case SINR margins of a design via the trust-region oracle");
  oracle->add_option("instance", instance_path, "Instance JSON")->required();
  oracle->add_option("--design", design_path, "Design JSON")->required();

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo power-versus-SINR sweep");
  sweep->add_option("--config", config_path, "Sweep config JSON")->required();
  sweep->add_option("--out", out_dir, "Output directory for records.csv and aggregate.csv")->required();
  sweep->add_option("--workers", workers, "Worker cap (0 = config value)");

  auto* gen = app.add_subcommand("gen", "Generate a seeded instance JSON");
  int nt = 4, k = 4;
  double sigma2 = 0.1, radius = 0.1, gamma_db = 4.0;
  std::uint64_t seed = 0;
  gen->add_option("--nt", nt, "Transmit antennas")->capture_default_str();
  gen->add_option("--k", k, "Users")->capture_default_str();
  gen->add_option("--sigma2", sigma2, "Noise power")->capture_default_str();
  gen->add_option("--radius", radius, "Channel error radius")->capture_default_str();
  gen->add_option("--gamma-db", gamma_db, "SINR target in dB")->capture_default_str();
  gen->add_option("--seed", seed, "Channel seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) {
      if (nt < 1 || k < 1 || !(sigma2 > 0.0) || !(radius >= 0.0)) {
        throw UsageError("gen: nt, k, sigma2 must be positive and radius nonnegative");
      }
      const auto inst = rbf::generate_instance(nt, k, sigma2, radius, gamma_db, seed);
      const std::string text = rbf::instance_to_json(inst) + "\n";
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        write_file(gen_out, text);
      }
      return kOk;
    }

    if (*solve) {
      const auto inst = load_instance(instance_path);
      dump_conic(inst, dump_path);
      const auto prog = rbf::build_wsp_sdr(inst);
      const auto sol = rbf::sdp::solve(prog.program, solver);
      json out;
      out["status"] = rbf::sdp::to_string(sol.status);
      if (sol.status == rbf::sdp::Status::Optimal) {
        const auto design = rbf::decode_design(prog, sol);
        const json summary = design_summary(design);
        for (const auto& [key, v] : summary.items()) out[key] = v;
        const std::string dj = rbf::design_to_json(design);
        out["design"] = json::parse(dj);
        if (!design_out.empty()) write_file(design_out, dj + "\n");
      } else if (sol.status == rbf::sdp::Status::PrimalInfeasible) {
        out["certificate_violation"] = sol.certificate_violation;
      }
      std::cout << out.dump(2) << "\n";
      return status_exit(sol.status);
    }

    if (*verify) {
      const auto inst = load_instance(instance_path);
      dump_conic(inst, dump_path);
      rbf::VerifyOptions opts;
      opts.solver = solver;
      opts.probe = !no_probe;
      opts.probe_options.solver = solver;
      const auto rep = rbf::verify_proposition1(inst, opts);
      std::cout << rbf::report_to_json(rep) << "\n";
      if (rep.primal_status != rbf::sdp::Status::Optimal) return status_exit(rep.primal_status);
      return status_exit(rep.dual_status);
    }

    if (*oracle) {
      const auto inst = load_instance(instance_path);
      rbf::RobustDesign design;
      try {
        design = rbf::design_from_json(read_file(design_path));
      } catch (const rbf::JsonError& e) {
        throw UsageError(design_path + ": " + e.what());
      }
      bool match = design.W.size() == static_cast<std::size_t>(inst.k);
      for (const auto& w : design.W) match = match && w.dim() == inst.nt;
      if (!match) throw UsageError("design does not match the instance dimensions");
      json out;
      try {
        const auto ex = rbf::extract_beamformers(design, inst);
        out["rank_profile"] = ex.rank_profile;
        out["fallback"] = ex.fallback;
        out["power_scale"] = ex.power_scale;
        out["beam_power"] = ex.beams.power;
        json wcs = json::array();
        for (int i = 0; i < inst.k; ++i) wcs.push_back(rbf::worst_case_sinr(inst, ex.beams, i));
        out["worst_case_sinr"] = wcs;
        out["margins"] = rbf::worst_case_margins(inst, ex.beams);
      } catch (const std::runtime_error& e) {
        out["error"] = e.what();
        std::cout << out.dump(2) << "\n";
        return kInfeasible;
      }
      std::cout << out.dump(2) << "\n";
      return kOk;
    }

    if (*sweep) {
      rbf::SweepConfig cfg;
      try {
        cfg = rbf::sweep_config_from_json(read_file(config_path));
      } catch (const rbf::JsonError& e) {
        throw UsageError(config_path + ": " + e.what());
      }
      cfg.solver.verbose = solver.verbose;
      if (workers > 0) cfg.workers = workers;
      std::filesystem::create_directories(out_dir);
      const auto res = rbf::run_sweep(cfg);
      {
        std::ofstream rec(std::filesystem::path(out_dir) / "records.csv");
        rbf::write_records_csv(rec, res.records);
        std::ofstream agg(std::filesystem::path(out_dir) / "aggregate.csv");
        rbf::write_aggregate_csv(agg, res.aggregate);
        if (!rec || !agg) throw UsageError("cannot write into " + out_dir);
      }
      rbf::write_aggregate_csv(std::cout, res.aggregate);
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "rbf: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "rbf: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "rbf: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
