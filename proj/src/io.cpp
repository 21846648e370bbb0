#include "rbf/io.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace rbf {

using json = nlohmann::ordered_json;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // The library message already carries "at line L, column C".
    throw JsonError(e.what());
  }
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw JsonError("field " + path + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& path = "") {
  if (!j.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(path + key, "missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "not finite");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<int>();
}

const json& array(const json& j, const std::string& path, std::size_t size) {
  if (!j.is_array()) bad(path, "expected an array");
  if (j.size() != size) {
    bad(path, "expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
  }
  return j;
}

cplx complex_entry(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) bad(path, "expected [re, im]");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

std::vector<double> reals(const json& j, const std::string& path, std::size_t size) {
  array(j, path, size);
  std::vector<double> out;
  for (std::size_t i = 0; i < size; ++i) {
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string instance_to_json(const ProblemInstance& inst) {
  json j;
  j["nt"] = inst.nt;
  j["k"] = inst.k;
  json h = json::array();
  for (const auto& v : inst.hbar) {
    json u = json::array();
    for (Eigen::Index e = 0; e < v.size(); ++e) u.push_back(complex_json(v(e)));
    h.push_back(u);
  }
  j["hbar"] = h;
  j["radius"] = inst.radius;
  j["noise"] = inst.noise;
  json db = json::array();
  for (double g : inst.sinr_target) db.push_back(linear_to_db(g));
  j["sinr_db"] = db;
  return j.dump(2);
}

ProblemInstance instance_from_json(const std::string& text) {
  const json j = parse(text);
  ProblemInstance inst;
  inst.nt = integer(field(j, "nt"), "nt");
  inst.k = integer(field(j, "k"), "k");
  if (inst.nt < 1) bad("nt", "must be >= 1");
  if (inst.k < 1) bad("k", "must be >= 1");
  const std::size_t k = inst.k;
  const json& h = array(field(j, "hbar"), "hbar", k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::string p = "hbar[" + std::to_string(i) + "]";
    array(h[i], p, inst.nt);
    CVector v(inst.nt);
    for (int e = 0; e < inst.nt; ++e) {
      v(e) = complex_entry(h[i][e], p + "[" + std::to_string(e) + "]");
    }
    inst.hbar.push_back(v);
  }
  inst.radius = reals(field(j, "radius"), "radius", k);
  inst.noise = reals(field(j, "noise"), "noise", k);
  for (double g : reals(field(j, "sinr_db"), "sinr_db", k)) {
    inst.sinr_target.push_back(db_to_linear(g));
  }
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    throw JsonError(e.what());
  }
  return inst;
}

std::string design_to_json(const RobustDesign& design) {
  json j;
  j["objective"] = design.objective;
  j["lambda"] = design.lambda;
  json w = json::array();
  for (const auto& m : design.W) w.push_back(matrix_json(m.mat()));
  j["W"] = w;
  return j.dump(2);
}

RobustDesign design_from_json(const std::string& text) {
  const json j = parse(text);
  RobustDesign d;
  const json& w = field(j, "W");
  if (!w.is_array() || w.empty()) bad("W", "expected a nonempty array");
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::string p = "W[" + std::to_string(i) + "]";
    if (!w[i].is_array() || w[i].empty()) bad(p, "expected a square matrix");
    const std::size_t n = w[i].size();
    CMatrix m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::string pr = p + "[" + std::to_string(r) + "]";
      array(w[i][r], pr, n);
      for (std::size_t c = 0; c < n; ++c) {
        m(r, c) = complex_entry(w[i][r][c], pr + "[" + std::to_string(c) + "]");
      }
    }
    try {
      d.W.push_back(HermMatrix::checked(m));
    } catch (const std::invalid_argument& e) {
      bad(p, e.what());
    }
    d.objective += d.W.back().trace();
  }
  if (j.contains("lambda")) {
    d.lambda = reals(j["lambda"], "lambda", w.size());
  } else {
    d.lambda.assign(w.size(), 0.0);
  }
  return d;
}

SweepConfig sweep_config_from_json(const std::string& text) {
  const json j = parse(text);
  if (!j.is_object()) bad("<root>", "expected an object");
  SweepConfig c;
  if (j.contains("nt")) c.nt = integer(j["nt"], "nt");
  if (j.contains("k")) c.k = integer(j["k"], "k");
  if (j.contains("sigma2")) c.sigma2 = number(j["sigma2"], "sigma2");
  if (j.contains("radius")) c.radius = number(j["radius"], "radius");
  if (j.contains("gamma_db")) {
    const json& g = j["gamma_db"];
    if (!g.is_array()) bad("gamma_db", "expected an array");
    c.gamma_db_grid = reals(g, "gamma_db", g.size());
  }
  if (j.contains("trials")) c.trials = integer(j["trials"], "trials");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("workers")) c.workers = integer(j["workers"], "workers");
  if (j.contains("probe")) {
    if (!j["probe"].is_boolean()) bad("probe", "expected true or false");
    c.probe = j["probe"].get<bool>();
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    if (!s.is_object()) bad("solver", "expected an object");
    if (s.contains("gap_tol")) c.solver.gap_tol = number(s["gap_tol"], "solver.gap_tol");
    if (s.contains("feas_tol")) c.solver.feas_tol = number(s["feas_tol"], "solver.feas_tol");
    if (s.contains("max_iterations")) {
      c.solver.max_iterations = integer(s["max_iterations"], "solver.max_iterations");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw JsonError(e.what());
  }
  return c;
}

std::string report_to_json(const DualityReport& rep) {
  json j;
  j["primal_status"] = sdp::to_string(rep.primal_status);
  j["dual_status"] = sdp::to_string(rep.dual_status);
  j["primal_obj"] = rep.primal_obj;
  j["dual_obj"] = rep.dual_obj;
  j["rel_gap"] = rep.rel_gap;
  j["rank_profile"] = rep.rank_profile;
  j["fallback"] = rep.fallback;
  j["beam_power"] = rep.beam_power;
  json margins = json::array();
  for (double m : rep.worst_case_margins) margins.push_back(nullable(m));
  j["worst_case_margins"] = margins;
  j["kkt_primal_cone"] = rep.kkt.primal_cone;
  j["kkt_psi_psd"] = rep.kkt.psi_psd;
  j["kkt_y_psd"] = rep.kkt.y_psd;
  j["kkt_psi_a"] = rep.kkt.psi_a;
  j["kkt_y_w"] = rep.kkt.y_w;
  j["kkt_trace"] = rep.kkt.trace;
  j["kkt_trace_slackness"] = rep.kkt.trace_slackness;
  j["kkt_max"] = rep.kkt.max();
  j["kkt_pass"] = rep.kkt_pass;
  j["fixed_certificate_obj"] = rep.fixed_certificate_obj;
  j["fixed_certificate_accepts_design"] = rep.fixed_certificate_accepts_design;
  json act = json::array();
  for (double a : rep.activity) act.push_back(nullable(a));
  j["activity"] = act;
  j["activity_error"] = nullable(rep.activity_error);
  j["condition1"] = to_string(rep.condition1.verdict);
  j["condition1_max_deviation"] = rep.condition1.max_deviation;
  j["condition1_perturbation"] = rep.condition1.perturbation;
  j["infeasibility_certificate"] = rep.infeasibility_certificate;
  j["error"] = rep.error;
  j["passed"] = rep.passed;
  return j.dump(2);
}

}  // namespace rbf
