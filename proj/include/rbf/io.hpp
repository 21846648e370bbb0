#pragma once

// JSON formats for instances, designs, sweep configs and duality reports.
//
// Instance: {"nt", "k", "hbar": [[[re, im], ...] per user], "radius": [...],
//            "noise": [...], "sinr_db": [...]}  (targets in dB on disk)
// Design:   {"objective", "lambda": [...], "W": [[[[re, im], ...] rows] per user]}

#include <stdexcept>
#include <string>

#include "rbf/duality.hpp"
#include "rbf/harness.hpp"

namespace rbf {

/// Parse or schema error. The message names the line/column for syntax
/// errors and the offending field path for schema errors.
class JsonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const std::string& text);

std::string design_to_json(const RobustDesign& design);
RobustDesign design_from_json(const std::string& text);

/// Keys: nt, k, sigma2, radius, gamma_db, trials, seed, workers, probe, and
/// an optional "solver" object {gap_tol, feas_tol, max_iterations}. Missing
/// keys keep their defaults.
SweepConfig sweep_config_from_json(const std::string& text);

/// Flat report: statuses, objectives, gap, rank profile, margins, each KKT
/// residual under "kkt_*", activity, uniqueness-probe verdict and the pass flag.
std::string report_to_json(const DualityReport& rep);

}  // namespace rbf
