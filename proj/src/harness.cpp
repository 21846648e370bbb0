#include "rbf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace rbf {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t user, std::uint64_t entry,
                       std::uint64_t lane) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ user);
  h = splitmix64(h ^ entry);
  h = splitmix64(h ^ lane);
  // (0, 1]: Box-Muller takes a log.
  return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

ProblemInstance generate_instance(int nt, int k, double sigma2, double radius,
                                  double gamma_db, std::uint64_t seed) {
  ProblemInstance inst;
  inst.nt = nt;
  inst.k = k;
  for (int i = 0; i < k; ++i) {
    CVector h(nt);
    for (int e = 0; e < nt; ++e) {
      const double u1 = counter_uniform(seed, i, e, 0);
      const double u2 = counter_uniform(seed, i, e, 1);
      // Each part N(0, 1/2).
      const double rad = std::sqrt(-std::log(u1));
      const double ang = 2.0 * std::numbers::pi * u2;
      h(e) = cplx(rad * std::cos(ang), rad * std::sin(ang));
    }
    inst.hbar.push_back(h);
    inst.radius.push_back(radius);
    inst.noise.push_back(sigma2);
    inst.sinr_target.push_back(db_to_linear(gamma_db));
  }
  inst.validate();
  return inst;
}

std::uint64_t trial_seed(std::uint64_t sweep_seed, int trial) {
  return splitmix64(splitmix64(sweep_seed) ^ static_cast<std::uint64_t>(trial));
}

void SweepConfig::validate() const {
  if (nt < 1 || k < 1) throw std::invalid_argument("sweep: nt and k must be >= 1");
  if (trials < 1) throw std::invalid_argument("sweep: trials must be >= 1");
  if (gamma_db_grid.empty()) throw std::invalid_argument("sweep: gamma grid is empty");
  for (std::size_t g = 1; g < gamma_db_grid.size(); ++g) {
    if (!(gamma_db_grid[g] > gamma_db_grid[g - 1])) {
      throw std::invalid_argument("sweep: gamma grid must be strictly ascending");
    }
  }
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sweep: sigma2 must be positive");
  if (!(radius >= 0.0)) throw std::invalid_argument("sweep: radius must be nonnegative");
  if (workers < 0) throw std::invalid_argument("sweep: workers must be >= 0");
}

int effective_workers(const SweepConfig& cfg) {
  int n = cfg.workers;
  if (const char* env = std::getenv("RBF_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) n = v;
  }
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

namespace {

SweepRecord run_trial(const SweepConfig& cfg, double gamma_db, int trial) {
  SweepRecord rec;
  rec.gamma_db = gamma_db;
  rec.trial = trial;
  rec.seed = trial_seed(cfg.seed, trial);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.power = rec.rel_gap = rec.max_rank_ratio = rec.min_margin = nan;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const ProblemInstance inst =
        generate_instance(cfg.nt, cfg.k, cfg.sigma2, cfg.radius, gamma_db, rec.seed);
    VerifyOptions opts;
    opts.solver = cfg.solver;
    opts.probe = cfg.probe;
    opts.probe_options.solver = cfg.solver;
    rec.report = verify_proposition1(inst, opts);
    const DualityReport& r = rec.report;
    rec.status = sdp::to_string(r.primal_status);
    if (r.primal_status == sdp::Status::Optimal && r.dual_status == sdp::Status::Optimal) {
      rec.power = r.primal_obj;
      rec.rel_gap = r.rel_gap;
      if (!r.rank_profile.empty()) {
        rec.max_rank_ratio = *std::max_element(r.rank_profile.begin(), r.rank_profile.end());
      }
      if (!r.worst_case_margins.empty()) {
        rec.min_margin =
            *std::min_element(r.worst_case_margins.begin(), r.worst_case_margins.end());
      }
    } else if (r.primal_status == sdp::Status::Optimal) {
      rec.status = "Dual" + sdp::to_string(r.dual_status);
    }
    rec.condition1 = to_string(r.condition1.verdict);
    rec.passed = r.passed;
  } catch (const std::exception& e) {
    rec.status = "Error";
    rec.condition1 = to_string(Condition1::NotRun);
    rec.report.error = e.what();
  }
  rec.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t n_gamma = cfg.gamma_db_grid.size();
  const std::size_t total = n_gamma * static_cast<std::size_t>(cfg.trials);
  SweepResult out;
  out.records.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      const std::size_t g = job / cfg.trials;
      const int t = static_cast<int>(job % cfg.trials);
      out.records[job] = run_trial(cfg, cfg.gamma_db_grid[g], t);
    }
  };
  const int n = std::min<int>(effective_workers(cfg), static_cast<int>(total));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  out.aggregate = aggregate(out.records);
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<SweepRecord>& records) {
  std::vector<AggregateRow> rows;
  for (const auto& r : records) {
    if (rows.empty() || rows.back().gamma_db != r.gamma_db) {
      AggregateRow row;
      row.gamma_db = r.gamma_db;
      rows.push_back(row);
    }
    AggregateRow& row = rows.back();
    ++row.trials;
    if (r.status == "Optimal") {
      ++row.optimal;
      row.mean_power += r.power;
    }
  }
  for (auto& row : rows) {
    row.feasibility_rate = static_cast<double>(row.optimal) / row.trials;
    if (row.optimal > 0) {
      row.mean_power /= row.optimal;
      row.mean_power_db = linear_to_db(row.mean_power);
    } else {
      row.mean_power = row.mean_power_db = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rows;
}

const char* const kAggregatePolicy =
    "# mean power over Optimal trials only; non-Optimal trials are excluded from "
    "the mean and counted in feasibility_rate";

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
  out << "gamma_db,trial,seed,status,power,power_db,rel_gap,max_rank_ratio,min_margin,"
         "condition1,wall_time_ms\n";
  for (const auto& r : records) {
    const double pdb = r.status == "Optimal" ? linear_to_db(r.power)
                                             : std::numeric_limits<double>::quiet_NaN();
    out << num(r.gamma_db) << ',' << r.trial << ',' << r.seed << ',' << r.status << ','
        << num(r.power) << ',' << num(pdb) << ',' << num(r.rel_gap) << ','
        << num(r.max_rank_ratio) << ',' << num(r.min_margin) << ',' << r.condition1 << ','
        << num(r.wall_time_ms) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregatePolicy << '\n';
  out << "gamma_db,trials,optimal,feasibility_rate,mean_power,mean_power_db\n";
  for (const auto& r : rows) {
    out << num(r.gamma_db) << ',' << r.trials << ',' << r.optimal << ','
        << num(r.feasibility_rate) << ',' << num(r.mean_power) << ','
        << num(r.mean_power_db) << '\n';
  }
}

}  // namespace rbf
