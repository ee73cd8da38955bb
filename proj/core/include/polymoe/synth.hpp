#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polymoe/em_fit.hpp"
#include "polymoe/target.hpp"

namespace polymoe {

const char* target_kind_name(TargetKind k);
TargetKind parse_target_kind(const std::string& name);

// smooth_sin: h(x) = A sin(omega sum_i x_i), alpha = inf.
// trunc_power: h(x) = sum_i max(0, x_i - c_i)^alpha, integer alpha >= 1.
// polynomial: h realizable in the degree-`params.degree` basis.
TargetSpec make_target(TargetKind kind, double alpha, int s, const ExpFamily& family,
                       const TargetParams& params = {});

// x_i iid from target.px, y_i from the family at h(x_i).
Dataset sample_target(const TargetSpec& target, long n, std::uint64_t seed);

struct ExperimentConfig {
  TargetKind kind = TargetKind::smooth_sin;
  double alpha = std::numeric_limits<double>::infinity();
  int s = 1;
  ExpFamily family;
  TargetParams tparams;

  std::vector<long> n_grid;
  std::vector<int> m_grid;   // used when m_from_path is false (cross with n_grid)
  bool m_from_path = true;   // m(n) = max(1, round(path_c * n^{s/(2 tau + s)}))
  double path_c = 1.0;
  int k = 1;

  FitConfig fit;  // m is taken from the grid/path, seed from below
  long n_mc = 2000;
  int replications = 10;
  std::uint64_t seed = 0;
};

struct ExperimentCell {
  long n = 0;
  int m = 0;
  int k = 0;
  int rep = 0;
  double kl = 0.0;
  double se = 0.0;
  double loglik = 0.0;
  int iters = 0;
  bool ok = true;
  std::string error;
};

struct ExperimentResult {
  std::vector<ExperimentCell> cells;  // ordered by (n index, m index, rep)
  std::vector<long> ns;
  std::vector<int> path_ms;        // path mode only
  std::vector<double> median_kl;   // per n along the path (path mode)
  double slope = 0.0;              // log median KL vs log n
  double tau = 0.0;                // min(alpha, k+1)
  double theory_exponent = 0.0;    // -2 tau / (2 tau + s)
  bool slope_defined = false;
};

// Sweeps (n, m, replication): sample, fit, estimate KL against the target.
// Cells run in parallel with per-cell derived seeds; failures are recorded
// and excluded from the medians.
ExperimentResult run_rate_experiment(const ExperimentConfig& cfg);

}  // namespace polymoe
