#include "polymoe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "polymoe/polybasis.hpp"
#include "polymoe/rng.hpp"
#include "polymoe/threading.hpp"
#include "polymoe/divergence.hpp"

namespace polymoe {

const char* target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::smooth_sin: return "smooth_sin";
    case TargetKind::trunc_power: return "trunc_power";
    case TargetKind::polynomial: return "polynomial";
  }
  return "";
}

TargetKind parse_target_kind(const std::string& name) {
  if (name == "smooth_sin") return TargetKind::smooth_sin;
  if (name == "trunc_power") return TargetKind::trunc_power;
  if (name == "polynomial") return TargetKind::polynomial;
  throw std::invalid_argument("unknown target kind: " + name);
}

namespace {

double grid_sup_abs(const std::function<double(const Eigen::VectorXd&)>& f, int s) {
  double mx = 0.0;
  Eigen::VectorXd x(s);
  if (s == 1) {
    for (int i = 0; i < 1025; ++i) {
      x[0] = -1.0 + 2.0 * i / 1024.0;
      mx = std::max(mx, std::abs(f(x)));
    }
  } else if (s == 2) {
    for (int i = 0; i < 129; ++i)
      for (int j = 0; j < 129; ++j) {
        x[0] = -1.0 + 2.0 * i / 128.0;
        x[1] = -1.0 + 2.0 * j / 128.0;
        mx = std::max(mx, std::abs(f(x)));
      }
  } else {
    auto rng = make_rng(0x5a5a);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int t = 0; t < 20000; ++t) {
      for (int d = 0; d < s; ++d) x[d] = unif(rng);
      mx = std::max(mx, std::abs(f(x)));
    }
  }
  return mx;
}

}  // namespace

TargetSpec make_target(TargetKind kind, double alpha, int s, const ExpFamily& family,
                       const TargetParams& params) {
  if (s < 1) throw std::invalid_argument("make_target: s must be >= 1");
  TargetSpec t;
  t.family = family;
  t.s = s;
  t.px = CovariateLaw{s};
  t.kind = kind;
  t.params = params;

  switch (kind) {
    case TargetKind::smooth_sin: {
      const double a = params.amplitude;
      const double w = params.omega;
      t.alpha = std::numeric_limits<double>::infinity();
      t.h = [a, w](const Eigen::VectorXd& x) { return a * std::sin(w * x.sum()); };
      break;
    }
    case TargetKind::trunc_power: {
      if (!(alpha >= 1.0) || std::isinf(alpha))
        throw std::invalid_argument("trunc_power target needs integer alpha >= 1");
      Eigen::VectorXd knots = params.knots;
      if (knots.size() == 0) knots = Eigen::VectorXd::Zero(s);
      if (knots.size() != s)
        throw std::invalid_argument("trunc_power: one knot per coordinate");
      t.alpha = alpha;
      t.params.knots = knots;
      t.h = [knots, alpha](const Eigen::VectorXd& x) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i)
          acc += std::pow(std::max(0.0, x[i] - knots[i]), alpha);
        return acc;
      };
      break;
    }
    case TargetKind::polynomial: {
      const PolyBasis basis(s, params.degree);
      if (params.coeffs.size() != basis.dimension())
        throw std::invalid_argument("polynomial target: coefficient length != J_k");
      const Eigen::VectorXd coeffs = params.coeffs;
      t.alpha = std::numeric_limits<double>::infinity();
      t.h = [basis, coeffs](const Eigen::VectorXd& x) {
        return basis.eval_poly(coeffs, x);
      };
      break;
    }
  }
  t.sup_h = grid_sup_abs(t.h, s);
  return t;
}

Dataset sample_target(const TargetSpec& target, long n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_target: n must be >= 0");
  Dataset out;
  out.X.resize(n, target.s);
  out.Y.resize(n);
  auto rng = make_rng(seed, {stream::dataset});
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd x = target.px.sample(rng);
    out.X.row(i) = x.transpose();
    out.Y[i] = target.family.sample(target.natural(x), rng);
  }
  return out;
}

ExperimentResult run_rate_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_grid.empty()) throw std::invalid_argument("experiment: empty n grid");
  if (cfg.replications < 1)
    throw std::invalid_argument("experiment: replications must be >= 1");
  if (!std::is_sorted(cfg.n_grid.begin(), cfg.n_grid.end()))
    throw std::invalid_argument("experiment: n grid must be ascending");

  const TargetSpec target =
      make_target(cfg.kind, cfg.alpha, cfg.s, cfg.family, cfg.tparams);
  ExperimentResult res;
  res.tau = std::min(cfg.alpha, static_cast<double>(cfg.k + 1));
  res.theory_exponent = -2.0 * res.tau / (2.0 * res.tau + cfg.s);
  res.ns = cfg.n_grid;

  std::vector<int> ms_per_n;
  if (cfg.m_from_path) {
    for (long n : cfg.n_grid) {
      const double expo = cfg.s / (2.0 * res.tau + cfg.s);
      ms_per_n.push_back(std::max(
          1, static_cast<int>(std::llround(cfg.path_c * std::pow(n, expo)))));
    }
    res.path_ms = ms_per_n;
  } else if (cfg.m_grid.empty()) {
    throw std::invalid_argument("experiment: need m grid or path mode");
  }

  struct Job {
    std::size_t n_idx, m_idx;
    int rep;
  };
  std::vector<Job> jobs;
  const std::size_t m_count = cfg.m_from_path ? 1 : cfg.m_grid.size();
  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni)
    for (std::size_t mi = 0; mi < m_count; ++mi)
      for (int rep = 0; rep < cfg.replications; ++rep) jobs.push_back({ni, mi, rep});

  res.cells.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const long n = cfg.n_grid[job.n_idx];
    const int m = cfg.m_from_path ? ms_per_n[job.n_idx] : cfg.m_grid[job.m_idx];
    ExperimentCell cell;
    cell.n = n;
    cell.m = m;
    cell.k = cfg.k;
    cell.rep = job.rep;
    const std::uint64_t cell_seed =
        derive_seed(cfg.seed, {stream::cell, job.n_idx, job.m_idx,
                               static_cast<std::uint64_t>(job.rep)});
    try {
      const Dataset data = sample_target(target, n, cell_seed);
      FitConfig fc = cfg.fit;
      fc.m = m;
      fc.k = cfg.k;
      fc.seed = derive_seed(cell_seed, {1});
      const FitReport report = fit(data, cfg.family, fc);
      cell.loglik = report.final_loglik();
      cell.iters = report.iterations;
      const DivergenceEstimate kl =
          kl_mc(target, report.model, cfg.n_mc, derive_seed(cell_seed, {2}));
      cell.kl = kl.value;
      cell.se = kl.std_error;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    res.cells[j] = cell;
  });

  if (cfg.m_from_path) {
    res.median_kl.resize(cfg.n_grid.size());
    bool all_defined = true;
    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
      std::vector<double> kls;
      for (const auto& cell : res.cells)
        if (cell.ok && cell.n == cfg.n_grid[ni]) kls.push_back(cell.kl);
      if (kls.empty()) {
        res.median_kl[ni] = std::numeric_limits<double>::quiet_NaN();
        all_defined = false;
        continue;
      }
      std::sort(kls.begin(), kls.end());
      const std::size_t h = kls.size() / 2;
      res.median_kl[ni] =
          kls.size() % 2 ? kls[h] : 0.5 * (kls[h - 1] + kls[h]);
    }
    if (all_defined && cfg.n_grid.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      bool positive = true;
      for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
        positive = positive && res.median_kl[i] > 0.0;
      if (positive) {
        for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
          const double lx = std::log(static_cast<double>(cfg.n_grid[i]));
          const double ly = std::log(res.median_kl[i]);
          sx += lx;
          sy += ly;
          sxx += lx * lx;
          sxy += lx * ly;
        }
        const double n = static_cast<double>(cfg.n_grid.size());
        res.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        res.slope_defined = true;
      }
    }
  }
  return res;
}

}  // namespace polymoe
