#include "polymoe/em_fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "polymoe/errors.hpp"
#include "polymoe/rng.hpp"
#include "polymoe/threading.hpp"

namespace polymoe {

namespace {

constexpr double kStarveMass = 1e-8;
constexpr int kMaxHalvings = 30;

// Weighted expert objective sum_i w_i [y_i a(h_i) + b(h_i)], h = B theta.
double expert_objective(const ExpFamily& family, const Eigen::MatrixXd& B,
                        const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& theta, std::uint64_t* clip_events) {
  double acc = 0.0;
  for (long i = 0; i < B.rows(); ++i) {
    if (w[i] == 0.0) continue;
    const double h = family.clip(B.row(i).dot(theta), clip_events);
    const FamilyEval e = family.eval(h);
    acc += w[i] * (y[i] * e.a + e.b);
  }
  return acc;
}

// One expert's damped-Newton maximization; ascent is guaranteed by halving.
Eigen::VectorXd newton_expert(const ExpFamily& family, const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              Eigen::VectorXd theta, const NewtonOpts& opts,
                              std::uint64_t* clip_events) {
  const int J = static_cast<int>(theta.size());
  double obj = expert_objective(family, B, y, w, theta, clip_events);
  Eigen::VectorXd grad(J);
  Eigen::MatrixXd neg_hess(J, J);
  for (int it = 0; it < opts.max_iters; ++it) {
    grad.setZero();
    neg_hess.setZero();
    for (long i = 0; i < B.rows(); ++i) {
      if (w[i] == 0.0) continue;
      const double raw = B.row(i).dot(theta);
      const double h = family.clip(raw);
      if (h != raw) continue;  // flat beyond the safe domain
      const FamilyEval e = family.eval(h);
      const double g1 = w[i] * (y[i] * e.da + e.db);
      const double g2 = w[i] * (y[i] * e.dda + e.ddb);
      grad.noalias() += g1 * B.row(i).transpose();
      neg_hess.noalias() -= g2 * B.row(i).transpose() * B.row(i);
    }
    if (grad.norm() <= opts.tol) break;
    neg_hess.diagonal().array() += opts.ridge;
    const Eigen::VectorXd step = neg_hess.ldlt().solve(grad);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < kMaxHalvings; ++half) {
      const Eigen::VectorXd cand = theta + t * step;
      const double cand_obj = expert_objective(family, B, y, w, cand, clip_events);
      if (cand_obj >= obj) {
        theta = cand;
        accepted = cand_obj > obj;
        obj = cand_obj;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return theta;
}

struct GateWork {
  Eigen::MatrixXd Z;  // n x (s+1), intercept first
};

// sum_ij tau_ij log g_j; this raw value is what the EM ascent argument needs
double gate_objective_raw(const Eigen::MatrixXd& tau, const GateWork& gw,
                          const GateParams& gp) {
  const long n = gw.Z.rows();
  const int m = gp.m;
  double acc = 0.0;
  Eigen::VectorXd eta(m);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < m - 1; ++j) eta[j] = gp.W.row(j).dot(gw.Z.row(i));
    eta[m - 1] = 0.0;
    const double mx = eta.maxCoeff();
    double sum = 0.0;
    for (int j = 0; j < m; ++j) sum += std::exp(eta[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < m; ++j) acc += tau(i, j) * (eta[j] - lse);
  }
  return acc;
}

}  // namespace

GateParams m_step_gate(const Eigen::MatrixXd& tau, const Dataset& data,
                       const GateParams& w_init, const NewtonOpts& opts) {
  const long n = data.n();
  const int m = w_init.m;
  const int sp1 = w_init.s + 1;
  GateParams gp = w_init;
  if (m == 1) return gp;

  GateWork gw;
  gw.Z.resize(n, sp1);
  gw.Z.col(0).setOnes();
  gw.Z.rightCols(w_init.s) = data.X;

  const int p = (m - 1) * sp1;
  double raw = gate_objective_raw(tau, gw, gp);
  double pen = raw - 0.5 * opts.ridge * gp.W.squaredNorm();
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd neg_hess(p, p);
  Eigen::VectorXd eta(m), g(m);

  for (int it = 0; it < opts.max_iters; ++it) {
    grad.setZero();
    neg_hess.setZero();
    for (long i = 0; i < n; ++i) {
      for (int j = 0; j < m - 1; ++j) eta[j] = gp.W.row(j).dot(gw.Z.row(i));
      eta[m - 1] = 0.0;
      const double mx = eta.maxCoeff();
      double sum = 0.0;
      for (int j = 0; j < m; ++j) sum += std::exp(eta[j] - mx);
      for (int j = 0; j < m; ++j) g[j] = std::exp(eta[j] - mx) / sum;
      for (int j = 0; j < m - 1; ++j) {
        const double d = tau(i, j) - g[j];
        grad.segment(j * sp1, sp1).noalias() += d * gw.Z.row(i).transpose();
        for (int l = 0; l < m - 1; ++l) {
          const double coef = g[j] * ((j == l ? 1.0 : 0.0) - g[l]);
          if (coef == 0.0) continue;
          neg_hess.block(j * sp1, l * sp1, sp1, sp1).noalias() +=
              coef * gw.Z.row(i).transpose() * gw.Z.row(i);
        }
      }
    }
    for (int j = 0; j < m - 1; ++j)
      grad.segment(j * sp1, sp1) -= opts.ridge * gp.W.row(j).transpose();
    if (grad.norm() <= opts.tol) break;
    neg_hess.diagonal().array() += opts.ridge;
    const Eigen::VectorXd step = neg_hess.ldlt().solve(grad);
    if (!step.allFinite()) break;

    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < kMaxHalvings; ++half) {
      GateParams cand = gp;
      for (int j = 0; j < m - 1; ++j)
        cand.W.row(j) += t * step.segment(j * sp1, sp1).transpose();
      const double cand_raw = gate_objective_raw(tau, gw, cand);
      const double cand_pen = cand_raw - 0.5 * opts.ridge * cand.W.squaredNorm();
      // the raw objective must never decrease or the EM ascent breaks; the
      // penalized one drives the search and bounds |W| under separable labels
      if (cand_pen >= pen && cand_raw >= raw) {
        gp = cand;
        accepted = cand_pen > pen;
        pen = cand_pen;
        raw = cand_raw;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return gp;
}

std::vector<Eigen::VectorXd> m_step_experts(
    const Eigen::MatrixXd& tau, const Dataset& data, const ExpFamily& family,
    const PolyBasis& basis, const std::vector<Eigen::VectorXd>& theta_init,
    const NewtonOpts& opts, std::uint64_t* clip_events, std::vector<bool>* starved) {
  const long n = data.n();
  const int m = static_cast<int>(theta_init.size());
  Eigen::MatrixXd B(n, basis.dimension());
  Eigen::VectorXd row(basis.dimension());
  for (long i = 0; i < n; ++i) {
    basis.eval_into(data.X.row(i).transpose(), row);
    B.row(i) = row.transpose();
  }
  std::vector<Eigen::VectorXd> out = theta_init;
  if (starved) starved->assign(static_cast<std::size_t>(m), false);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd w = tau.col(j);
    if (w.sum() < kStarveMass) {
      if (starved) (*starved)[static_cast<std::size_t>(j)] = true;
      continue;  // frozen this iteration
    }
    out[static_cast<std::size_t>(j)] =
        newton_expert(family, B, data.Y, w, theta_init[static_cast<std::size_t>(j)],
                      opts, clip_events);
  }
  return out;
}

Eigen::MatrixXd e_step(const MoEParams& model, const Dataset& data,
                       std::uint64_t* clip_events) {
  const long n = data.n();
  Eigen::MatrixXd tau(n, model.m());
  Eigen::VectorXd lg(model.m()), lt(model.m()), b(model.basis.dimension());
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd xs = model.x_scaling.apply(data.X.row(i).transpose());
    model.basis.eval_into(xs, b);
    gate_log_weights_into(model.gate, xs, lg);
    const double lse =
        detail::mixture_log_terms(model, b, lg, data.Y[i], lt, clip_events);
    tau.row(i) = (lt.array() - lse).exp();
  }
  return tau;
}

namespace {

// E-step plus mean mixture log-term in one pass over pre-scaled data.
double estep_loglik(const MoEParams& model, const Dataset& data,
                    Eigen::MatrixXd& tau, std::uint64_t* clip_events) {
  const long n = data.n();
  tau.resize(n, model.m());
  Eigen::VectorXd lg(model.m()), lt(model.m()), b(model.basis.dimension());
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd x = data.X.row(i).transpose();
    model.basis.eval_into(x, b);
    gate_log_weights_into(model.gate, x, lg);
    const double lse =
        detail::mixture_log_terms(model, b, lg, data.Y[i], lt, clip_events);
    tau.row(i) = (lt.array() - lse).exp();
    acc += lse;
  }
  return acc / static_cast<double>(n);
}

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;
};

KMeansResult kmeansxx(const Eigen::MatrixXd& X, int m, std::mt19937_64& rng) {
  const long n = X.rows();
  KMeansResult res;
  res.centers.resize(m, X.cols());
  res.labels.assign(static_cast<std::size_t>(n), 0);
  if (m == 1) {
    res.centers.row(0) = X.colwise().mean();
    return res;
  }
  if (n == m) {
    for (long i = 0; i < n; ++i) {
      res.centers.row(i) = X.row(i);
      res.labels[static_cast<std::size_t>(i)] = static_cast<int>(i);
    }
    return res;
  }

  std::uniform_int_distribution<long> first(0, n - 1);
  res.centers.row(0) = X.row(first(rng));
  Eigen::VectorXd d2(n);
  for (long i = 0; i < n; ++i)
    d2[i] = (X.row(i) - res.centers.row(0)).squaredNorm();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int c = 1; c < m; ++c) {
    const double total = d2.sum();
    long pick = 0;
    if (total > 0.0) {
      const double u = unif(rng) * total;
      double cum = 0.0;
      for (long i = 0; i < n; ++i) {
        cum += d2[i];
        if (u <= cum) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    res.centers.row(c) = X.row(pick);
    for (long i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (X.row(i) - res.centers.row(c)).squaredNorm());
  }

  for (int iter = 0; iter < 25; ++iter) {
    bool changed = false;
    for (long i = 0; i < n; ++i) {
      int best = 0;
      double bd = (X.row(i) - res.centers.row(0)).squaredNorm();
      for (int c = 1; c < m; ++c) {
        const double d = (X.row(i) - res.centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (res.labels[static_cast<std::size_t>(i)] != best) {
        res.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
    for (long i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<std::size_t>(i)]) += X.row(i);
      counts[res.labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int c = 0; c < m; ++c) {
      if (counts[c] > 0.0) {
        res.centers.row(c) = sums.row(c) / counts[c];
      } else {
        // re-seed an empty cluster at the point farthest from its center
        long far = 0;
        double fd = -1.0;
        for (long i = 0; i < n; ++i) {
          const double d =
              (X.row(i) - res.centers.row(res.labels[static_cast<std::size_t>(i)]))
                  .squaredNorm();
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        res.centers.row(c) = X.row(far);
      }
    }
  }
  return res;
}

}  // namespace

MoEParams init_params(const Dataset& data, const ExpFamily& family, int m, int k,
                      std::uint64_t seed, const NewtonOpts& opts) {
  const long n = data.n();
  if (n < m) throw std::invalid_argument("init_params: need at least m observations");
  const int s = data.s();

  MoEParams model;
  model.family = family;
  model.basis = PolyBasis(s, k);
  model.gate = GateParams::zeros(m, s);
  model.x_scaling = XScaling::identity(s);
  model.experts.assign(static_cast<std::size_t>(m),
                       Eigen::VectorXd::Zero(model.basis.dimension()));

  auto rng = make_rng(seed, {stream::init});
  const KMeansResult km = kmeansxx(data.X, m, rng);

  Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(n, m);
  for (long i = 0; i < n; ++i) tau(i, km.labels[static_cast<std::size_t>(i)]) = 1.0;

  // family-safe intercept from each cluster's mean response, then Newton
  std::vector<Eigen::VectorXd> theta0 = model.experts;
  for (int j = 0; j < m; ++j) {
    const double mass = tau.col(j).sum();
    const double mean_y = mass > 0.0 ? tau.col(j).dot(data.Y) / mass : data.Y.mean();
    theta0[static_cast<std::size_t>(j)][0] = family.mean_to_natural(mean_y);
  }
  model.experts = m_step_experts(tau, data, family, model.basis, theta0, opts);
  if (m > 1) model.gate = m_step_gate(tau, data, model.gate, opts);
  return model;
}

namespace {

void validate_dataset(const Dataset& data, const ExpFamily& family) {
  if (!data.X.allFinite()) throw data_error("dataset: non-finite covariates");
  for (long i = 0; i < data.n(); ++i) {
    if (!family.in_support(data.Y[i]))
      throw data_error("dataset: response outside support of family " + family.name());
  }
}

FitReport run_single_restart(const Dataset& scaled, const ExpFamily& family,
                             const FitConfig& cfg, int restart) {
  FitReport report;
  report.restart_index = restart;
  const NewtonOpts opts{cfg.inner_newton_iters, cfg.inner_tol, cfg.ridge};
  const std::uint64_t rseed = derive_seed(cfg.seed, {stream::restart,
                                                     static_cast<std::uint64_t>(restart)});
  report.model = init_params(scaled, family, cfg.m, cfg.k, rseed, opts);

  Eigen::MatrixXd tau;
  double prev = -std::numeric_limits<double>::infinity();
  for (int t = 0;; ++t) {
    const double L = estep_loglik(report.model, scaled, tau, &report.clip_events);
    if (!std::isfinite(L))
      throw numeric_error("EM: log-likelihood became non-finite at iteration " +
                          std::to_string(t));
    report.loglik_trajectory.push_back(L);
    if (t > 0 && std::abs(L - prev) <= cfg.rel_tol * (1.0 + std::abs(L))) {
      report.converged = true;
      break;
    }
    if (t >= cfg.max_em_iters) break;
    prev = L;
    report.model.experts =
        m_step_experts(tau, scaled, family, report.model.basis, report.model.experts,
                       opts, &report.clip_events);
    if (cfg.m > 1)
      report.model.gate = m_step_gate(tau, scaled, report.model.gate, opts);
  }
  report.iterations = static_cast<int>(report.loglik_trajectory.size()) - 1;
  return report;
}

}  // namespace

FitReport fit(const Dataset& data, const ExpFamily& family, const FitConfig& cfg) {
  if (cfg.m < 1) throw std::invalid_argument("fit: m must be >= 1");
  if (cfg.k < 0) throw std::invalid_argument("fit: k must be >= 0");
  if (cfg.restarts < 1) throw std::invalid_argument("fit: restarts must be >= 1");
  validate_dataset(data, family);

  const int s = data.s();
  const long long params =
      gate_param_count(cfg.m, s) + cfg.m * PolyBasis::dimension(s, cfg.k);
  if (data.n() < params)
    throw std::invalid_argument("fit: need n >= parameter count (" +
                                std::to_string(params) + ")");

  // map covariates to [-1,1]^s; the map is recorded on the model
  XScaling sc = XScaling::identity(s);
  Dataset scaled = data;
  if (cfg.rescale) {
    for (int c = 0; c < s; ++c) {
      const double lo = data.X.col(c).minCoeff();
      const double hi = data.X.col(c).maxCoeff();
      sc.offset[c] = 0.5 * (hi + lo);
      sc.scale[c] = std::max(0.5 * (hi - lo), 1e-12);
      scaled.X.col(c) = (data.X.col(c).array() - sc.offset[c]) / sc.scale[c];
    }
  }

  std::vector<FitReport> runs(static_cast<std::size_t>(cfg.restarts));
  parallel_for(static_cast<std::size_t>(cfg.restarts), [&](std::size_t r) {
    runs[r] = run_single_restart(scaled, family, cfg, static_cast<int>(r));
  });

  int best = 0;
  for (int r = 1; r < cfg.restarts; ++r) {
    // ties within 1e-12 keep the lowest restart index
    if (runs[static_cast<std::size_t>(r)].final_loglik() >
        runs[static_cast<std::size_t>(best)].final_loglik() + 1e-12)
      best = r;
  }
  FitReport out = std::move(runs[static_cast<std::size_t>(best)]);
  out.model.x_scaling = sc;
  return out;
}

}  // namespace polymoe
