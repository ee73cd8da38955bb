#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <vector>

#include "polymoe/moe.hpp"

namespace polymoe {

struct FitConfig {
  int m = 1;
  int k = 0;
  int max_em_iters = 500;
  double rel_tol = 1e-8;  // on the log-likelihood change
  int inner_newton_iters = 50;
  double inner_tol = 1e-10;  // on the inner gradient norm
  int restarts = 5;
  double ridge = 1e-8;
  std::uint64_t seed = 0;
  bool rescale = true;  // map covariates to [-1,1]^s and record the map
};

struct FitReport {
  MoEParams model;
  std::vector<double> loglik_trajectory;  // one entry per E-step
  int iterations = 0;                     // EM updates performed
  bool converged = false;
  int restart_index = 0;
  std::uint64_t clip_events = 0;

  double final_loglik() const {
    return loglik_trajectory.empty() ? -std::numeric_limits<double>::infinity()
                                     : loglik_trajectory.back();
  }
};

// Maximum likelihood by EM with multi-restart initialization; best restart by
// final log-likelihood, ties broken by lowest restart index.
FitReport fit(const Dataset& data, const ExpFamily& family, const FitConfig& cfg);

// Responsibility matrix, one row per observation; rows sum to one.
Eigen::MatrixXd e_step(const MoEParams& model, const Dataset& data,
                       std::uint64_t* clip_events = nullptr);

struct NewtonOpts {
  int max_iters = 50;
  double tol = 1e-10;
  double ridge = 1e-8;
};

// Weighted per-expert maximization of sum_i tau_ij [y_i a(h) + b(h)] by
// damped Newton with a ridge-regularized Hessian. Experts whose column mass
// falls below 1e-8 are left at their initial value and flagged in starved.
std::vector<Eigen::VectorXd> m_step_experts(
    const Eigen::MatrixXd& tau, const Dataset& data, const ExpFamily& family,
    const PolyBasis& basis, const std::vector<Eigen::VectorXd>& theta_init,
    const NewtonOpts& opts, std::uint64_t* clip_events = nullptr,
    std::vector<bool>* starved = nullptr);

// Weighted multinomial logistic regression: maximizes
// sum_ij tau_ij log g_j(x_i; W) - (ridge/2) |W|^2 by damped Newton.
GateParams m_step_gate(const Eigen::MatrixXd& tau, const Dataset& data,
                       const GateParams& w_init, const NewtonOpts& opts);

// k-means++ covariate clustering, per-cluster single-expert fits, gate fitted
// to the cluster labels. Deterministic given the seed. Data is taken in model
// coordinates (fit() rescales before calling this).
MoEParams init_params(const Dataset& data, const ExpFamily& family, int m, int k,
                      std::uint64_t seed, const NewtonOpts& opts);

}  // namespace polymoe
