#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "polymoe/expfam.hpp"
#include "polymoe/gating.hpp"
#include "polymoe/polybasis.hpp"

namespace polymoe {

// Affine map from raw covariates to model coordinates:
// x_model = (x_raw - offset) / scale, componentwise.
struct XScaling {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  static XScaling identity(int s);
  bool is_identity() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

// Mixture-of-experts conditional density: a logistic gate over m experts,
// each a one-parameter exponential family whose natural argument is a
// degree-k polynomial in the covariates.
struct MoEParams {
  ExpFamily family;
  PolyBasis basis;
  GateParams gate;
  std::vector<Eigen::VectorXd> experts;  // m coefficient vectors, length J_k
  XScaling x_scaling;                    // raw -> model coordinates

  int m() const { return gate.m; }
  int s() const { return basis.s(); }
  int k() const { return basis.k(); }
  int param_count() const;

  // Throws std::invalid_argument on shape mismatches or non-finite entries.
  void validate() const;
};

struct Dataset {
  Eigen::MatrixXd X;  // n x s
  Eigen::VectorXd Y;  // n

  long n() const { return X.rows(); }
  int s() const { return static_cast<int>(X.cols()); }
};

// Per-expert natural arguments h_k(x; theta_j), unclipped, in model
// coordinates (x is raw and gets scaled internally).
Eigen::VectorXd expert_naturals(const MoEParams& model, const Eigen::VectorXd& x);

Eigen::VectorXd gate_weights_at(const MoEParams& model, const Eigen::VectorXd& x);

// log sum_j g_j(x) exp{y a(h_j) + b(h_j) + c(y)}, via log-sum-exp.
double cond_log_density(const MoEParams& model, const Eigen::VectorXd& x, double y,
                        std::uint64_t* clip_events = nullptr);

// n^{-1} sum_i [cond_log_density(x_i, y_i) - c(y_i)].
double log_likelihood(const MoEParams& model, const Dataset& data,
                      std::uint64_t* clip_events = nullptr);

// Exact gradient of log_likelihood in (W, theta_1..theta_m), flattened as the
// gate block (row-major) followed by the expert blocks.
Eigen::VectorXd loglik_gradient(const MoEParams& model, const Dataset& data);

// Posterior expert probabilities tau_j(x, y), computed in log space.
Eigen::VectorXd responsibilities(const MoEParams& model, const Eigen::VectorXd& x,
                                 double y);

using XSampler = std::function<Eigen::VectorXd(std::mt19937_64&)>;

// Draw x from x_sampler, an expert index from the gate, then y from that
// expert's conditional.
Dataset sample_from_model(const MoEParams& model, const XSampler& x_sampler,
                          long n, std::mt19937_64& rng);

namespace detail {
// Fills lt[j] = log g_j(x) + y a(h_j) + b(h_j) for x already in model
// coordinates with the basis vector precomputed; returns log-sum-exp of lt.
double mixture_log_terms(const MoEParams& model, const Eigen::VectorXd& basis_vec,
                         const Eigen::VectorXd& log_gate, double y,
                         Eigen::Ref<Eigen::VectorXd> lt,
                         std::uint64_t* clip_events);
double logsumexp(const Eigen::VectorXd& v);
}  // namespace detail

}  // namespace polymoe
