#pragma once

#include <cstdint>

#include "polymoe/moe.hpp"
#include "polymoe/target.hpp"

namespace polymoe {

enum class EstimateMethod { monte_carlo, quadrature, truncated_sum };

const char* method_name(EstimateMethod m);

struct DivergenceEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero exactly for deterministic methods
  long n_mc = 0;
  EstimateMethod method = EstimateMethod::monte_carlo;
};

// KL(target || model) for the conditional densities, averaged over x ~ p_x.
// monte_carlo draws (x, y); truncated_sum replaces the inner y-average by an
// exact truncated sum (discrete families, cumulative mass >= 1 - 1e-12).
// auto_method picks truncated_sum when the truncation needs <= 1e4 terms.
DivergenceEstimate kl_mc(const TargetSpec& target, const MoEParams& model,
                         long n_mc, std::uint64_t seed);
DivergenceEstimate kl_mc(const TargetSpec& target, const MoEParams& model,
                         long n_mc, std::uint64_t seed, EstimateMethod method);

// integral of sum_j g_j(x) (h_k(x;theta_j) - h(x))^2 dP_x; tensor midpoint
// quadrature for s <= 2 (n_quad points per axis), Monte Carlo over p_x above.
DivergenceEstimate upper_divergence(const TargetSpec& target, const MoEParams& model,
                                    int n_quad);

// max over a grid of (1/2)[|phi(h(x))| |a''(h(x))| + |b''(h(x))|]; for the
// canonical families this is half the maximal conditional variance.
double m_infty(const TargetSpec& target, int n_grid);

struct HellingerEstimate {
  double dh = 0.0;      // sqrt of the clamped dh2 estimate
  double dh2 = 0.0;     // estimate of 1 - E_p[sqrt(f/p)]
  double dh2_se = 0.0;
  long n_mc = 0;
  EstimateMethod method = EstimateMethod::monte_carlo;
  bool clamped = false;  // negative MC estimate clamped to zero
};

HellingerEstimate hellinger_mc(const TargetSpec& target, const MoEParams& model,
                               long n_mc, std::uint64_t seed);
HellingerEstimate hellinger_mc(const TargetSpec& target, const MoEParams& model,
                               long n_mc, std::uint64_t seed, EstimateMethod method);

struct SandwichReport {
  DivergenceEstimate kl;
  HellingerEstimate hellinger;
  DivergenceEstimate upper;   // the gate-weighted squared natural-scale error
  double m_inf = 0.0;         // curvature bound at the target naturals
  double m_inf_segment = 0.0; // curvature bound over target-to-expert segments
  double cs2 = 0.0;           // grid max of the density ratio p/f
  double kl_upper_factor = 0.0;  // 4 (1 + log c_s)
  bool ratio_bounded = true;     // false => hellinger sandwich skipped
  bool upper_ok = false;         // KL <= 1.05 * m_inf_segment * upper
  bool hellinger_ok = false;     // dh2 <= KL <= factor * dh2
};

// Runs all estimators with substreams of seed and checks both inequalities
// within three combined standard errors.
SandwichReport sandwich_report(const TargetSpec& target, const MoEParams& model,
                               long n_mc, std::uint64_t seed);

}  // namespace polymoe
