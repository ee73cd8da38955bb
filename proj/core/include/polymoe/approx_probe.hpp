#pragma once

#include <Eigen/Core>
#include <vector>

#include "polymoe/moe.hpp"
#include "polymoe/target.hpp"

namespace polymoe {

// Degree-k least-squares fits of the target's mean-scale function on a
// uniform partition of [-1,1]^s, one coefficient vector per cell, in global
// coordinates. s is restricted to {1, 2}.
struct PiecewiseFit {
  int s = 1;
  int k = 0;
  int cells_per_axis = 1;
  int n_quad = 16;  // Gauss-Legendre points per axis per cell
  PolyBasis basis;
  std::vector<Eigen::VectorXd> cell_coeffs;  // row-major over axes

  long cell_count() const;
  // Lower-left corner and width of a cell.
  void cell_bounds(long idx, Eigen::VectorXd& lo, double& width) const;
  long cell_of(const Eigen::VectorXd& x) const;
};

PiecewiseFit piecewise_fit(const TargetSpec& target, int cells_per_axis, int k,
                           int n_quad);

// Gate-weighted squared error of the fit with hard cell-indicator gates,
// integrated against p_x by per-cell Gauss-Legendre quadrature.
double probe_divergence(const TargetSpec& target, const PiecewiseFit& fit);

// Mixture model whose logistic gate approaches the cell indicators as beta
// grows: logits beta (2 c_j . x - |c_j|^2) for cell centers c_j.
MoEParams soft_gated_model(const PiecewiseFit& fit, const ExpFamily& family,
                           double beta);

struct ProbeResult {
  std::vector<int> ms;      // cells per axis
  std::vector<long> rs;     // total cells, m^s
  std::vector<double> Ds;   // upper divergence per partition
  double slope = 0.0;       // least-squares slope of log D vs log r
  double theory_slope = 0.0;  // -2 min(alpha, k+1) / s
  bool slope_defined = true;  // false when some D vanishes (realizable target)
};

ProbeResult rate_slope(const TargetSpec& target, const std::vector<int>& ms,
                       int k, int n_quad);

}  // namespace polymoe
