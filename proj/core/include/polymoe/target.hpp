#pragma once

#include <Eigen/Core>
#include <functional>
#include <random>

#include "polymoe/expfam.hpp"

namespace polymoe {

// Covariate law on [-1,1]^s; uniform is the only law in use.
struct CovariateLaw {
  int s = 1;

  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  double density(const Eigen::VectorXd& x) const;  // 2^{-s} inside the box
};

enum class TargetKind { smooth_sin, trunc_power, polynomial };

struct TargetParams {
  double amplitude = 1.0;   // smooth_sin
  double omega = 3.0;       // smooth_sin
  Eigen::VectorXd knots;    // trunc_power knot per coordinate
  Eigen::VectorXd coeffs;   // polynomial coefficients, graded-lex
  int degree = 0;           // polynomial degree
};

// Ground-truth conditional density: family + mean-scale function h with
// declared smoothness alpha + covariate law.
struct TargetSpec {
  ExpFamily family;
  int s = 1;
  double alpha = std::numeric_limits<double>::infinity();
  std::function<double(const Eigen::VectorXd&)> h;
  CovariateLaw px;
  double sup_h = 0.0;  // grid/MC bound of |h| over the box, recorded

  // Declarative description, kept for serialization.
  TargetKind kind = TargetKind::smooth_sin;
  TargetParams params;

  double log_density(const Eigen::VectorXd& x, double y) const;
  double natural(const Eigen::VectorXd& x) const { return family.clip(h(x)); }
};

}  // namespace polymoe
