#pragma once

#include <Eigen/Core>
#include <vector>

namespace polymoe {

// Monomial basis of total degree <= k in s variables. Multi-indices are kept
// in graded lexicographic order: total degree ascending, and within a degree
// the exponent of x1 decreases first. The first index is the intercept.
class PolyBasis {
 public:
  PolyBasis() : PolyBasis(1, 0) {}
  PolyBasis(int s, int k);

  int s() const { return s_; }
  int k() const { return k_; }
  int dimension() const { return static_cast<int>(indices_.size()); }
  const std::vector<std::vector<int>>& indices() const { return indices_; }

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  void eval_into(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const;
  double eval_poly(const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) const;

  // J_k = C(k+s, k); throws std::overflow_error past 2^31 - 1.
  static long long dimension(int s, int k);

 private:
  int s_, k_;
  std::vector<std::vector<int>> indices_;
};

}  // namespace polymoe
