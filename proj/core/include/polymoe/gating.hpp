#pragma once

#include <Eigen/Core>

namespace polymoe {

// Multinomial-logistic gate over m experts with expert m pinned to zero
// logits. W holds the free logit coefficients, one row per unpinned expert,
// intercept column first.
struct GateParams {
  int m = 1;
  int s = 0;
  Eigen::MatrixXd W;  // (m-1) x (s+1)

  static GateParams zeros(int m, int s);
};

// Number of free gate parameters, (m-1)(s+1); zero for a single expert.
int gate_param_count(int m, int s);

// Softmax weights computed with max subtraction; sums to one.
Eigen::VectorXd gate_weights(const GateParams& gp, const Eigen::VectorXd& x);

// log of gate_weights, written into out (length m).
void gate_log_weights_into(const GateParams& gp, const Eigen::VectorXd& x,
                           Eigen::Ref<Eigen::VectorXd> out);

}  // namespace polymoe
