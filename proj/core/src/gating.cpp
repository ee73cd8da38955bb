#include "polymoe/gating.hpp"

#include <cmath>
#include <stdexcept>

namespace polymoe {

GateParams GateParams::zeros(int m, int s) {
  if (m < 1) throw std::invalid_argument("gate requires m >= 1");
  GateParams gp;
  gp.m = m;
  gp.s = s;
  gp.W = Eigen::MatrixXd::Zero(m - 1, s + 1);
  return gp;
}

int gate_param_count(int m, int s) {
  if (m < 1) throw std::invalid_argument("gate_param_count: m must be >= 1");
  return (m - 1) * (s + 1);
}

void gate_log_weights_into(const GateParams& gp, const Eigen::VectorXd& x,
                           Eigen::Ref<Eigen::VectorXd> out) {
  if (x.size() != gp.s) throw std::invalid_argument("gate: x has wrong length");
  if (out.size() != gp.m) throw std::invalid_argument("gate: output has wrong length");
  double mx = 0.0;  // pinned expert's logit
  for (int j = 0; j < gp.m - 1; ++j) {
    double eta = gp.W(j, 0);
    for (int i = 0; i < gp.s; ++i) eta += gp.W(j, i + 1) * x[i];
    out[j] = eta;
    if (eta > mx) mx = eta;
  }
  out[gp.m - 1] = 0.0;
  double sum = 0.0;
  for (int j = 0; j < gp.m; ++j) sum += std::exp(out[j] - mx);
  const double lse = mx + std::log(sum);
  for (int j = 0; j < gp.m; ++j) out[j] -= lse;
}

Eigen::VectorXd gate_weights(const GateParams& gp, const Eigen::VectorXd& x) {
  Eigen::VectorXd lw(gp.m);
  gate_log_weights_into(gp, x, lw);
  return lw.array().exp();
}

}  // namespace polymoe
