#pragma once

#include <Eigen/Core>

namespace polymoe {

// Gauss-Legendre nodes and weights on [-1, 1]; exact for polynomials of
// degree <= 2n - 1.
struct GaussLegendre {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GaussLegendre gauss_legendre(int n);

}  // namespace polymoe
