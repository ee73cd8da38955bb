#include "polymoe/target.hpp"

#include <cmath>
#include <stdexcept>

namespace polymoe {

Eigen::VectorXd CovariateLaw::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd x(s);
  for (int i = 0; i < s; ++i) x[i] = unif(rng);
  return x;
}

double CovariateLaw::density(const Eigen::VectorXd& x) const {
  if (x.size() != s) throw std::invalid_argument("covariate law: wrong dimension");
  for (int i = 0; i < s; ++i)
    if (x[i] < -1.0 || x[i] > 1.0) return 0.0;
  return std::pow(0.5, s);
}

double TargetSpec::log_density(const Eigen::VectorXd& x, double y) const {
  return family.log_density(y, natural(x));
}

}  // namespace polymoe
