#include "polymoe/polybasis.hpp"

#include <stdexcept>

namespace polymoe {

namespace {

void enumerate_degree(int s, int pos, int remaining, std::vector<int>& cur,
                      std::vector<std::vector<int>>& out) {
  if (pos == s - 1) {
    cur[pos] = remaining;
    out.push_back(cur);
    return;
  }
  // leading variable's exponent descends first
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = e;
    enumerate_degree(s, pos + 1, remaining - e, cur, out);
  }
}

}  // namespace

long long PolyBasis::dimension(int s, int k) {
  if (s < 1) throw std::invalid_argument("dimension: s must be >= 1");
  if (k < 0) throw std::invalid_argument("dimension: k must be >= 0");
  // C(k+s, k) via the multiplicative form, watching for overflow
  unsigned __int128 num = 1;
  const int r = std::min(s, k);
  for (int i = 1; i <= r; ++i) {
    num = num * static_cast<unsigned>(k + s - r + i);
    num /= static_cast<unsigned>(i);
    if (num > (static_cast<unsigned __int128>(1) << 31))
      throw std::overflow_error("polynomial dimension exceeds 2^31");
  }
  return static_cast<long long>(num);
}

PolyBasis::PolyBasis(int s, int k) : s_(s), k_(k) {
  const long long j = dimension(s, k);
  indices_.reserve(static_cast<std::size_t>(j));
  std::vector<int> cur(static_cast<std::size_t>(s), 0);
  for (int deg = 0; deg <= k; ++deg) enumerate_degree(s, 0, deg, cur, indices_);
}

void PolyBasis::eval_into(const Eigen::VectorXd& x,
                          Eigen::Ref<Eigen::VectorXd> out) const {
  if (x.size() != s_) throw std::invalid_argument("basis eval: x has wrong length");
  if (out.size() != dimension())
    throw std::invalid_argument("basis eval: output has wrong length");
  // per-variable power table, then products per multi-index
  Eigen::MatrixXd pw(s_, k_ + 1);
  for (int i = 0; i < s_; ++i) {
    pw(i, 0) = 1.0;
    for (int e = 1; e <= k_; ++e) pw(i, e) = pw(i, e - 1) * x[i];
  }
  for (int idx = 0; idx < dimension(); ++idx) {
    double v = 1.0;
    const auto& r = indices_[static_cast<std::size_t>(idx)];
    for (int i = 0; i < s_; ++i) v *= pw(i, r[static_cast<std::size_t>(i)]);
    out[idx] = v;
  }
}

Eigen::VectorXd PolyBasis::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(dimension());
  eval_into(x, out);
  return out;
}

double PolyBasis::eval_poly(const Eigen::VectorXd& coeffs,
                            const Eigen::VectorXd& x) const {
  if (coeffs.size() != dimension())
    throw std::invalid_argument("eval_poly: coefficient length mismatch");
  return coeffs.dot(eval(x));
}

}  // namespace polymoe
