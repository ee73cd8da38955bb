#include "polymoe/moe.hpp"

#include <cmath>
#include <stdexcept>

#include "polymoe/errors.hpp"

namespace polymoe {

XScaling XScaling::identity(int s) {
  XScaling sc;
  sc.offset = Eigen::VectorXd::Zero(s);
  sc.scale = Eigen::VectorXd::Ones(s);
  return sc;
}

bool XScaling::is_identity() const {
  return offset.isZero(0.0) && (scale.array() == 1.0).all();
}

Eigen::VectorXd XScaling::apply(const Eigen::VectorXd& x) const {
  return (x - offset).cwiseQuotient(scale);
}

int MoEParams::param_count() const {
  return gate_param_count(m(), s()) + m() * basis.dimension();
}

void MoEParams::validate() const {
  const int mm = gate.m;
  if (mm < 1) throw std::invalid_argument("model: m must be >= 1");
  if (gate.s != basis.s()) throw std::invalid_argument("model: gate/basis s mismatch");
  if (static_cast<int>(experts.size()) != mm)
    throw std::invalid_argument("model: expert count != m");
  for (const auto& th : experts) {
    if (th.size() != basis.dimension())
      throw std::invalid_argument("model: expert coefficient length != J_k");
    if (!th.allFinite()) throw std::invalid_argument("model: non-finite expert coefficients");
  }
  if (mm > 1 && !gate.W.allFinite())
    throw std::invalid_argument("model: non-finite gate coefficients");
  if (x_scaling.offset.size() != basis.s() || x_scaling.scale.size() != basis.s())
    throw std::invalid_argument("model: x_scaling length != s");
  if ((x_scaling.scale.array() == 0.0).any())
    throw std::invalid_argument("model: zero scale component");
}

namespace detail {

double logsumexp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) sum += std::exp(v[j] - mx);
  return mx + std::log(sum);
}

double mixture_log_terms(const MoEParams& model, const Eigen::VectorXd& basis_vec,
                         const Eigen::VectorXd& log_gate, double y,
                         Eigen::Ref<Eigen::VectorXd> lt,
                         std::uint64_t* clip_events) {
  const int m = model.m();
  for (int j = 0; j < m; ++j) {
    const double h = model.family.clip(model.experts[static_cast<std::size_t>(j)].dot(basis_vec),
                                       clip_events);
    const FamilyEval e = model.family.eval(h);
    lt[j] = log_gate[j] + y * e.a + e.b;
  }
  double mx = lt[0];
  for (int j = 1; j < m; ++j) mx = std::max(mx, lt[j]);
  double sum = 0.0;
  for (int j = 0; j < m; ++j) sum += std::exp(lt[j] - mx);
  return mx + std::log(sum);
}

}  // namespace detail

Eigen::VectorXd expert_naturals(const MoEParams& model, const Eigen::VectorXd& x) {
  const Eigen::VectorXd xs = model.x_scaling.apply(x);
  const Eigen::VectorXd b = model.basis.eval(xs);
  Eigen::VectorXd h(model.m());
  for (int j = 0; j < model.m(); ++j)
    h[j] = model.experts[static_cast<std::size_t>(j)].dot(b);
  return h;
}

Eigen::VectorXd gate_weights_at(const MoEParams& model, const Eigen::VectorXd& x) {
  return gate_weights(model.gate, model.x_scaling.apply(x));
}

double cond_log_density(const MoEParams& model, const Eigen::VectorXd& x, double y,
                        std::uint64_t* clip_events) {
  if (!model.family.in_support(y))
    throw std::domain_error("response outside family support");
  const Eigen::VectorXd xs = model.x_scaling.apply(x);
  const Eigen::VectorXd b = model.basis.eval(xs);
  Eigen::VectorXd lg(model.m()), lt(model.m());
  gate_log_weights_into(model.gate, xs, lg);
  const double lse = detail::mixture_log_terms(model, b, lg, y, lt, clip_events);
  return lse + model.family.log_base(y);
}

double log_likelihood(const MoEParams& model, const Dataset& data,
                      std::uint64_t* clip_events) {
  const long n = data.n();
  if (n == 0) throw std::invalid_argument("log_likelihood: empty dataset");
  if (data.s() != model.s())
    throw std::invalid_argument("log_likelihood: covariate dimension mismatch");
  Eigen::VectorXd lg(model.m()), lt(model.m()), b(model.basis.dimension());
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd xs = model.x_scaling.apply(data.X.row(i).transpose());
    model.basis.eval_into(xs, b);
    gate_log_weights_into(model.gate, xs, lg);
    acc += detail::mixture_log_terms(model, b, lg, data.Y[i], lt, clip_events);
  }
  const double value = acc / static_cast<double>(n);
  if (!std::isfinite(value)) throw numeric_error("log-likelihood is not finite");
  return value;
}

Eigen::VectorXd responsibilities(const MoEParams& model, const Eigen::VectorXd& x,
                                 double y) {
  const Eigen::VectorXd xs = model.x_scaling.apply(x);
  const Eigen::VectorXd b = model.basis.eval(xs);
  Eigen::VectorXd lg(model.m()), lt(model.m());
  gate_log_weights_into(model.gate, xs, lg);
  const double lse = detail::mixture_log_terms(model, b, lg, y, lt, nullptr);
  return (lt.array() - lse).exp();
}

Eigen::VectorXd loglik_gradient(const MoEParams& model, const Dataset& data) {
  const long n = data.n();
  if (n == 0) throw std::invalid_argument("loglik_gradient: empty dataset");
  const int m = model.m();
  const int sp1 = model.s() + 1;
  const int J = model.basis.dimension();
  const int gate_dim = gate_param_count(m, model.s());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(gate_dim + m * J);

  Eigen::VectorXd lg(m), lt(m), b(J), tau(m), g(m);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd xs = model.x_scaling.apply(data.X.row(i).transpose());
    model.basis.eval_into(xs, b);
    gate_log_weights_into(model.gate, xs, lg);
    const double y = data.Y[i];
    const double lse = detail::mixture_log_terms(model, b, lg, y, lt, nullptr);
    tau = (lt.array() - lse).exp();
    g = lg.array().exp();
    // gate block: (tau_j - g_j) [1, x] for the unpinned experts
    for (int j = 0; j < m - 1; ++j) {
      const double d = tau[j] - g[j];
      grad[j * sp1] += d;
      for (int c = 0; c < model.s(); ++c) grad[j * sp1 + 1 + c] += d * xs[c];
    }
    // expert blocks: tau_j (y da + db)(h_j) basis(x)
    for (int j = 0; j < m; ++j) {
      const double h = model.family.clip(model.experts[static_cast<std::size_t>(j)].dot(b));
      const FamilyEval e = model.family.eval(h);
      const double w = tau[j] * (y * e.da + e.db);
      grad.segment(gate_dim + j * J, J) += w * b;
    }
  }
  return grad / static_cast<double>(n);
}

Dataset sample_from_model(const MoEParams& model, const XSampler& x_sampler,
                          long n, std::mt19937_64& rng) {
  Dataset out;
  out.X.resize(n, model.s());
  out.Y.resize(n);
  Eigen::VectorXd lg(model.m());
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd x = x_sampler(rng);
    const Eigen::VectorXd xs = model.x_scaling.apply(x);
    gate_log_weights_into(model.gate, xs, lg);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double cum = 0.0;
    int pick = model.m() - 1;
    for (int j = 0; j < model.m(); ++j) {
      cum += std::exp(lg[j]);
      if (u <= cum) {
        pick = j;
        break;
      }
    }
    const Eigen::VectorXd b = model.basis.eval(xs);
    const double h = model.experts[static_cast<std::size_t>(pick)].dot(b);
    out.X.row(i) = x.transpose();
    out.Y[i] = model.family.sample(model.family.clip(h), rng);
  }
  return out;
}

}  // namespace polymoe
