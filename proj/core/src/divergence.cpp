#include "polymoe/divergence.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "polymoe/errors.hpp"
#include "polymoe/rng.hpp"
#include "polymoe/threading.hpp"

namespace polymoe {

namespace {

constexpr long kChunk = 4096;              // fixed MC chunk, thread-independent
constexpr double kTruncMass = 1e-12;       // inner-sum tail mass
constexpr long kMaxTruncTerms = 10000;     // else fall back to Monte Carlo
constexpr std::uint64_t kUpperMcSeed = 0x75d1;

void check_pair(const TargetSpec& target, const MoEParams& model) {
  if (target.family.name() != model.family.name())
    throw std::invalid_argument("divergence: target and model families differ");
  if (target.s != model.s())
    throw std::invalid_argument("divergence: covariate dimensions differ");
}

// log f(y|x) without the c(y) term: log sum_j g_j exp(y a(h_j) + b(h_j)).
double model_log_kernel(const MoEParams& model, const Eigen::VectorXd& x, double y) {
  const Eigen::VectorXd xs = model.x_scaling.apply(x);
  const Eigen::VectorXd b = model.basis.eval(xs);
  Eigen::VectorXd lg(model.m()), lt(model.m());
  gate_log_weights_into(model.gate, xs, lg);
  return detail::mixture_log_terms(model, b, lg, y, lt, nullptr);
}

// Accumulates mean and standard error over per-draw values in fixed chunk
// order; chunks may be produced in parallel.
struct ChunkStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  long count = 0;
};

DivergenceEstimate combine(const std::vector<ChunkStats>& stats, EstimateMethod method) {
  double sum = 0.0, sum_sq = 0.0;
  long count = 0;
  for (const auto& c : stats) {  // index order: identical for any thread count
    sum += c.sum;
    sum_sq += c.sum_sq;
    count += c.count;
  }
  DivergenceEstimate e;
  e.method = method;
  e.n_mc = count;
  e.value = sum / static_cast<double>(count);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(count) - e.value * e.value);
  e.std_error = std::sqrt(var / static_cast<double>(count));
  return e;
}

// Per-x truncated support for the target's conditional; discrete families.
long truncation_terms(const TargetSpec& target) {
  const double h_hi = target.family.clip(target.sup_h);
  return static_cast<long>(target.family.support_quantile(h_hi, kTruncMass)) + 1;
}

bool want_truncated(const TargetSpec& target) {
  return target.family.discrete() && truncation_terms(target) <= kMaxTruncTerms;
}

}  // namespace

const char* method_name(EstimateMethod m) {
  switch (m) {
    case EstimateMethod::monte_carlo: return "monte_carlo";
    case EstimateMethod::quadrature: return "quadrature";
    case EstimateMethod::truncated_sum: return "truncated_sum";
  }
  return "";
}

DivergenceEstimate kl_mc(const TargetSpec& target, const MoEParams& model,
                         long n_mc, std::uint64_t seed) {
  return kl_mc(target, model, n_mc, seed,
               want_truncated(target) ? EstimateMethod::truncated_sum
                                      : EstimateMethod::monte_carlo);
}

DivergenceEstimate kl_mc(const TargetSpec& target, const MoEParams& model,
                         long n_mc, std::uint64_t seed, EstimateMethod method) {
  check_pair(target, model);
  if (n_mc < 100) throw std::invalid_argument("kl_mc: n_mc must be >= 100");
  if (method == EstimateMethod::quadrature)
    throw std::invalid_argument("kl_mc: quadrature is not a kl_mc method");
  if (method == EstimateMethod::truncated_sum && !target.family.discrete())
    throw std::invalid_argument("kl_mc: truncated_sum needs a discrete family");

  const long n_chunks = (n_mc + kChunk - 1) / kChunk;
  std::vector<ChunkStats> stats(static_cast<std::size_t>(n_chunks));

  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
    auto rng = make_rng(seed, {stream::mc_chunk, static_cast<std::uint64_t>(c)});
    const long lo = static_cast<long>(c) * kChunk;
    const long hi = std::min(n_mc, lo + kChunk);
    ChunkStats st;
    for (long i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = target.px.sample(rng);
      const double ht = target.natural(x);
      const FamilyEval te = target.family.eval(ht);
      double v;
      if (method == EstimateMethod::truncated_sum) {
        // exact inner sum over y; c(y) enters the weights, not the log ratio
        const long terms =
            static_cast<long>(target.family.support_quantile(ht, kTruncMass)) + 1;
        double acc = 0.0;
        for (long yy = 0; yy < terms; ++yy) {
          const double y = static_cast<double>(yy);
          const double logp_kernel = y * te.a + te.b;
          const double logp = logp_kernel + target.family.log_base(y);
          const double logf_kernel = model_log_kernel(model, x, y);
          acc += std::exp(logp) * (logp_kernel - logf_kernel);
        }
        v = acc;
      } else {
        const double y = target.family.sample(ht, rng);
        v = (y * te.a + te.b) - model_log_kernel(model, x, y);
      }
      st.sum += v;
      st.sum_sq += v * v;
      ++st.count;
    }
    stats[c] = st;
  });
  return combine(stats, method);
}

DivergenceEstimate upper_divergence(const TargetSpec& target, const MoEParams& model,
                                    int n_quad) {
  check_pair(target, model);
  const int s = target.s;
  DivergenceEstimate e;
  auto integrand = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = gate_weights_at(model, x);
    const Eigen::VectorXd h = expert_naturals(model, x);
    const double ht = target.h(x);
    double acc = 0.0;
    for (int j = 0; j < model.m(); ++j) acc += g[j] * (h[j] - ht) * (h[j] - ht);
    return acc;
  };

  if (s <= 2) {
    // tensor midpoint rule over [-1,1]^s against p_x
    const double w = 2.0 / n_quad;
    double acc = 0.0;
    Eigen::VectorXd x(s);
    if (s == 1) {
      for (int i = 0; i < n_quad; ++i) {
        x[0] = -1.0 + (i + 0.5) * w;
        acc += integrand(x) * target.px.density(x) * w;
      }
    } else {
      for (int i = 0; i < n_quad; ++i) {
        x[0] = -1.0 + (i + 0.5) * w;
        for (int j = 0; j < n_quad; ++j) {
          x[1] = -1.0 + (j + 0.5) * w;
          acc += integrand(x) * target.px.density(x) * w * w;
        }
      }
    }
    e.value = acc;
    e.method = EstimateMethod::quadrature;
    e.std_error = 0.0;
    e.n_mc = 0;
    return e;
  }

  const long n = std::max<long>(n_quad, 10000);
  auto rng = make_rng(kUpperMcSeed);
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double v = integrand(target.px.sample(rng));
    sum += v;
    sum_sq += v * v;
  }
  e.value = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - e.value * e.value);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  e.n_mc = n;
  e.method = EstimateMethod::monte_carlo;
  return e;
}

double m_infty(const TargetSpec& target, int n_grid) {
  const int s = target.s;
  auto local = [&](const Eigen::VectorXd& x) {
    const double ht = target.natural(x);
    const FamilyEval e = target.family.eval(ht);
    const double phi = -e.db / e.da;
    return 0.5 * (std::abs(phi) * std::abs(e.dda) + std::abs(e.ddb));
  };
  double mx = 0.0;
  Eigen::VectorXd x(s);
  if (s == 1) {
    for (int i = 0; i < n_grid; ++i) {
      x[0] = -1.0 + 2.0 * i / (n_grid - 1.0);
      mx = std::max(mx, local(x));
    }
  } else if (s == 2) {
    for (int i = 0; i < n_grid; ++i) {
      x[0] = -1.0 + 2.0 * i / (n_grid - 1.0);
      for (int j = 0; j < n_grid; ++j) {
        x[1] = -1.0 + 2.0 * j / (n_grid - 1.0);
        mx = std::max(mx, local(x));
      }
    }
  } else {
    auto rng = make_rng(kUpperMcSeed, {1});
    const long n = std::max<long>(10000, n_grid);
    for (long i = 0; i < n; ++i) mx = std::max(mx, local(target.px.sample(rng)));
  }
  return mx;
}

HellingerEstimate hellinger_mc(const TargetSpec& target, const MoEParams& model,
                               long n_mc, std::uint64_t seed) {
  return hellinger_mc(target, model, n_mc, seed,
                      want_truncated(target) ? EstimateMethod::truncated_sum
                                             : EstimateMethod::monte_carlo);
}

HellingerEstimate hellinger_mc(const TargetSpec& target, const MoEParams& model,
                               long n_mc, std::uint64_t seed, EstimateMethod method) {
  check_pair(target, model);
  if (n_mc < 100) throw std::invalid_argument("hellinger_mc: n_mc must be >= 100");
  if (method == EstimateMethod::truncated_sum && !target.family.discrete())
    throw std::invalid_argument("hellinger_mc: truncated_sum needs a discrete family");

  // affinity E_p[sqrt(f/p)] per draw (MC) or per x (truncated sum)
  const long n_chunks = (n_mc + kChunk - 1) / kChunk;
  std::vector<ChunkStats> stats(static_cast<std::size_t>(n_chunks));
  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
    auto rng = make_rng(seed, {stream::mc_chunk, static_cast<std::uint64_t>(c)});
    const long lo = static_cast<long>(c) * kChunk;
    const long hi = std::min(n_mc, lo + kChunk);
    ChunkStats st;
    for (long i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = target.px.sample(rng);
      const double ht = target.natural(x);
      const FamilyEval te = target.family.eval(ht);
      double v;
      if (method == EstimateMethod::truncated_sum) {
        const long terms =
            static_cast<long>(target.family.support_quantile(ht, kTruncMass)) + 1;
        double acc = 0.0;
        for (long yy = 0; yy < terms; ++yy) {
          const double y = static_cast<double>(yy);
          const double logp_kernel = y * te.a + te.b;
          const double logf_kernel = model_log_kernel(model, x, y);
          const double logc = target.family.log_base(y);
          acc += std::exp(0.5 * (logp_kernel + logf_kernel) + logc);
        }
        v = acc;
      } else {
        const double y = target.family.sample(ht, rng);
        v = std::exp(0.5 * (model_log_kernel(model, x, y) - (y * te.a + te.b)));
      }
      st.sum += v;
      st.sum_sq += v * v;
      ++st.count;
    }
    stats[c] = st;
  });

  const DivergenceEstimate affinity = combine(stats, method);
  HellingerEstimate he;
  he.method = method;
  he.n_mc = affinity.n_mc;
  he.dh2 = 1.0 - affinity.value;
  he.dh2_se = affinity.std_error;
  if (he.dh2 < 0.0) {
    he.dh2 = 0.0;
    he.clamped = true;
  }
  he.dh = std::sqrt(he.dh2);
  return he;
}

namespace {

// Largest log density ratio log p - log f over an (x, y) grid; the y grid is
// the truncated support for discrete families, a wide quantile band else.
double log_ratio_max(const TargetSpec& target, const MoEParams& model) {
  const int s = target.s;
  const int nx = s == 1 ? 201 : 33;
  std::vector<Eigen::VectorXd> xs;
  Eigen::VectorXd x(s);
  if (s == 1) {
    for (int i = 0; i < nx; ++i) {
      x[0] = -1.0 + 2.0 * i / (nx - 1.0);
      xs.push_back(x);
    }
  } else if (s == 2) {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nx; ++j) {
        x[0] = -1.0 + 2.0 * i / (nx - 1.0);
        x[1] = -1.0 + 2.0 * j / (nx - 1.0);
        xs.push_back(x);
      }
  } else {
    auto rng = make_rng(kUpperMcSeed, {2});
    for (int i = 0; i < 4096; ++i) xs.push_back(target.px.sample(rng));
  }

  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& xi : xs) {
    const double ht = target.natural(xi);
    const FamilyEval te = target.family.eval(ht);
    std::vector<double> ys;
    if (target.family.discrete()) {
      const long terms =
          static_cast<long>(target.family.support_quantile(ht, 1e-9)) + 1;
      for (long yy = 0; yy < terms; ++yy) ys.push_back(static_cast<double>(yy));
    } else if (target.family.kind() == FamilyKind::gaussian) {
      const double mu = target.family.mean(ht);
      const double sd = std::sqrt(target.family.sigma2());
      for (int i = 0; i < 129; ++i) ys.push_back(mu - 8.0 * sd + i * sd / 8.0);
    } else {  // exponential
      const double mu = target.family.mean(ht);
      for (int i = 1; i <= 129; ++i) ys.push_back(20.0 * mu * i / 129.0);
    }
    for (double y : ys) {
      const double lp = y * te.a + te.b;
      const double lf = model_log_kernel(model, xi, y);
      mx = std::max(mx, lp - lf);
    }
  }
  return mx;
}

}  // namespace

SandwichReport sandwich_report(const TargetSpec& target, const MoEParams& model,
                               long n_mc, std::uint64_t seed) {
  check_pair(target, model);
  SandwichReport r;
  r.kl = kl_mc(target, model, n_mc, derive_seed(seed, {11}));
  r.hellinger = hellinger_mc(target, model, n_mc, derive_seed(seed, {13}));
  r.upper = upper_divergence(target, model, 400);
  r.m_inf = m_infty(target, 200);

  // curvature over the segments between target and expert naturals; a
  // target-only evaluation understates the Taylor remainder at finite
  // separations
  {
    const int s = target.s;
    const int nx = s == 1 ? 201 : 33;
    double mx = 0.0;
    auto scan = [&](const Eigen::VectorXd& x) {
      const double ht = target.natural(x);
      const double phi = target.family.mean(ht);
      const Eigen::VectorXd hj = expert_naturals(model, x);
      for (int j = 0; j < model.m(); ++j) {
        const double hf = target.family.clip(hj[j]);
        for (int q = 0; q <= 8; ++q) {
          const double xi = ht + (hf - ht) * q / 8.0;
          const FamilyEval e = target.family.eval(xi);
          mx = std::max(mx, 0.5 * (std::abs(phi) * std::abs(e.dda) + std::abs(e.ddb)));
        }
      }
    };
    Eigen::VectorXd x(s);
    if (s == 1) {
      for (int i = 0; i < nx; ++i) {
        x[0] = -1.0 + 2.0 * i / (nx - 1.0);
        scan(x);
      }
    } else if (s == 2) {
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nx; ++j) {
          x[0] = -1.0 + 2.0 * i / (nx - 1.0);
          x[1] = -1.0 + 2.0 * j / (nx - 1.0);
          scan(x);
        }
    } else {
      auto rng = make_rng(kUpperMcSeed, {3});
      for (int i = 0; i < 4096; ++i) scan(target.px.sample(rng));
    }
    r.m_inf_segment = mx;
  }

  const double lr_max = log_ratio_max(target, model);
  r.cs2 = std::exp(lr_max);
  r.ratio_bounded = r.cs2 <= 1e12;

  // KL <= 1.05 * curvature * D within 3 combined SEs (grid max inflated 5%)
  {
    const double bound = 1.05 * r.m_inf_segment * r.upper.value;
    const double margin =
        3.0 * std::hypot(r.kl.std_error, 1.05 * r.m_inf_segment * r.upper.std_error);
    r.upper_ok = r.kl.value <= bound + margin;
  }

  if (r.ratio_bounded) {
    const double cs = std::sqrt(std::max(r.cs2, 1.0));
    r.kl_upper_factor = 4.0 * (1.0 + std::log(cs));
    const double lower_margin = 3.0 * std::hypot(r.kl.std_error, r.hellinger.dh2_se);
    const bool lower_ok = r.hellinger.dh2 <= r.kl.value + lower_margin;
    const double upper_margin =
        3.0 * std::hypot(r.kl.std_error, r.kl_upper_factor * r.hellinger.dh2_se);
    const bool upper_ok =
        r.kl.value <= r.kl_upper_factor * r.hellinger.dh2 + upper_margin;
    r.hellinger_ok = lower_ok && upper_ok;
  }
  return r;
}

}  // namespace polymoe
