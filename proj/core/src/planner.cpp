#include "polymoe/planner.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "polymoe/polybasis.hpp"

namespace polymoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reference values from the published comparison tables (alpha = 6, s = 5);
// rows whose computed values differ get a note.
struct Reference {
  int k;
  long long m;
  double approx;
  long long params;
};
constexpr Reference kReferenceFixedEstimation[] = {
    {0, 214, 0.1169, 1284}, {1, 117, 0.0221, 1287}, {2, 49, 0.0094, 1274},
    {3, 21, 0.0077, 1271},  {4, 10, 0.0100, 1310},  {5, 5, 0.0210, 1285},
};
constexpr Reference kReferenceFixedApprox[] = {
    {0, 100000, 0.0100, 600000}, {1, 316, 0.0100, 3476}, {2, 46, 0.0101, 1196},
    {3, 18, 0.0098, 1098},       {4, 10, 0.0100, 1310},  {5, 7, 0.0099, 1799},
};

double round4(double v) { return std::round(v * 1e4) / 1e4; }

void annotate(TableRow& row, const Reference* ref, std::size_t n_ref) {
  for (std::size_t i = 0; i < n_ref; ++i) {
    if (ref[i].k != row.k || ref[i].m != row.m) continue;
    std::string note;
    if (round4(row.approx) != ref[i].approx) {
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "computed approx %.4f; published table shows %.4f", row.approx,
                    ref[i].approx);
      note = buf;
    }
    if (row.params != ref[i].params) {
      if (!note.empty()) note += "; ";
      note += "computed params " + std::to_string(row.params) +
              "; published table shows " + std::to_string(ref[i].params);
    }
    row.note = note;
    return;
  }
}

}  // namespace

const char* v_formula_name(VFormula v) {
  return v == VFormula::m_times_s ? "ms" : "logistic";
}

VFormula parse_v_formula(const std::string& name) {
  if (name == "ms") return VFormula::m_times_s;
  if (name == "logistic") return VFormula::logistic;
  throw std::invalid_argument("v-formula must be 'ms' or 'logistic'");
}

double u_bound(double m, double xi, double alpha, int s, double n) {
  if (!(m > 0.0) || !(xi > 0.0) || !(n > 0.0) || s < 1)
    throw std::invalid_argument("u_bound: m, xi, n must be positive and s >= 1");
  const double t = std::min(xi, alpha);
  return std::pow(m, -2.0 * t / s) + m * std::pow(xi, s) / n;
}

double optimal_xi(double C, double alpha, int s) {
  if (!(C > 0.0)) throw std::invalid_argument("optimal_xi: C must be positive");
  const double interior = std::pow(C, 1.0 / s) / std::exp(1.0);
  return std::min(alpha, interior);
}

double optimal_m(double C, double alpha, int s) {
  if (!(C > 0.0)) throw std::invalid_argument("optimal_m: C must be positive");
  if (std::isinf(alpha))
    throw std::invalid_argument("optimal_m: needs finite alpha; use the near-parametric plan");
  return std::max(std::exp(static_cast<double>(s)), C / std::pow(alpha, s));
}

double rate_exponent(double alpha, int k, int s) {
  return 2.0 * std::min(alpha, static_cast<double>(k + 1)) / s;
}

long long v_param_count(long long m, int s, VFormula v) {
  return v == VFormula::m_times_s ? m * s : (m - 1) * (s + 1);
}

long long param_count(long long m, int k, int s, VFormula v) {
  return m * PolyBasis::dimension(s, k) + v_param_count(m, s, v);
}

std::vector<std::pair<int, long long>> budget_rows(double alpha, int s,
                                                   double budget, VFormula v) {
  std::vector<std::pair<int, long long>> rows;
  const int k_max =
      std::isinf(alpha) ? 5 : std::max(0, static_cast<int>(std::ceil(alpha)) - 1);
  for (int k = 0; k <= k_max; ++k) {
    const double jk = static_cast<double>(PolyBasis::dimension(s, k));
    long long m;
    if (v == VFormula::m_times_s) {
      m = std::llround(budget / (jk + s));
    } else {
      m = std::llround((budget + s + 1) / (jk + s + 1));
    }
    rows.emplace_back(k, std::max<long long>(1, m));
  }
  return rows;
}

PlanTable table_fixed_estimation(double alpha, int s,
                                 const std::vector<std::pair<int, long long>>& rows,
                                 VFormula v) {
  PlanTable t;
  double best = kInf;
  for (const auto& [k, m] : rows) {
    TableRow row;
    row.k = k;
    row.m = m;
    row.approx = std::pow(static_cast<double>(m), -2.0 * (k + 1) / s);
    row.params = param_count(m, k, s, v);
    annotate(row, kReferenceFixedEstimation, std::size(kReferenceFixedEstimation));
    if (row.approx < best) {
      best = row.approx;
      t.best_index = static_cast<int>(t.rows.size());
    }
    t.rows.push_back(std::move(row));
  }
  if (t.best_index >= 0) {
    auto& note = t.rows[static_cast<std::size_t>(t.best_index)].note;
    if (!note.empty()) note += "; ";
    note += "smallest approximation error";
  }
  return t;
}

PlanTable table_fixed_approx(double alpha, int s, double target_approx, VFormula v) {
  if (!(target_approx > 0.0) || !(target_approx < 1.0))
    throw std::invalid_argument("table_fixed_approx: target must be in (0,1)");
  PlanTable t;
  const int k_max =
      std::isinf(alpha) ? 5 : std::max(0, static_cast<int>(std::ceil(alpha)) - 1);
  long long best = std::numeric_limits<long long>::max();
  for (int k = 0; k <= k_max; ++k) {
    TableRow row;
    row.k = k;
    // nearest integer to the exact solution of m^{-2(k+1)/s} = target
    const double exact = std::pow(target_approx, -0.5 * s / (k + 1));
    row.m = std::max<long long>(1, std::llround(exact));
    row.approx = std::pow(static_cast<double>(row.m), -2.0 * (k + 1) / s);
    row.params = param_count(row.m, k, s, v);
    annotate(row, kReferenceFixedApprox, std::size(kReferenceFixedApprox));
    if (row.params < best) {
      best = row.params;
      t.best_index = static_cast<int>(t.rows.size());
    }
    t.rows.push_back(std::move(row));
  }
  if (t.best_index >= 0) {
    auto& note = t.rows[static_cast<std::size_t>(t.best_index)].note;
    if (!note.empty()) note += "; ";
    note += "smallest parameter count";
  }
  return t;
}

NearParametricPlan near_parametric_plan(int s, double n) {
  if (n < 3.0) throw std::invalid_argument("near_parametric_plan: n must be >= 3");
  NearParametricPlan p;
  p.m = 2.0;
  p.xi = std::ceil(s * std::log(n));
  return p;
}

PlanReport make_plan(double budget, double alpha, int s, double n, VFormula v) {
  PlanReport report;
  report.budget = budget;
  report.alpha = alpha;
  report.s = s;
  report.n = n;
  report.v = v;
  report.xi_opt = optimal_xi(budget, alpha, s);
  report.m_opt = std::isinf(alpha) ? std::exp(static_cast<double>(s))
                                   : optimal_m(budget, alpha, s);

  // integerized neighbors of the real-valued optimum
  for (double xi : {std::floor(report.xi_opt), std::ceil(report.xi_opt)}) {
    if (xi < 1.0) xi = 1.0;
    RoundedCandidate c;
    c.xi = xi;
    c.k = static_cast<int>(xi) - 1;
    c.m = std::max<long long>(1, std::llround(budget / std::pow(xi, s)));
    c.u = n > 0.0 ? u_bound(static_cast<double>(c.m), xi, alpha, s, n)
                  : std::numeric_limits<double>::quiet_NaN();
    if (!report.candidates.empty() && report.candidates.back().xi == xi) continue;
    report.candidates.push_back(c);
  }

  if (std::isinf(alpha) && n >= 3.0) {
    report.near_parametric = true;
    report.near_plan = near_parametric_plan(s, n);
  }
  return report;
}

}  // namespace polymoe
