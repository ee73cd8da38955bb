#pragma once

#include <string>
#include <utility>
#include <vector>

namespace polymoe {

// Convention for the gate parameter count v_m: the comparison tables use
// v_m = m*s; the fitted logistic gate has (m-1)(s+1) free parameters.
enum class VFormula { m_times_s, logistic };

const char* v_formula_name(VFormula v);
VFormula parse_v_formula(const std::string& name);

// U(m, xi) = m^{-2 (xi ^ alpha)/s} + m xi^s / n, xi = k+1. alpha may be +inf.
double u_bound(double m, double xi, double alpha, int s, double n);

// Minimizer of U under m xi^s = C: xi_o = min(alpha, C^{1/s}/e).
double optimal_xi(double C, double alpha, int s);

// m_o = max(e^s, C/alpha^s); requires finite alpha.
double optimal_m(double C, double alpha, int s);

// 2 min(alpha, k+1) / s, the approximation-rate exponent in m.
double rate_exponent(double alpha, int k, int s);

long long v_param_count(long long m, int s, VFormula v);
long long param_count(long long m, int k, int s, VFormula v);

struct TableRow {
  int k = 0;
  long long m = 0;
  double approx = 0.0;    // m^{-2(k+1)/s}
  long long params = 0;   // m J_k + v_m
  std::string note;
};

struct PlanTable {
  std::vector<TableRow> rows;
  int best_index = -1;  // argmin approx (table 1) / argmin params (table 2)
};

// Rows (k, m) with m chosen so that the parameter count stays near `budget`:
// m = round(budget / (J_k + v-per-expert)).
std::vector<std::pair<int, long long>> budget_rows(double alpha, int s,
                                                   double budget, VFormula v);

// Approximation error across the given (k, m) rows at a fixed budget.
PlanTable table_fixed_estimation(double alpha, int s,
                                 const std::vector<std::pair<int, long long>>& rows,
                                 VFormula v = VFormula::m_times_s);

// For each k, the m closest to solving m^{-2(k+1)/s} = target_approx, with
// the resulting approximation error and parameter count.
PlanTable table_fixed_approx(double alpha, int s, double target_approx,
                             VFormula v = VFormula::m_times_s);

struct NearParametricPlan {
  double m = 2;    // constant in n
  double xi = 0;   // ceil(s ln n)
};

// Part-III style plan for alpha = inf targets.
NearParametricPlan near_parametric_plan(int s, double n);

struct RoundedCandidate {
  long long m = 0;
  int k = 0;  // round(xi) - 1, floored at 0
  double xi = 0.0;
  double u = 0.0;  // requires n; NaN when n is absent
};

struct PlanReport {
  double budget = 0.0;
  double alpha = 0.0;
  int s = 1;
  double n = 0.0;  // 0 => not provided
  VFormula v = VFormula::m_times_s;
  double xi_opt = 0.0;
  double m_opt = 0.0;  // real-valued; integer neighbors live in candidates
  std::vector<RoundedCandidate> candidates;
  bool near_parametric = false;
  NearParametricPlan near_plan;
};

PlanReport make_plan(double budget, double alpha, int s, double n, VFormula v);

}  // namespace polymoe
