#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace polymoe {

enum class FamilyKind { poisson, bernoulli, gaussian, exponential, binomial };

struct FamilyEval {
  double a, b;      // a(h), b(h)
  double da, db;    // first derivatives
  double dda, ddb;  // second derivatives
};

// One-parameter exponential family with density exp{y*a(h) + b(h) + c(y)} in
// the canonical parameterization a(h) = h. The natural argument is clipped to
// a family-specific safe interval before any evaluation; callers that need to
// know pass a counter.
class ExpFamily {
 public:
  ExpFamily() : ExpFamily(FamilyKind::poisson, 1.0, 0) {}

  static ExpFamily poisson();
  static ExpFamily bernoulli();
  static ExpFamily gaussian(double sigma2);
  static ExpFamily exponential();
  static ExpFamily binomial(int trials);

  // Accepts "poisson", "bernoulli", "exponential", "gaussian:sigma2=<v>",
  // "binomial:n=<k>". name() round-trips through parse().
  static ExpFamily parse(const std::string& name);
  std::string name() const;

  FamilyKind kind() const { return kind_; }
  double sigma2() const { return sigma2_; }
  int trials() const { return trials_; }
  bool discrete() const;

  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  double clip(double h, std::uint64_t* clip_events = nullptr) const;

  // All evaluators clip h internally; non-finite h raises std::domain_error.
  FamilyEval eval(double h) const;
  double mean(double h) const;      // phi(h) = -db/da, the inverse link
  double variance(double h) const;  // (dda*db - ddb*da)/da^3
  double mean_to_natural(double mu) const;

  double log_base(double y) const;  // c(y)
  bool in_support(double y) const;
  double log_density(double y, double h) const;  // y*a(h) + b(h) + c(y)

  double sample(double h, std::mt19937_64& rng) const;

  // Smallest y with P(Y <= y | h) >= 1 - eps; finite only for discrete
  // families (bernoulli: 1, binomial: trials, poisson: scanned).
  double support_quantile(double h, double eps) const;

 private:
  ExpFamily(FamilyKind kind, double sigma2, int trials);

  FamilyKind kind_;
  double sigma2_;  // gaussian dispersion
  int trials_;     // binomial trial count
  double lo_, hi_;
};

}  // namespace polymoe
