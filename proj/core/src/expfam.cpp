#include "polymoe/expfam.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "polymoe/errors.hpp"

namespace polymoe {

namespace {

double logistic(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + e^t) without overflow
double log1pexp(double t) {
  if (t > 36.0) return t;
  return std::log1p(std::exp(t));
}

bool near_integer(double y) { return std::abs(y - std::round(y)) <= 1e-9; }

constexpr double kIntegerTol = 1e-9;

}  // namespace

ExpFamily::ExpFamily(FamilyKind kind, double sigma2, int trials)
    : kind_(kind), sigma2_(sigma2), trials_(trials) {
  switch (kind_) {
    case FamilyKind::poisson:
    case FamilyKind::bernoulli:
    case FamilyKind::binomial:
      lo_ = -30.0;
      hi_ = 30.0;
      break;
    case FamilyKind::exponential:
      lo_ = -1e6;
      hi_ = -1e-6;
      break;
    case FamilyKind::gaussian:
      lo_ = -1e6;
      hi_ = 1e6;
      break;
  }
}

ExpFamily ExpFamily::poisson() { return ExpFamily(FamilyKind::poisson, 1.0, 0); }
ExpFamily ExpFamily::bernoulli() { return ExpFamily(FamilyKind::bernoulli, 1.0, 0); }

ExpFamily ExpFamily::gaussian(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("gaussian family requires sigma2 > 0");
  return ExpFamily(FamilyKind::gaussian, sigma2, 0);
}

ExpFamily ExpFamily::exponential() {
  return ExpFamily(FamilyKind::exponential, 1.0, 0);
}

ExpFamily ExpFamily::binomial(int trials) {
  if (trials < 1) throw std::invalid_argument("binomial family requires n >= 1");
  return ExpFamily(FamilyKind::binomial, 1.0, trials);
}

ExpFamily ExpFamily::parse(const std::string& name) {
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : name.substr(colon + 1);
  if (head == "poisson") return poisson();
  if (head == "bernoulli") return bernoulli();
  if (head == "exponential") return exponential();
  if (head == "gaussian") {
    if (tail.empty()) return gaussian(1.0);
    if (tail.rfind("sigma2=", 0) != 0)
      throw std::invalid_argument("gaussian family syntax: gaussian:sigma2=<v>");
    return gaussian(std::stod(tail.substr(7)));
  }
  if (head == "binomial") {
    if (tail.rfind("n=", 0) != 0)
      throw std::invalid_argument("binomial family syntax: binomial:n=<k>");
    return binomial(std::stoi(tail.substr(2)));
  }
  throw std::invalid_argument("unknown family: " + name);
}

std::string ExpFamily::name() const {
  switch (kind_) {
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::bernoulli: return "bernoulli";
    case FamilyKind::exponential: return "exponential";
    case FamilyKind::gaussian: {
      std::ostringstream os;
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", sigma2_);
      os << "gaussian:sigma2=" << buf;
      return os.str();
    }
    case FamilyKind::binomial: {
      std::ostringstream os;
      os << "binomial:n=" << trials_;
      return os.str();
    }
  }
  return "";
}

bool ExpFamily::discrete() const {
  return kind_ == FamilyKind::poisson || kind_ == FamilyKind::bernoulli ||
         kind_ == FamilyKind::binomial;
}

double ExpFamily::clip(double h, std::uint64_t* clip_events) const {
  if (!std::isfinite(h)) throw std::domain_error("non-finite natural argument");
  if (h < lo_) {
    if (clip_events) ++*clip_events;
    return lo_;
  }
  if (h > hi_) {
    if (clip_events) ++*clip_events;
    return hi_;
  }
  return h;
}

FamilyEval ExpFamily::eval(double h) const {
  h = clip(h);
  FamilyEval e{h, 0.0, 1.0, 0.0, 0.0, 0.0};  // canonical a(h) = h throughout
  switch (kind_) {
    case FamilyKind::poisson: {
      const double eh = std::exp(h);
      e.b = -eh;
      e.db = -eh;
      e.ddb = -eh;
      break;
    }
    case FamilyKind::bernoulli: {
      const double p = logistic(h);
      e.b = -log1pexp(h);
      e.db = -p;
      e.ddb = -p * (1.0 - p);
      break;
    }
    case FamilyKind::gaussian: {
      e.b = -0.5 * sigma2_ * h * h;
      e.db = -sigma2_ * h;
      e.ddb = -sigma2_;
      break;
    }
    case FamilyKind::exponential: {
      e.b = std::log(-h);
      e.db = 1.0 / h;
      e.ddb = -1.0 / (h * h);
      break;
    }
    case FamilyKind::binomial: {
      const double p = logistic(h);
      e.b = -trials_ * log1pexp(h);
      e.db = -trials_ * p;
      e.ddb = -trials_ * p * (1.0 - p);
      break;
    }
  }
  return e;
}

double ExpFamily::mean(double h) const {
  const FamilyEval e = eval(h);
  return -e.db / e.da;
}

double ExpFamily::variance(double h) const {
  const FamilyEval e = eval(h);
  return (e.dda * e.db - e.ddb * e.da) / (e.da * e.da * e.da);
}

double ExpFamily::mean_to_natural(double mu) const {
  switch (kind_) {
    case FamilyKind::poisson:
      return clip(std::log(std::max(mu, 1e-10)));
    case FamilyKind::bernoulli: {
      const double p = std::min(std::max(mu, 1e-9), 1.0 - 1e-9);
      return clip(std::log(p / (1.0 - p)));
    }
    case FamilyKind::gaussian:
      return clip(mu / sigma2_);
    case FamilyKind::exponential:
      return clip(-1.0 / std::max(mu, 1e-10));
    case FamilyKind::binomial: {
      const double p = std::min(std::max(mu / trials_, 1e-9), 1.0 - 1e-9);
      return clip(std::log(p / (1.0 - p)));
    }
  }
  return 0.0;
}

double ExpFamily::log_base(double y) const {
  switch (kind_) {
    case FamilyKind::poisson:
      return -std::lgamma(y + 1.0);
    case FamilyKind::bernoulli:
      return 0.0;
    case FamilyKind::gaussian:
      return -0.5 * y * y / sigma2_ - 0.5 * std::log(2.0 * M_PI * sigma2_);
    case FamilyKind::exponential:
      return 0.0;
    case FamilyKind::binomial:
      return std::lgamma(trials_ + 1.0) - std::lgamma(y + 1.0) -
             std::lgamma(trials_ - y + 1.0);
  }
  return 0.0;
}

bool ExpFamily::in_support(double y) const {
  if (!std::isfinite(y)) return false;
  switch (kind_) {
    case FamilyKind::poisson:
      return y >= -kIntegerTol && near_integer(y);
    case FamilyKind::bernoulli:
      return near_integer(y) && (std::round(y) == 0.0 || std::round(y) == 1.0);
    case FamilyKind::gaussian:
      return true;
    case FamilyKind::exponential:
      return y >= 0.0;
    case FamilyKind::binomial:
      return near_integer(y) && std::round(y) >= 0.0 && std::round(y) <= trials_;
  }
  return false;
}

double ExpFamily::log_density(double y, double h) const {
  if (!in_support(y)) throw std::domain_error("response outside family support");
  const FamilyEval e = eval(h);
  return y * e.a + e.b + log_base(y);
}

double ExpFamily::sample(double h, std::mt19937_64& rng) const {
  h = clip(h);
  switch (kind_) {
    case FamilyKind::poisson: {
      std::poisson_distribution<long> d(std::exp(h));
      return static_cast<double>(d(rng));
    }
    case FamilyKind::bernoulli: {
      std::bernoulli_distribution d(logistic(h));
      return d(rng) ? 1.0 : 0.0;
    }
    case FamilyKind::gaussian: {
      std::normal_distribution<double> d(sigma2_ * h, std::sqrt(sigma2_));
      return d(rng);
    }
    case FamilyKind::exponential: {
      std::exponential_distribution<double> d(-h);
      return d(rng);
    }
    case FamilyKind::binomial: {
      std::binomial_distribution<int> d(trials_, logistic(h));
      return static_cast<double>(d(rng));
    }
  }
  return 0.0;
}

double ExpFamily::support_quantile(double h, double eps) const {
  h = clip(h);
  switch (kind_) {
    case FamilyKind::bernoulli:
      return 1.0;
    case FamilyKind::binomial:
      return static_cast<double>(trials_);
    case FamilyKind::poisson: {
      const double lambda = std::exp(h);
      double logp = -lambda;  // log pmf at 0
      double cum = std::exp(logp);
      double y = 0.0;
      const double cap = 1e7;
      while (cum < 1.0 - eps && y < cap) {
        y += 1.0;
        logp += std::log(lambda) - std::log(y);
        cum += std::exp(logp);
      }
      return y;
    }
    default:
      return std::numeric_limits<double>::infinity();
  }
}

}  // namespace polymoe
