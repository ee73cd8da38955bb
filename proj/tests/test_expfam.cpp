#include <doctest.h>

#include <cmath>

#include "polymoe/expfam.hpp"
#include "polymoe/rng.hpp"
#include "support/oracles.hpp"

using polymoe::ExpFamily;
using polymoe::FamilyEval;

namespace {

std::vector<ExpFamily> all_families() {
  return {ExpFamily::poisson(), ExpFamily::bernoulli(), ExpFamily::gaussian(1.0),
          ExpFamily::gaussian(4.0), ExpFamily::exponential(), ExpFamily::binomial(10)};
}

std::vector<double> grid_for(const ExpFamily& fam) {
  if (fam.kind() == polymoe::FamilyKind::exponential)
    return {-4.0, -2.0, -1.0, -0.5, -0.1};
  return {-3.0, -1.5, -0.5, 0.0, 0.7, 2.0, 3.0};
}

}  // namespace

TEST_SUITE("expfam") {

TEST_CASE("canonical evaluations at fixed points") {
  const auto p = ExpFamily::poisson().eval(0.0);
  CHECK(p.a == doctest::Approx(0.0));
  CHECK(p.b == doctest::Approx(-1.0));
  CHECK(p.da == doctest::Approx(1.0));
  CHECK(p.db == doctest::Approx(-1.0));
  CHECK(p.dda == doctest::Approx(0.0));
  CHECK(p.ddb == doctest::Approx(-1.0));

  const auto b = ExpFamily::bernoulli().eval(0.0);
  CHECK(b.a == doctest::Approx(0.0));
  CHECK(b.b == doctest::Approx(-std::log(2.0)));
  CHECK(b.db == doctest::Approx(-0.5));
  CHECK(b.ddb == doctest::Approx(-0.25));

  const auto g = ExpFamily::gaussian(1.0).eval(2.0);
  CHECK(g.a == doctest::Approx(2.0));
  CHECK(g.b == doctest::Approx(-2.0));
  CHECK(g.da == doctest::Approx(1.0));
  CHECK(g.db == doctest::Approx(-2.0));
  CHECK(g.dda == doctest::Approx(0.0));
  CHECK(g.ddb == doctest::Approx(-1.0));
}

TEST_CASE("derivatives match central differences on a grid") {
  for (const auto& fam : all_families()) {
    CAPTURE(fam.name());
    for (double h : grid_for(fam)) {
      const FamilyEval e = fam.eval(h);
      const double da = oracles::numeric_derivative(
          [&](double t) { return fam.eval(t).a; }, h);
      const double db = oracles::numeric_derivative(
          [&](double t) { return fam.eval(t).b; }, h);
      const double dda = oracles::numeric_derivative(
          [&](double t) { return fam.eval(t).da; }, h);
      const double ddb = oracles::numeric_derivative(
          [&](double t) { return fam.eval(t).db; }, h);
      CHECK(std::abs(e.da - da) <= 1e-6 * std::max(1.0, std::abs(e.da)));
      CHECK(std::abs(e.db - db) <= 1e-6 * std::max(1.0, std::abs(e.db)));
      CHECK(std::abs(e.dda - dda) <= 1e-5 * std::max(1.0, std::abs(e.dda)));
      CHECK(std::abs(e.ddb - ddb) <= 1e-5 * std::max(1.0, std::abs(e.ddb)));
    }
  }
}

TEST_CASE("mean and variance agree with the named distributions") {
  CHECK(ExpFamily::poisson().mean(0.0) == doctest::Approx(1.0));
  CHECK(ExpFamily::poisson().mean(1.0) == doctest::Approx(std::exp(1.0)));
  CHECK(ExpFamily::bernoulli().mean(0.0) == doctest::Approx(0.5));
  CHECK(ExpFamily::poisson().variance(0.0) == doctest::Approx(1.0));
  CHECK(ExpFamily::bernoulli().variance(0.0) == doctest::Approx(0.25));
  for (double h : {-2.0, 0.0, 1.5})
    CHECK(ExpFamily::gaussian(4.0).variance(h) == doctest::Approx(4.0));

  // phi = -b'/a' also by numeric differentiation of b
  for (const auto& fam : all_families()) {
    for (double h : grid_for(fam)) {
      const double db = oracles::numeric_derivative(
          [&](double t) { return fam.eval(t).b; }, h);
      CHECK(fam.mean(h) == doctest::Approx(-db).epsilon(1e-6));
    }
  }

  // closed forms per family
  const auto pois = ExpFamily::poisson();
  for (double h : grid_for(pois)) {
    CHECK(pois.mean(h) == doctest::Approx(std::exp(h)));
    CHECK(pois.variance(h) == doctest::Approx(std::exp(h)));
  }
  const auto expo = ExpFamily::exponential();
  for (double h : grid_for(expo)) {
    CHECK(expo.mean(h) == doctest::Approx(-1.0 / h));
    CHECK(expo.variance(h) == doctest::Approx(1.0 / (h * h)));
  }
  const auto bin = ExpFamily::binomial(10);
  for (double h : grid_for(bin)) {
    const double p = 1.0 / (1.0 + std::exp(-h));
    CHECK(bin.mean(h) == doctest::Approx(10.0 * p));
    CHECK(bin.variance(h) == doctest::Approx(10.0 * p * (1.0 - p)));
  }
}

TEST_CASE("log densities at fixed points") {
  CHECK(ExpFamily::poisson().log_density(0.0, 0.0) == doctest::Approx(-1.0));
  CHECK(ExpFamily::bernoulli().log_density(1.0, 0.0) ==
        doctest::Approx(-std::log(2.0)));
}

TEST_CASE("discrete densities normalize over the truncated support") {
  const auto pois = ExpFamily::poisson();
  for (double h : {-1.0, 0.0, 0.5, 1.5}) {
    double sum = 0.0;
    for (int y = 0; y <= 60; ++y)
      sum += std::exp(pois.log_density(static_cast<double>(y), h));
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
  const auto bern = ExpFamily::bernoulli();
  for (double h : {-2.0, 0.0, 2.0})
    CHECK(std::exp(bern.log_density(0.0, h)) + std::exp(bern.log_density(1.0, h)) ==
          doctest::Approx(1.0).epsilon(1e-12));
  const auto bin = ExpFamily::binomial(10);
  for (double h : {-1.0, 0.0, 1.0}) {
    double sum = 0.0;
    for (int y = 0; y <= 10; ++y)
      sum += std::exp(bin.log_density(static_cast<double>(y), h));
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
}

TEST_CASE("continuous densities integrate to one") {
  const auto gauss = ExpFamily::gaussian(2.0);
  const double ig = oracles::simpson(
      [&](double y) { return std::exp(gauss.log_density(y, 0.75)); }, -20.0, 20.0,
      4000);
  CHECK(ig == doctest::Approx(1.0).epsilon(1e-8));
  const auto expo = ExpFamily::exponential();
  const double ie = oracles::simpson(
      [&](double y) { return std::exp(expo.log_density(y, -2.0)); }, 0.0, 30.0, 4000);
  CHECK(ie == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sampling matches first moments") {
  auto rng = polymoe::make_rng(17);
  const long n = 1000000;

  const auto pois = ExpFamily::poisson();
  double acc = 0.0;
  for (long i = 0; i < n; ++i) acc += pois.sample(0.0, rng);
  CHECK(std::abs(acc / n - 1.0) <= 0.005);  // 3 sigma / sqrt(n) with sigma = 1

  const auto bern = ExpFamily::bernoulli();
  for (int i = 0; i < 1000; ++i) {
    const double y = bern.sample(0.3, rng);
    CHECK((y == 0.0 || y == 1.0));
  }

  const auto gauss = ExpFamily::gaussian(1.0);
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double y = gauss.sample(0.7, rng);
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(var - 1.0) <= 0.01);
}

TEST_CASE("clip counts events and respects bounds") {
  const auto pois = ExpFamily::poisson();
  std::uint64_t events = 0;
  CHECK(pois.clip(31.0, &events) == doctest::Approx(30.0));
  CHECK(pois.clip(-31.0, &events) == doctest::Approx(-30.0));
  CHECK(pois.clip(0.5, &events) == doctest::Approx(0.5));
  CHECK(events == 2);
  CHECK_THROWS_AS(pois.clip(std::nan("")), std::domain_error);

  const auto expo = ExpFamily::exponential();
  CHECK(expo.clip(0.0) == doctest::Approx(-1e-6));
}

TEST_CASE("support checks and errors") {
  CHECK_THROWS_AS(ExpFamily::poisson().log_density(-1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(ExpFamily::poisson().log_density(2.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(ExpFamily::bernoulli().log_density(2.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(ExpFamily::binomial(5).log_density(6.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(ExpFamily::exponential().log_density(-0.1, -1.0), std::domain_error);
  CHECK(ExpFamily::gaussian(1.0).in_support(-3.25));
}

TEST_CASE("name round-trips through parse") {
  for (const auto& fam : all_families()) {
    const auto back = ExpFamily::parse(fam.name());
    CHECK(back.name() == fam.name());
  }
  CHECK(ExpFamily::parse("gaussian:sigma2=2.5").sigma2() == doctest::Approx(2.5));
  CHECK(ExpFamily::parse("binomial:n=12").trials() == 12);
  CHECK_THROWS_AS(ExpFamily::parse("weibull"), std::invalid_argument);
}

TEST_CASE("mean_to_natural inverts the mean map") {
  for (const auto& fam : all_families()) {
    for (double h : grid_for(fam)) {
      const double mu = fam.mean(h);
      CHECK(fam.mean(fam.mean_to_natural(mu)) == doctest::Approx(mu).epsilon(1e-9));
    }
  }
}

}  // TEST_SUITE
