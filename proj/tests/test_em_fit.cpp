#include <doctest.h>

#include <cmath>
#include <random>

#include "polymoe/em_fit.hpp"
#include "polymoe/errors.hpp"
#include "polymoe/rng.hpp"
#include "polymoe/synth.hpp"
#include "support/oracles.hpp"

using namespace polymoe;

namespace {

Dataset grid_dataset_1d(int n, const std::function<double(double)>& mean_to_y) {
  Dataset data;
  data.X.resize(n, 1);
  data.Y.resize(n);
  for (int i = 0; i < n; ++i) {
    data.X(i, 0) = -1.0 + 2.0 * i / (n - 1.0);
    data.Y[i] = mean_to_y(data.X(i, 0));
  }
  return data;
}

MoEParams truth_model(const ExpFamily& family, int m, int s, int k,
                      std::mt19937_64& rng) {
  MoEParams model;
  model.family = family;
  model.basis = PolyBasis(s, k);
  model.gate = GateParams::zeros(m, s);
  model.x_scaling = XScaling::identity(s);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double base = family.kind() == FamilyKind::exponential ? -1.6 : 0.0;
  model.experts.assign(static_cast<std::size_t>(m),
                       Eigen::VectorXd::Zero(model.basis.dimension()));
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < model.basis.dimension(); ++c)
      model.experts[static_cast<std::size_t>(j)][c] = 0.4 * unif(rng);
    model.experts[static_cast<std::size_t>(j)][0] = base + 0.5 * unif(rng);
  }
  for (int r = 0; r < m - 1; ++r)
    for (int c = 0; c <= s; ++c) model.gate.W(r, c) = unif(rng);
  return model;
}

XSampler box_sampler(int s) {
  return [s](std::mt19937_64& r) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd x(s);
    for (int i = 0; i < s; ++i) x[i] = unif(r);
    return x;
  };
}

}  // namespace

TEST_SUITE("em_fit") {

TEST_CASE("single poisson expert recovers the closed-form MLE") {
  const auto target = make_target(TargetKind::polynomial,
                                  std::numeric_limits<double>::infinity(), 1,
                                  ExpFamily::poisson(), [] {
                                    TargetParams p;
                                    p.degree = 0;
                                    p.coeffs = Eigen::VectorXd::Zero(1);
                                    p.coeffs[0] = 0.4;
                                    return p;
                                  }());
  const Dataset data = sample_target(target, 10000, 99);
  FitConfig cfg;
  cfg.m = 1;
  cfg.k = 0;
  cfg.restarts = 1;
  cfg.rescale = false;
  cfg.seed = 7;
  const FitReport report = fit(data, ExpFamily::poisson(), cfg);
  const double closed_form = std::log(data.Y.mean());
  CHECK(report.model.experts[0][0] == doctest::Approx(closed_form).epsilon(1e-7));
  // and within 3 standard errors of the truth: se(log lambda) ~ 1/sqrt(n lambda)
  const double se = 1.0 / std::sqrt(10000.0 * std::exp(0.4));
  CHECK(std::abs(report.model.experts[0][0] - 0.4) <= 3.0 * se);
}

TEST_CASE("gaussian m=1 k=1 equals weighted least squares") {
  auto rng = make_rng(41);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset data = grid_dataset_1d(400, [&](double x) { return 0.7 + 1.3 * x; });
  for (long i = 0; i < data.n(); ++i) data.Y[i] += noise(rng);
  FitConfig cfg;
  cfg.m = 1;
  cfg.k = 1;
  cfg.restarts = 1;
  cfg.rescale = false;
  const FitReport report = fit(data, ExpFamily::gaussian(1.0), cfg);

  Eigen::MatrixXd A(data.n(), 2);
  A.col(0).setOnes();
  A.col(1) = data.X.col(0);
  const Eigen::VectorXd theta =
      oracles::wls_solve(A, data.Y, Eigen::VectorXd::Ones(data.n()));
  CHECK(report.model.experts[0][0] == doctest::Approx(theta[0]).epsilon(1e-6));
  CHECK(report.model.experts[0][1] == doctest::Approx(theta[1]).epsilon(1e-6));
}

TEST_CASE("well-separated bernoulli experts: gate sign and likelihood floor") {
  // left half: p ~ 0.9, right half: p ~ 0.1
  MoEParams truth;
  truth.family = ExpFamily::bernoulli();
  truth.basis = PolyBasis(1, 0);
  truth.gate = GateParams::zeros(2, 1);
  truth.gate.W(0, 0) = 0.0;
  truth.gate.W(0, 1) = -8.0;  // expert 1 active on the left
  truth.x_scaling = XScaling::identity(1);
  truth.experts = {Eigen::VectorXd::Constant(1, 2.2),
                   Eigen::VectorXd::Constant(1, -2.2)};
  auto rng = make_rng(42);
  const Dataset data = sample_from_model(truth, box_sampler(1), 10000, rng);

  FitConfig cfg;
  cfg.m = 2;
  cfg.k = 0;
  cfg.restarts = 3;
  cfg.rescale = false;
  cfg.seed = 5;
  const FitReport report = fit(data, truth.family, cfg);
  CHECK(report.final_loglik() >= log_likelihood(truth, data) - 1e-3);

  // the fitted gate separates left from right (sign of the slope wrt its
  // own expert ordering)
  const Eigen::VectorXd left = gate_weights_at(report.model, Eigen::VectorXd::Constant(1, -0.9));
  const Eigen::VectorXd right = gate_weights_at(report.model, Eigen::VectorXd::Constant(1, 0.9));
  const double mean_left = left.dot([&] {
    Eigen::VectorXd mus(2);
    for (int j = 0; j < 2; ++j)
      mus[j] = truth.family.mean(report.model.experts[static_cast<std::size_t>(j)][0]);
    return mus;
  }());
  const double mean_right = right.dot([&] {
    Eigen::VectorXd mus(2);
    for (int j = 0; j < 2; ++j)
      mus[j] = truth.family.mean(report.model.experts[static_cast<std::size_t>(j)][0]);
    return mus;
  }());
  CHECK(mean_left > mean_right);
}

TEST_CASE("e_step rows are responsibilities and sum to one") {
  auto rng = make_rng(40);
  const auto model = truth_model(ExpFamily::poisson(), 3, 1, 1, rng);
  auto srng = make_rng(39);
  const Dataset data = sample_from_model(model, box_sampler(1), 200, srng);
  const Eigen::MatrixXd tau = e_step(model, data);
  REQUIRE(tau.rows() == 200);
  REQUIRE(tau.cols() == 3);
  for (long i = 0; i < 200; ++i) {
    CHECK(std::abs(tau.row(i).sum() - 1.0) <= 1e-12);
    const Eigen::VectorXd r =
        responsibilities(model, data.X.row(i).transpose(), data.Y[i]);
    CHECK((tau.row(i).transpose() - r).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("m_step_experts closed forms") {
  // weighted poisson with unit weights and k=0: theta = log(mean y)
  Dataset data = grid_dataset_1d(50, [](double) { return 0.0; });
  for (int i = 0; i < 50; ++i) data.Y[i] = static_cast<double>(i % 5);
  const Eigen::MatrixXd tau = Eigen::MatrixXd::Ones(50, 1);
  const PolyBasis basis(1, 0);
  const std::vector<Eigen::VectorXd> init = {Eigen::VectorXd::Zero(1)};
  NewtonOpts opts;
  const auto theta = m_step_experts(tau, data, ExpFamily::poisson(), basis, init, opts);
  CHECK(theta[0][0] == doctest::Approx(std::log(data.Y.mean())).epsilon(1e-8));

  // gaussian: a single newton step lands on the weighted least squares fit
  auto rng = make_rng(43);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  Dataset gdata = grid_dataset_1d(60, [](double x) { return 1.0 - 0.5 * x; });
  Eigen::MatrixXd gtau(60, 1);
  for (int i = 0; i < 60; ++i) gtau(i, 0) = unif(rng);
  NewtonOpts one_step;
  one_step.max_iters = 1;
  one_step.ridge = 0.0;
  const PolyBasis line(1, 1);
  const std::vector<Eigen::VectorXd> ginit = {Eigen::VectorXd::Zero(2)};
  const auto gtheta =
      m_step_experts(gtau, gdata, ExpFamily::gaussian(1.0), line, ginit, one_step);
  Eigen::MatrixXd A(60, 2);
  A.col(0).setOnes();
  A.col(1) = gdata.X.col(0);
  const Eigen::VectorXd wls = oracles::wls_solve(A, gdata.Y, gtau.col(0));
  CHECK((gtheta[0] - wls).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("m_step_experts objective never decreases and starved experts freeze") {
  auto rng = make_rng(44);
  Dataset data = grid_dataset_1d(80, [](double) { return 0.0; });
  auto pois_rng = make_rng(45);
  for (int i = 0; i < 80; ++i)
    data.Y[i] = ExpFamily::poisson().sample(0.3, pois_rng);
  Eigen::MatrixXd tau(80, 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < 80; ++i) {
    tau(i, 0) = unif(rng);
    tau(i, 1) = 1.0 - tau(i, 0);
  }
  const PolyBasis basis(1, 1);
  std::vector<Eigen::VectorXd> init = {Eigen::VectorXd::Zero(2),
                                       Eigen::VectorXd::Zero(2)};
  init[0][0] = 0.2;
  NewtonOpts opts;
  auto objective = [&](const Eigen::VectorXd& th, int j) {
    double acc = 0.0;
    for (int i = 0; i < 80; ++i) {
      const double h = ExpFamily::poisson().clip(th[0] + th[1] * data.X(i, 0));
      acc += tau(i, j) * (data.Y[i] * h - std::exp(h));
    }
    return acc;
  };
  const auto theta = m_step_experts(tau, data, ExpFamily::poisson(), basis, init, opts);
  for (int j = 0; j < 2; ++j)
    CHECK(objective(theta[static_cast<std::size_t>(j)], j) >=
          objective(init[static_cast<std::size_t>(j)], j) - 1e-12);

  // starved column: parameters unchanged, flag set
  Eigen::MatrixXd tau2 = tau;
  tau2.col(1).setZero();
  std::vector<bool> starved;
  const auto theta2 = m_step_experts(tau2, data, ExpFamily::poisson(), basis, init,
                                     opts, nullptr, &starved);
  CHECK(starved[1]);
  CHECK_FALSE(starved[0]);
  CHECK((theta2[1] - init[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("m_step_gate: entropy case, separable case, ascent, grid oracle") {
  Dataset data = grid_dataset_1d(100, [](double) { return 0.0; });

  // constant responsibilities: optimum is the uniform gate
  Eigen::MatrixXd tau = Eigen::MatrixXd::Constant(100, 2, 0.5);
  NewtonOpts opts;
  const GateParams g0 = GateParams::zeros(2, 1);
  const GateParams g = m_step_gate(tau, data, g0, opts);
  CHECK(g.W.cwiseAbs().maxCoeff() <= 1e-6);
  double obj = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd w = gate_weights(g, data.X.row(i).transpose());
    for (int j = 0; j < 2; ++j) obj += tau(i, j) * std::log(w[j]);
  }
  CHECK(obj == doctest::Approx(-100.0 * std::log(2.0)).epsilon(1e-6));

  // perfectly separable hard labels: objective beats the unseparated baseline
  Eigen::MatrixXd hard(100, 2);
  for (int i = 0; i < 100; ++i) {
    hard(i, 0) = data.X(i, 0) < 0.0 ? 1.0 : 0.0;
    hard(i, 1) = 1.0 - hard(i, 0);
  }
  const GateParams gs = m_step_gate(hard, data, g0, opts);
  double obj_sep = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd w = gate_weights(gs, data.X.row(i).transpose());
    for (int j = 0; j < 2; ++j)
      if (hard(i, j) > 0) obj_sep += hard(i, j) * std::log(w[j]);
  }
  CHECK(obj_sep > -100.0 * std::log(2.0));
  CHECK(gs.W.allFinite());

  // random responsibilities: ascent against the initial value
  auto rng = make_rng(46);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  Eigen::MatrixXd rtau(100, 2);
  for (int i = 0; i < 100; ++i) {
    rtau(i, 0) = unif(rng);
    rtau(i, 1) = 1.0 - rtau(i, 0);
  }
  GateParams ginit = GateParams::zeros(2, 1);
  ginit.W(0, 0) = 0.4;
  ginit.W(0, 1) = -0.8;
  auto gate_obj = [&](const GateParams& q) {
    double acc = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd w = gate_weights(q, data.X.row(i).transpose());
      for (int j = 0; j < 2; ++j) acc += rtau(i, j) * std::log(w[j]);
    }
    return acc;
  };
  const GateParams gr = m_step_gate(rtau, data, ginit, opts);
  CHECK(gate_obj(gr) >= gate_obj(ginit) - 1e-12);

  // small instance against a coarse grid + finite-difference ascent oracle
  Dataset small = grid_dataset_1d(60, [](double) { return 0.0; });
  Eigen::MatrixXd stau(60, 2);
  auto rng2 = make_rng(47);
  for (int i = 0; i < 60; ++i) {
    stau(i, 0) = unif(rng2);
    stau(i, 1) = 1.0 - stau(i, 0);
  }
  auto sobj = [&](double w0, double w1) {
    GateParams q = GateParams::zeros(2, 1);
    q.W(0, 0) = w0;
    q.W(0, 1) = w1;
    double acc = 0.0;
    for (int i = 0; i < 60; ++i) {
      const Eigen::VectorXd w = gate_weights(q, small.X.row(i).transpose());
      for (int j = 0; j < 2; ++j) acc += stau(i, j) * std::log(w[j]);
    }
    return acc;
  };
  double best = -1e300, bw0 = 0, bw1 = 0;
  for (int a = 0; a <= 60; ++a)
    for (int b = 0; b <= 60; ++b) {
      const double w0 = -3.0 + 0.1 * a, w1 = -3.0 + 0.1 * b;
      const double v = sobj(w0, w1);
      if (v > best) {
        best = v;
        bw0 = w0;
        bw1 = w1;
      }
    }
  // refine by plain gradient ascent with numeric gradients
  for (int it = 0; it < 5000; ++it) {
    const double h = 1e-6;
    const double gx = (sobj(bw0 + h, bw1) - sobj(bw0 - h, bw1)) / (2 * h);
    const double gy = (sobj(bw0, bw1 + h) - sobj(bw0, bw1 - h)) / (2 * h);
    double step = 0.5;
    while (sobj(bw0 + step * gx, bw1 + step * gy) < best && step > 1e-12) step /= 2;
    bw0 += step * gx;
    bw1 += step * gy;
    best = sobj(bw0, bw1);
  }
  const GateParams gnewton = m_step_gate(stau, small, GateParams::zeros(2, 1), opts);
  CHECK(sobj(gnewton.W(0, 0), gnewton.W(0, 1)) >= best - 1e-4);
}

TEST_CASE("init_params determinism and degenerate cases") {
  auto rng = make_rng(48);
  const auto truth = truth_model(ExpFamily::poisson(), 2, 1, 1, rng);
  auto srng = make_rng(49);
  const Dataset data = sample_from_model(truth, box_sampler(1), 300, srng);
  NewtonOpts opts;

  const MoEParams a = init_params(data, ExpFamily::poisson(), 3, 1, 1234, opts);
  const MoEParams b = init_params(data, ExpFamily::poisson(), 3, 1, 1234, opts);
  for (int j = 0; j < 3; ++j)
    CHECK((a.experts[static_cast<std::size_t>(j)] -
           b.experts[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.gate.W - b.gate.W).cwiseAbs().maxCoeff() == 0.0);

  // m=1: the init equals the global single-expert fit
  const MoEParams one = init_params(data, ExpFamily::poisson(), 1, 0, 7, opts);
  CHECK(one.experts[0][0] == doctest::Approx(std::log(data.Y.mean())).epsilon(1e-8));

  // m=n, k=0: each expert sits at its own observation's response
  Dataset tiny;
  tiny.X.resize(3, 1);
  tiny.X << -0.8, 0.0, 0.8;
  tiny.Y.resize(3);
  tiny.Y << 1.0, 3.0, 6.0;
  const MoEParams full = init_params(tiny, ExpFamily::poisson(), 3, 0, 11, opts);
  // cluster order follows kmeans seeding; match experts to points by mean
  std::vector<double> fitted;
  for (int j = 0; j < 3; ++j)
    fitted.push_back(ExpFamily::poisson().mean(full.experts[static_cast<std::size_t>(j)][0]));
  std::sort(fitted.begin(), fitted.end());
  CHECK(fitted[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(fitted[1] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(fitted[2] == doctest::Approx(6.0).epsilon(1e-5));

  CHECK_THROWS_AS(init_params(tiny, ExpFamily::poisson(), 4, 0, 1, opts),
                  std::invalid_argument);
}

TEST_CASE("EM ascent across random configurations") {
  const std::vector<ExpFamily> families = {ExpFamily::poisson(), ExpFamily::bernoulli(),
                                           ExpFamily::gaussian(1.0),
                                           ExpFamily::exponential()};
  auto rng = make_rng(50);
  int checked = 0;
  for (int rep = 0; rep < 12; ++rep) {
    const ExpFamily& family = families[rep % families.size()];
    const int m = 1 + static_cast<int>(rng() % 4);
    const int k = static_cast<int>(rng() % 3);
    auto truth = truth_model(family, m, 1, k, rng);
    auto srng = make_rng(derive_seed(51, {static_cast<std::uint64_t>(rep)}));
    const Dataset data = sample_from_model(truth, box_sampler(1), 800, srng);
    FitConfig cfg;
    cfg.m = m;
    cfg.k = k;
    cfg.restarts = 1;
    cfg.max_em_iters = 30;
    cfg.rescale = false;
    cfg.seed = derive_seed(52, {static_cast<std::uint64_t>(rep)});
    const FitReport report = fit(data, family, cfg);
    for (std::size_t t = 1; t < report.loglik_trajectory.size(); ++t) {
      CHECK(report.loglik_trajectory[t] >= report.loglik_trajectory[t - 1] - 1e-10);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("gradient norm is small at convergence") {
  auto rng = make_rng(53);
  const auto truth = truth_model(ExpFamily::poisson(), 2, 1, 1, rng);
  auto srng = make_rng(54);
  const Dataset data = sample_from_model(truth, box_sampler(1), 2000, srng);
  FitConfig cfg;
  cfg.m = 2;
  cfg.k = 1;
  cfg.restarts = 2;
  cfg.rel_tol = 1e-12;
  cfg.max_em_iters = 2000;
  cfg.rescale = false;
  cfg.seed = 3;
  const FitReport report = fit(data, ExpFamily::poisson(), cfg);
  const Eigen::VectorXd grad = loglik_gradient(report.model, data);
  CHECK(grad.norm() <= 1e-4);
}

TEST_CASE("permutation of experts leaves the likelihood unchanged") {
  auto rng = make_rng(55);
  const auto truth = truth_model(ExpFamily::bernoulli(), 3, 1, 1, rng);
  auto srng = make_rng(56);
  const Dataset data = sample_from_model(truth, box_sampler(1), 500, srng);
  FitConfig cfg;
  cfg.m = 3;
  cfg.k = 1;
  cfg.restarts = 1;
  cfg.max_em_iters = 40;
  cfg.rescale = false;
  const FitReport report = fit(data, ExpFamily::bernoulli(), cfg);
  const double l0 = log_likelihood(report.model, data);

  // swap experts 0 and 2; the gate must be re-pinned accordingly:
  // new logits eta'_j = eta_{perm(j)} - eta_{perm(m-1)}
  MoEParams perm = report.model;
  std::swap(perm.experts[0], perm.experts[2]);
  const Eigen::MatrixXd W = report.model.gate.W;
  // original logits rows: [w0, w1, 0]; permuted expert order (2,1,0) gives
  // logits [0, w1, w0] and pinning subtracts w0 from all rows
  perm.gate.W.row(0) = -W.row(0);
  perm.gate.W.row(1) = W.row(1) - W.row(0);
  CHECK(log_likelihood(perm, data) == doctest::Approx(l0).epsilon(1e-12));
}

TEST_CASE("likelihood gap to the truth shrinks with n") {
  auto rng = make_rng(57);
  MoEParams truth = truth_model(ExpFamily::poisson(), 2, 1, 1, rng);
  truth.gate.W(0, 0) = 0.3;
  truth.gate.W(0, 1) = 2.0;
  std::vector<double> gaps;
  for (long n : {500L, 8000L}) {
    std::vector<double> reps;
    for (int rep = 0; rep < 5; ++rep) {
      auto srng = make_rng(derive_seed(58, {static_cast<std::uint64_t>(n),
                                            static_cast<std::uint64_t>(rep)}));
      const Dataset data = sample_from_model(truth, box_sampler(1), n, srng);
      FitConfig cfg;
      cfg.m = 2;
      cfg.k = 1;
      cfg.restarts = 2;
      cfg.max_em_iters = 300;
      cfg.rescale = false;
      cfg.seed = derive_seed(59, {static_cast<std::uint64_t>(rep)});
      const FitReport report = fit(data, ExpFamily::poisson(), cfg);
      reps.push_back(report.final_loglik() - log_likelihood(truth, data));
    }
    std::sort(reps.begin(), reps.end());
    gaps.push_back(reps[reps.size() / 2]);
    CHECK(gaps.back() >= -1e-6);  // the MLE cannot be worse than the truth
  }
  CHECK(gaps[1] <= gaps[0] + 1e-6);
}

TEST_CASE("fit validates inputs") {
  Dataset data;
  data.X.resize(4, 1);
  data.X << -1.0, -0.3, 0.3, 1.0;
  data.Y.resize(4);
  data.Y << 0.0, 1.0, 2.0, 1.0;
  FitConfig cfg;
  cfg.m = 2;
  cfg.k = 1;
  CHECK_THROWS_AS(fit(data, ExpFamily::poisson(), cfg),
                  std::invalid_argument);  // n < parameter count
  data.Y[0] = -2.0;
  FitConfig small;
  small.m = 1;
  small.k = 0;
  CHECK_THROWS_AS(fit(data, ExpFamily::poisson(), small), data_error);
}

}  // TEST_SUITE
