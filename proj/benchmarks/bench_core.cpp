#include <benchmark/benchmark.h>

#include <random>

#include "polymoe/divergence.hpp"
#include "polymoe/em_fit.hpp"
#include "polymoe/rng.hpp"
#include "polymoe/synth.hpp"

namespace {

using namespace polymoe;

MoEParams bench_model(int m, int s, int k) {
  MoEParams model;
  model.family = ExpFamily::poisson();
  model.basis = PolyBasis(s, k);
  model.gate = GateParams::zeros(m, s);
  model.x_scaling = XScaling::identity(s);
  auto rng = make_rng(1);
  std::uniform_real_distribution<double> unif(-0.4, 0.4);
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd th(model.basis.dimension());
    for (int c = 0; c < th.size(); ++c) th[c] = unif(rng);
    model.experts.push_back(th);
  }
  for (int r = 0; r < m - 1; ++r)
    for (int c = 0; c <= s; ++c) model.gate.W(r, c) = unif(rng);
  return model;
}

Dataset bench_data(const MoEParams& model, long n) {
  auto rng = make_rng(2);
  return sample_from_model(
      model,
      [s = model.s()](std::mt19937_64& r) {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Eigen::VectorXd x(s);
        for (int i = 0; i < s; ++i) x[i] = unif(r);
        return x;
      },
      n, rng);
}

void BM_EvalBasis(benchmark::State& state) {
  const PolyBasis basis(5, static_cast<int>(state.range(0)));
  Eigen::VectorXd x(5), out(basis.dimension());
  x << 0.3, -0.7, 0.1, 0.9, -0.2;
  for (auto _ : state) {
    basis.eval_into(x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_EvalBasis)->Arg(1)->Arg(3)->Arg(5);

void BM_LogLikelihood(benchmark::State& state) {
  const MoEParams model = bench_model(4, 2, 2);
  const Dataset data = bench_data(model, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_likelihood(model, data));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogLikelihood)->Arg(1000)->Arg(8000);

void BM_EStep(benchmark::State& state) {
  const MoEParams model = bench_model(4, 2, 1);
  const Dataset data = bench_data(model, 2000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(e_step(model, data));
  }
}
BENCHMARK(BM_EStep);

void BM_MStepExperts(benchmark::State& state) {
  const MoEParams model = bench_model(3, 1, 2);
  const Dataset data = bench_data(model, 2000);
  const Eigen::MatrixXd tau = e_step(model, data);
  NewtonOpts opts;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        m_step_experts(tau, data, model.family, model.basis, model.experts, opts));
  }
}
BENCHMARK(BM_MStepExperts);

void BM_KlTruncated(benchmark::State& state) {
  TargetParams p;
  p.amplitude = 0.6;
  p.omega = 2.0;
  const TargetSpec target = make_target(TargetKind::smooth_sin, 1, 1,
                                        ExpFamily::poisson(), p);
  const MoEParams model = bench_model(3, 1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kl_mc(target, model, 2000, 7));
  }
}
BENCHMARK(BM_KlTruncated);

void BM_Fit(benchmark::State& state) {
  const MoEParams truth = bench_model(2, 1, 1);
  const Dataset data = bench_data(truth, 2000);
  FitConfig cfg;
  cfg.m = 2;
  cfg.k = 1;
  cfg.restarts = 1;
  cfg.max_em_iters = 25;
  cfg.rescale = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(data, truth.family, cfg));
  }
}
BENCHMARK(BM_Fit);

}  // namespace

int main(int argc, char** argv) {
  ::benchmark::Initialize(&argc, argv);
  if (::benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  ::benchmark::RunSpecifiedBenchmarks();
  ::benchmark::Shutdown();
  return 0;
}
