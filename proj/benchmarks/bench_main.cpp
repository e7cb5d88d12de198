#include <benchmark/benchmark.h>

#include "switchdiff/averaging.hpp"
#include "switchdiff/fastchain.hpp"
#include "switchdiff/perturb.hpp"
#include "switchdiff/ratefn.hpp"
#include "switchdiff/simulator.hpp"
#include "testmodels.hpp"

using namespace switchdiff;

namespace {

Model bench_model() { return testmodels::two_state(1, 1, 2, 1); }

void BM_InvariantMeasure(benchmark::State& state) {
  StreamRng rng(1, 1);
  Model m = testmodels::random_affine(rng, int(state.range(0)));
  Eigen::VectorXd x = Eigen::VectorXd::Constant(m.dim(), 0.3);
  for (auto _ : state)
    benchmark::DoNotOptimize(invariant_measure(m, x));
}
BENCHMARK(BM_InvariantMeasure)->Arg(2)->Arg(4)->Arg(6);

void BM_Simulate(benchmark::State& state) {
  Model m = bench_model();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  double eps = 1.0 / double(state.range(0));
  std::uint64_t stream = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate(m, eps, x0, 0, 1.0, 0.01, 17, ++stream));
}
BENCHMARK(BM_Simulate)->Arg(10)->Arg(50)->Arg(100);

void BM_LocalRate(benchmark::State& state) {
  Model m = bench_model();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.25);
  LocalRateOptions opts;
  opts.multistarts = int(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(local_rate(m, x, beta, opts));
}
BENCHMARK(BM_LocalRate)->Arg(2)->Arg(8);

void BM_LocalRateDegenerate(benchmark::State& state) {
  Model m = testmodels::degenerate2();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.5);
  LocalRateOptions opts;
  opts.multistarts = 2;
  for (auto _ : state)
    benchmark::DoNotOptimize(local_rate(m, x, beta, opts));
}
BENCHMARK(BM_LocalRateDegenerate);

void BM_PerturbTriple(benchmark::State& state) {
  Model m = bench_model();
  auto [xi, tab] =
      zero_cost_triple(m, Eigen::VectorXd::Zero(1), 1.0, int(state.range(0)));
  ProbeSpec probe;
  probe.lo = Eigen::VectorXd::Constant(1, -5);
  probe.hi = Eigen::VectorXd::Constant(1, 5);
  PerturbOptions po;
  po.bounds = validate_model(m, probe).bounds;
  for (auto _ : state)
    benchmark::DoNotOptimize(perturb_triple(m, xi, tab, 0.1, po));
}
BENCHMARK(BM_PerturbTriple)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
