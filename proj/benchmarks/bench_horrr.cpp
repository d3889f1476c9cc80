// SPDX-License-Identifier: Apache-2.0
#include <vector>

#include <benchmark/benchmark.h>

#include "horrr/manifold.hpp"
#include "horrr/problem.hpp"
#include "horrr/rng.hpp"
#include "horrr/tensor.hpp"

namespace {

using namespace horrr;

struct Instance {
  HorrrProblem prob;
  TuckerPoint point;
};

// args: m, d; k = 10, r = 3, n = 2000
Instance make_instance(Index m, int d) {
  NormalRng rng(17);
  Instance in;
  in.prob.x = rng.normal_matrix(m, 2000);
  in.prob.y = rng.normal_matrix(10, 2000);
  in.prob.degree = d;
  in.prob.rank = 3;
  in.prob.lambda = 1e-3;
  in.point = random_point(10, m, 3, d, 5);
  return in;
}

void BM_GradientTucker(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    TangentVector g = riemannian_gradient(in.prob, in.point);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_GradientTucker)->Args({12, 2})->Args({24, 2})->Args({12, 3})->Unit(benchmark::kMillisecond);

// Projection of the dense Euclidean gradient: forms the k x m^d unfolding.
void BM_GradientDense(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), static_cast<int>(state.range(1)));
  const Matrix xkr = kr_power(in.prob.x, in.prob.degree);
  const DenseTensor w = densify(in.point);
  for (auto _ : state) {
    const Matrix w0 = unfold(w, 0);
    const Matrix g0 = (w0 * xkr - in.prob.y) * xkr.transpose() + in.prob.lambda * w0;
    TangentVector g = project_to_tangent(in.point, fold(g0, 0, w.dims()));
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_GradientDense)->Args({12, 2})->Args({24, 2})->Args({12, 3})->Unit(benchmark::kMillisecond);

void BM_ApplyTucker(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    Matrix out = apply_tucker(in.point.core(), in.point.factors(), in.prob.x);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ApplyTucker)->Args({12, 2})->Args({24, 2})->Args({12, 3})->Unit(benchmark::kMillisecond);

void BM_ApplyDense(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), static_cast<int>(state.range(1)));
  const DenseTensor w = densify(in.point);
  for (auto _ : state) {
    Matrix out = apply_dense(w, in.prob.x);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_ApplyDense)->Args({12, 2})->Args({24, 2})->Args({12, 3})->Unit(benchmark::kMillisecond);

void BM_RetractHosvd(benchmark::State& state) {
  const Instance in = make_instance(state.range(0), static_cast<int>(state.range(1)));
  const TangentVector g = riemannian_gradient(in.prob, in.point);
  const double t = 1e-3 / tangent_norm(in.point, g);
  for (auto _ : state) {
    TuckerPoint q = retract_hosvd(in.point, g, -t);
    benchmark::DoNotOptimize(q);
  }
}
BENCHMARK(BM_RetractHosvd)->Args({12, 2})->Args({24, 2})->Args({12, 3})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
