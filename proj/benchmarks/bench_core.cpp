// Microbenchmarks for the kernel evaluation, the pairwise superposition,
// the drag solve, and the exact transport assignment.  These are the four
// costs that decide how far a desk-scale study can push N.

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "stokesmf/meso.hpp"
#include "stokesmf/metrics.hpp"
#include "stokesmf/micro.hpp"
#include "stokesmf/oseen.hpp"
#include "stokesmf/parallel.hpp"
#include "stokesmf/rng.hpp"
#include "stokesmf/transport.hpp"

namespace {

using namespace stokesmf;

Rng bench_rng(std::uint64_t stream) {
  return Rng(derive_seed(0xbe9cbe9cbe9cbe9cULL, StreamPurpose::test, stream, 0));
}

void bm_oseen_blob_interior(benchmark::State& state) {
  auto rng = bench_rng(1);
  const Vec3 x = 0.4 * rng.uniform_in_ball(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(oseen_blob(x, 0.5));
}
BENCHMARK(bm_oseen_blob_interior);

void bm_oseen_blob_exterior(benchmark::State& state) {
  auto rng = bench_rng(2);
  const Vec3 x = rng.uniform_in_ball(1.0).normalized() * 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(oseen_blob(x, 0.1));
}
BENCHMARK(bm_oseen_blob_exterior);

void bm_superpose(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto rng = bench_rng(3);
  Vec3List x(n), f(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform_in_ball(1.0);
    f[i] = rng.normal3(1.0);
  }
  ThreadPool pool(1);
  for (auto _ : state) benchmark::DoNotOptimize(superpose(x, x, f, 0.01, true, pool));
  state.SetComplexityN(n);
}
BENCHMARK(bm_superpose)->Arg(64)->Arg(256)->Arg(1024)->Complexity(benchmark::oNSquared);

void bm_solve_drag(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const MicroState s = init_particles(InitialDataSpec{}, n, 7);
  const double d = blob_radius_for(s, 0.02, min_distance(s.X));
  ThreadPool pool(1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_drag(s, d, DragOptions{}, pool));
}
BENCHMARK(bm_solve_drag)->Arg(128)->Arg(512);

void bm_exact_assignment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto rng = bench_rng(4);
  WeightedCloud a, b;
  a.dim = b.dim = 6;
  for (int i = 0; i < 6 * n; ++i) {
    a.points.push_back(rng.normal());
    b.points.push_back(rng.normal());
  }
  a.weights.assign(n, 1.0 / n);
  b.weights.assign(n, 1.0 / n);
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein2(a, b));
}
BENCHMARK(bm_exact_assignment)->Arg(128)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
