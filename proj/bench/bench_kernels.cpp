// OpenMP kernels vs the serial reference on MLP-shaped problems.
//   ./lom_bench --benchmark_filter=forward
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "lom/numkit/kernels.hpp"
#include "lom/numkit/matrix.hpp"
#include "lom/numkit/rng.hpp"

namespace {

using lom::numkit::Matrix;

struct Problem {
  Matrix x, dy, y, dx;
  std::vector<double> w, b, gw, gb;

  Problem(std::size_t batch, std::size_t in, std::size_t out)
      : x(batch, in), dy(batch, out), y(batch, out), dx(batch, in),
        w(in * out), b(out), gw(in * out), gb(out) {
    lom::numkit::Rng rng(42);
    for (std::size_t i = 0; i < batch * in; ++i) x.data()[i] = rng.normal();
    for (std::size_t i = 0; i < batch * out; ++i) dy.data()[i] = rng.normal();
    for (auto& v : w) v = rng.normal();
    for (auto& v : b) v = rng.normal();
  }
};

template <bool Parallel>
void BM_forward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  Problem p(batch, width, width);
  for (auto _ : state) {
    if constexpr (Parallel) lom::numkit::kernels::affine_forward(p.x, p.w, p.b, p.y);
    else lom::numkit::reference::affine_forward(p.x, p.w, p.b, p.y);
    benchmark::DoNotOptimize(p.y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch * width * width));
}

template <bool Parallel>
void BM_backward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto width = static_cast<std::size_t>(state.range(1));
  Problem p(batch, width, width);
  for (auto _ : state) {
    if constexpr (Parallel) {
      lom::numkit::kernels::affine_backward_params(p.x, p.dy, p.gw, p.gb);
      lom::numkit::kernels::affine_backward_input(p.dy, p.w, p.dx);
    } else {
      lom::numkit::reference::affine_backward_params(p.x, p.dy, p.gw, p.gb);
      lom::numkit::reference::affine_backward_input(p.dy, p.w, p.dx);
    }
    benchmark::DoNotOptimize(p.dx.data());
    benchmark::DoNotOptimize(p.gw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * batch * width * width));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (long batch : {64, 256, 1024})
    for (long width : {64, 256}) b->Args({batch, width});
}

}  // namespace

BENCHMARK(BM_forward<false>)->Name("forward/reference")->Apply(shapes);
BENCHMARK(BM_forward<true>)->Name("forward/openmp")->Apply(shapes);
BENCHMARK(BM_backward<false>)->Name("backward/reference")->Apply(shapes);
BENCHMARK(BM_backward<true>)->Name("backward/openmp")->Apply(shapes);

BENCHMARK_MAIN();
