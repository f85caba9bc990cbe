#include <random>

#include <benchmark/benchmark.h>

#include <gpcr/kernels.hpp>

namespace {

using gpcr::Index;
using gpcr::Matrix;
using gpcr::Vector;

Matrix random_matrix(Index rows, Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

template <Matrix (*Kernel)(const Matrix&, const Matrix&)>
void BM_gemm_rows(benchmark::State& state) {
  const Index N = state.range(0);
  const Matrix X = random_matrix(N, 440, 1);
  const Matrix W = random_matrix(440, 5, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(X, W));
  state.SetItemsProcessed(state.iterations() * N);
}

template <Matrix (*Kernel)(const Matrix&, const Matrix&)>
void BM_gemm_tn(benchmark::State& state) {
  const Index N = state.range(0);
  const Matrix X = random_matrix(N, 440, 1);
  const Matrix Z = random_matrix(N, 5, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(X, Z));
  state.SetItemsProcessed(state.iterations() * N);
}

template <Vector (*Kernel)(const Matrix&, const Vector&, const Matrix&, const Matrix&)>
void BM_quadforms(benchmark::State& state) {
  const Index N = state.range(0);
  const Matrix X = random_matrix(N, 440, 1);
  const Vector w = random_matrix(440, 1, 2).col(0).cwiseAbs();
  const Matrix V = random_matrix(N, 5, 3);
  const Matrix S = random_matrix(5, 5, 4);
  const Matrix C = S * S.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(X, w, V, C));
  state.SetItemsProcessed(state.iterations() * N);
}

template <gpcr::kernels::LogisticMcRows (*Kernel)(const Matrix&, const Matrix&, const Matrix&, const Vector&, double,
                                                  const Vector&, Index)>
void BM_logistic_mc(benchmark::State& state) {
  const Index N = state.range(0), L = 5, S = 8;
  const Matrix means = random_matrix(N, L, 1);
  const Matrix scale = Matrix::Identity(L, L) * 0.5;
  const Matrix eps = random_matrix(N * S, L, 2);
  const Vector coef = random_matrix(L, 1, 3).col(0);
  Vector labels(N);
  for (Index i = 0; i < N; ++i) labels[i] = static_cast<double>(i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(means, scale, eps, coef, 0.1, labels, S));
  state.SetItemsProcessed(state.iterations() * N);
}

}  // namespace

BENCHMARK(BM_gemm_rows<gpcr::kernels::serial::gemm_rows>)->Name("gemm_rows/serial")->Arg(1000)->Arg(8000);
BENCHMARK(BM_gemm_rows<gpcr::kernels::parallel::gemm_rows>)->Name("gemm_rows/parallel")->Arg(1000)->Arg(8000);
BENCHMARK(BM_gemm_tn<gpcr::kernels::serial::gemm_tn>)->Name("gemm_tn/serial")->Arg(1000)->Arg(8000);
BENCHMARK(BM_gemm_tn<gpcr::kernels::parallel::gemm_tn>)->Name("gemm_tn/parallel")->Arg(1000)->Arg(8000);
BENCHMARK(BM_quadforms<gpcr::kernels::serial::woodbury_quadforms>)->Name("quadforms/serial")->Arg(1000)->Arg(8000);
BENCHMARK(BM_quadforms<gpcr::kernels::parallel::woodbury_quadforms>)->Name("quadforms/parallel")->Arg(1000)->Arg(8000);
BENCHMARK(BM_logistic_mc<gpcr::kernels::serial::logistic_mc>)->Name("logistic_mc/serial")->Arg(1000)->Arg(8000);
BENCHMARK(BM_logistic_mc<gpcr::kernels::parallel::logistic_mc>)->Name("logistic_mc/parallel")->Arg(1000)->Arg(8000);

BENCHMARK_MAIN();
