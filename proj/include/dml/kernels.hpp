#pragma once

// Dense numeric kernels behind the autodiff primitives.
//
// Every kernel in dml::kernels has a serial twin in dml::kernels::reference.
// The parallel versions split work only across independent output elements
// and keep the per-element summation order of the reference, so both give
// bit-identical results for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace dml::kernels {

/// Row bags in CSR form: bag r covers indices[offsets[r] .. offsets[r+1]).
struct BagView {
  std::span<const std::uint32_t> offsets;
  std::span<const std::int32_t> indices;
  std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

// out[c] = sum over rows of a[r][c]
void column_sums(std::span<const double> a, std::span<double> out, std::size_t rows,
                 std::size_t cols);

void row_softmax(std::span<const double> in, std::span<double> out, std::size_t rows,
                 std::size_t cols);
// dx = y * (dy - rowsum(dy * y))
void row_softmax_backward(std::span<const double> y, std::span<const double> dy,
                          std::span<double> dx, std::size_t rows, std::size_t cols);

// out row r = mean of table rows listed in bag r; empty bags read row 0.
void gather_mean(std::span<const double> table, std::size_t dim, BagView bags,
                 std::span<double> out);

// Bias-corrected Adam update applied in place. step is 1-based.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, std::int64_t step);

/// Elementwise out[i] = f(in[i]).
template <class F>
void map(std::span<const double> in, std::span<double> out, F f) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = f(in[i]);
}

/// Elementwise out[i] = f(a[i], b[i]).
template <class F>
void zip(std::span<const double> a, std::span<const double> b, std::span<double> out, F f) {
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
}

/// Number of threads the parallel kernels will use.
int max_threads();
void set_num_threads(int n);

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void column_sums(std::span<const double> a, std::span<double> out, std::size_t rows,
                 std::size_t cols);
void row_softmax(std::span<const double> in, std::span<double> out, std::size_t rows,
                 std::size_t cols);
void row_softmax_backward(std::span<const double> y, std::span<const double> dy,
                          std::span<double> dx, std::size_t rows, std::size_t cols);
void gather_mean(std::span<const double> table, std::size_t dim, BagView bags,
                 std::span<double> out);
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, std::int64_t step);

}  // namespace reference

}  // namespace dml::kernels
