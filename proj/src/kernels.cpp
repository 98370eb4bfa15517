#include "dml/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace dml::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void set_num_threads(int n) { omp_set_num_threads(std::max(1, n)); }

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = cp + i * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = ap + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  // Transposing b first turns the dot products into the streaming matmul loop
  // while keeping the k-ascending accumulation order.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  matmul(a, bt, c, m, k, n);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* crow = cp + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double api = ap[p * m + i];
      const double* brow = bp + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

void column_sums(std::span<const double> a, std::span<double> out, std::size_t rows,
                 std::size_t cols) {
  constexpr std::size_t kChunk = 64;
  const auto chunks = static_cast<std::ptrdiff_t>((cols + kChunk - 1) / kChunk);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::ptrdiff_t ch = 0; ch < chunks; ++ch) {
    const std::size_t lo = ch * kChunk;
    const std::size_t hi = std::min(cols, lo + kChunk);
    for (std::size_t j = lo; j < hi; ++j) out[j] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = a.data() + r * cols;
      for (std::size_t j = lo; j < hi; ++j) out[j] += row[j];
    }
  }
}

void row_softmax(std::span<const double> in, std::span<double> out, std::size_t rows,
                 std::size_t cols) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::ptrdiff_t r = 0; r < nrows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = out.data() + r * cols;
    const double top = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - top);
      total += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= total;
  }
}

void row_softmax_backward(std::span<const double> y, std::span<const double> dy,
                          std::span<double> dx, std::size_t rows, std::size_t cols) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::ptrdiff_t r = 0; r < nrows; ++r) {
    const std::size_t base = r * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += dy[base + j] * y[base + j];
    for (std::size_t j = 0; j < cols; ++j) dx[base + j] = y[base + j] * (dy[base + j] - dot);
  }
}

void gather_mean(std::span<const double> table, std::size_t dim, BagView bags,
                 std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(bags.size());
#pragma omp parallel for schedule(static) if (bags.size() * dim > kParallelWork)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    double* dst = out.data() + r * dim;
    std::fill(dst, dst + dim, 0.0);
    const std::uint32_t lo = bags.offsets[r];
    const std::uint32_t hi = bags.offsets[r + 1];
    if (lo == hi) {
      std::copy(table.data(), table.data() + dim, dst);
      continue;
    }
    for (std::uint32_t p = lo; p < hi; ++p) {
      const double* src = table.data() + static_cast<std::size_t>(bags.indices[p]) * dim;
      for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
    }
    const double count = static_cast<double>(hi - lo);
    for (std::size_t j = 0; j < dim; ++j) dst[j] /= count;
  }
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, std::int64_t step) {
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  const auto n = static_cast<std::ptrdiff_t>(param.size());
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

}  // namespace dml::kernels
