// Serial reference kernels. Plain loops, no blocking, no threading; used by
// the tests as the ground truth for the parallel kernels and by the benchmark.

#include <algorithm>
#include <cmath>

#include "dml/kernels.hpp"

namespace dml::kernels::reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void column_sums(std::span<const double> a, std::span<double> out, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += a[r * cols + j];
    out[j] = acc;
  }
}

void row_softmax(std::span<const double> in, std::span<double> out, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double top = in[r * cols];
    for (std::size_t j = 1; j < cols; ++j) top = std::max(top, in[r * cols + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      out[r * cols + j] = std::exp(in[r * cols + j] - top);
      total += out[r * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[r * cols + j] /= total;
  }
}

void row_softmax_backward(std::span<const double> y, std::span<const double> dy,
                          std::span<double> dx, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += dy[r * cols + j] * y[r * cols + j];
    for (std::size_t j = 0; j < cols; ++j) {
      dx[r * cols + j] = y[r * cols + j] * (dy[r * cols + j] - dot);
    }
  }
}

void gather_mean(std::span<const double> table, std::size_t dim, BagView bags,
                 std::span<double> out) {
  for (std::size_t r = 0; r < bags.size(); ++r) {
    const std::uint32_t lo = bags.offsets[r];
    const std::uint32_t hi = bags.offsets[r + 1];
    for (std::size_t j = 0; j < dim; ++j) {
      if (lo == hi) {
        out[r * dim + j] = table[j];
        continue;
      }
      double acc = 0.0;
      for (std::uint32_t p = lo; p < hi; ++p) {
        acc += table[static_cast<std::size_t>(bags.indices[p]) * dim + j];
      }
      out[r * dim + j] = acc / static_cast<double>(hi - lo);
    }
  }
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamHyper& hyper, std::int64_t step) {
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * grad[i];
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
    param[i] -= hyper.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hyper.eps);
  }
}

}  // namespace dml::kernels::reference
