// Independent reference computations used as test oracles. Plain nested
// loops over std::vector, no library code.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dml/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const dml::Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

inline dml::Tensor to_tensor(const Mat& m) {
  dml::Tensor t(dml::Shape(m.size(), m.empty() ? 0 : m[0].size()));
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) t(r, c) = m[r][c];
  return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < b.size(); ++p) s += a[i][p] * b[p][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Mat add_row(const Mat& a, const std::vector<double>& b) {
  Mat c = a;
  for (auto& row : c)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  return c;
}

inline Mat add(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) c[i][j] += b[i][j];
  return c;
}

inline Mat relu(Mat a) {
  for (auto& row : a)
    for (auto& x : row) x = x > 0 ? x : 0.0;
  return a;
}

inline Mat sigmoid(Mat a) {
  for (auto& row : a)
    for (auto& x : row) x = 1.0 / (1.0 + std::exp(-x));
  return a;
}

inline Mat softmax_rows(Mat a) {
  for (auto& row : a) {
    double mx = row[0];
    for (double x : row) mx = std::max(mx, x);
    double s = 0.0;
    for (auto& x : row) s += (x = std::exp(x - mx));
    for (auto& x : row) x /= s;
  }
  return a;
}

inline Mat concat(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i) c[i].insert(c[i].end(), b[i].begin(), b[i].end());
  return c;
}

inline Mat random_mat(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1,
                      double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, std::vector<double>(c));
  for (auto& row : m)
    for (auto& x : row) x = u(rng);
  return m;
}

inline double max_diff(const Mat& a, const Mat& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

}  // namespace oracle
