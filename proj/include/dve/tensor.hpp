#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "dve/errors.hpp"
#include "dve/parallel.hpp"

namespace dve {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

// Dense row-major matrix of doubles. Vectors are n x 1 or 1 x n.
struct Tensor {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::int64_t r, std::int64_t c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {
    require(r >= 0 && c >= 0, "tensor dimensions must be nonnegative");
  }

  double& operator()(std::int64_t i, std::int64_t j) { return data[i * cols + j]; }
  double operator()(std::int64_t i, std::int64_t j) const { return data[i * cols + j]; }

  std::int64_t size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  static Tensor identity(std::int64_t n) {
    Tensor t(n, n);
    for (std::int64_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  static Tensor from(std::initializer_list<std::initializer_list<double>> rs) {
    Tensor t(static_cast<std::int64_t>(rs.size()),
             rs.size() ? static_cast<std::int64_t>(rs.begin()->size()) : 0);
    std::int64_t i = 0;
    for (const auto& row : rs) {
      require(static_cast<std::int64_t>(row.size()) == t.cols, "ragged initializer");
      std::int64_t j = 0;
      for (double v : row) t(i, j++) = v;
      ++i;
    }
    return t;
  }
};

// c = a * b. ikj loop order: for every output entry the k-accumulation runs
// in increasing k, so results are bitwise identical for any thread count.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  Tensor c(a.rows, b.cols);
  parallel_for(a.rows, [&](std::int64_t i) {
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::int64_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  });
  return c;
}

// c = a^T * b
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rows == b.rows, "matmul_tn: inner dimensions differ");
  Tensor c(a.cols, b.cols);
  parallel_for(a.cols, [&](std::int64_t i) {
    for (std::int64_t k = 0; k < a.rows; ++k) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::int64_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  });
  return c;
}

// c = a * b^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols == b.cols, "matmul_nt: inner dimensions differ");
  Tensor c(a.rows, b.rows);
  parallel_for(a.rows, [&](std::int64_t i) {
    for (std::int64_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
  });
  return c;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add: shape mismatch");
  Tensor c = a;
  for (std::int64_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "sub: shape mismatch");
  Tensor c = a;
  for (std::int64_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "hadamard: shape mismatch");
  Tensor c = a;
  for (std::int64_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor c = a;
  for (double& v : c.data) v *= s;
  return c;
}

inline double l2_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = std::fabs(a.data[i] - b.data[i]);
    if (d > m) m = d;
  }
  return m;
}

// Dot product of row i of a with row j of b.
inline double row_dot(const Tensor& a, std::int64_t i, const Tensor& b, std::int64_t j) {
  require(a.cols == b.cols, "row_dot: width mismatch");
  double s = 0.0;
  for (std::int64_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
  return s;
}

}  // namespace dve
