#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dve/errors.hpp"
#include "dve/parallel.hpp"
#include "dve/tensor.hpp"

namespace dve {

struct CooEntry {
  std::int64_t row;
  std::int64_t col;
  double value;
};

// Compressed sparse row matrix. col_indices are strictly increasing inside
// each row and explicit zeros are never stored.
struct SparseMatrix {
  std::int64_t n_rows = 0;
  std::int64_t n_cols = 0;
  std::vector<std::int64_t> row_offsets;  // size n_rows + 1
  std::vector<std::int64_t> col_indices;
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(col_indices.size()); }

  // entries must have unique (row, col) keys; zero values are dropped.
  static SparseMatrix from_coo(std::int64_t n_rows, std::int64_t n_cols,
                               std::vector<CooEntry> entries) {
    require(n_rows >= 0 && n_cols >= 0, "from_coo: negative dimension");
    std::erase_if(entries, [](const CooEntry& e) { return e.value == 0.0; });
    std::sort(entries.begin(), entries.end(), [](const CooEntry& a, const CooEntry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.n_rows = n_rows;
    m.n_cols = n_cols;
    m.row_offsets.assign(n_rows + 1, 0);
    m.col_indices.reserve(entries.size());
    m.values.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const CooEntry& e = entries[i];
      require(e.row >= 0 && e.row < n_rows && e.col >= 0 && e.col < n_cols,
              "from_coo: entry out of range");
      if (i > 0 && entries[i - 1].row == e.row && entries[i - 1].col == e.col) {
        throw ValidationError("from_coo: duplicate entry at (" +
                              std::to_string(e.row) + ", " + std::to_string(e.col) + ")");
      }
      m.row_offsets[e.row + 1]++;
      m.col_indices.push_back(e.col);
      m.values.push_back(e.value);
    }
    for (std::int64_t r = 0; r < n_rows; ++r) m.row_offsets[r + 1] += m.row_offsets[r];
    return m;
  }

  double at(std::int64_t i, std::int64_t j) const {
    const auto begin = col_indices.begin() + row_offsets[i];
    const auto end = col_indices.begin() + row_offsets[i + 1];
    const auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return values[it - col_indices.begin()];
  }

  std::int64_t row_nnz(std::int64_t i) const { return row_offsets[i + 1] - row_offsets[i]; }

  SparseMatrix transposed() const {
    std::vector<CooEntry> entries;
    entries.reserve(values.size());
    for (std::int64_t r = 0; r < n_rows; ++r) {
      for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        entries.push_back({col_indices[k], r, values[k]});
      }
    }
    return from_coo(n_cols, n_rows, std::move(entries));
  }

  bool is_symmetric() const {
    if (n_rows != n_cols) return false;
    for (std::int64_t r = 0; r < n_rows; ++r) {
      for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        if (at(col_indices[k], r) != values[k]) return false;
      }
    }
    return true;
  }

  Tensor to_dense() const {
    Tensor d(n_rows, n_cols);
    for (std::int64_t r = 0; r < n_rows; ++r) {
      for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        d(r, col_indices[k]) = values[k];
      }
    }
    return d;
  }
};

enum class PropagationKind { positive_branch, negative_branch, signed_laplacian };

struct PropagationMatrix {
  SparseMatrix matrix;
  PropagationKind kind = PropagationKind::positive_branch;
};

// Renormalization-trick propagation:  Dhat^{-1/2} (A + I) Dhat^{-1/2}
// with Dhat the degree matrix of A + I. adj must be square, symmetric,
// zero-diagonal, with unit-magnitude entries.
inline PropagationMatrix build_propagation(const SparseMatrix& adj, PropagationKind kind) {
  require(adj.n_rows == adj.n_cols, "build_propagation: matrix not square");
  const std::int64_t n = adj.n_rows;
  std::vector<double> deg(n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
      if (adj.col_indices[k] == i) {
        throw ValidationError("build_propagation: nonzero diagonal at " + std::to_string(i));
      }
      if (std::fabs(adj.values[k]) != 1.0) {
        throw ValidationError("build_propagation: entry magnitude is not 1");
      }
    }
    deg[i] = static_cast<double>(adj.row_nnz(i) + 1);
  }
  if (!adj.is_symmetric()) throw ValidationError("build_propagation: matrix not symmetric");

  // scale by 1/sqrt(d_i d_j) in one shot: sqrt of an exact integer product
  // keeps entries like 1/sqrt(4) = 0.5 exact instead of (1/sqrt(2))^2
  std::vector<CooEntry> entries;
  entries.reserve(adj.nnz() + n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
      const std::int64_t j = adj.col_indices[k];
      entries.push_back({i, j, adj.values[k] / std::sqrt(deg[i] * deg[j])});
    }
    entries.push_back({i, i, 1.0 / deg[i]});
  }
  return {SparseMatrix::from_coo(n, n, std::move(entries)), kind};
}

// c = s * d, row-parallel. Accumulation follows CSR entry order per row,
// which is independent of the thread count.
inline Tensor spmm(const SparseMatrix& s, const Tensor& d) {
  require(s.n_cols == d.rows, "spmm: inner dimensions differ");
  Tensor c(s.n_rows, d.cols);
  parallel_for(s.n_rows, [&](std::int64_t i) {
    double* crow = &c.data[i * c.cols];
    for (std::int64_t k = s.row_offsets[i]; k < s.row_offsets[i + 1]; ++k) {
      const double v = s.values[k];
      const double* drow = &d.data[s.col_indices[k] * d.cols];
      for (std::int64_t j = 0; j < d.cols; ++j) crow[j] += v * drow[j];
    }
  });
  return c;
}

}  // namespace dve
