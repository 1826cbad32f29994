#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ppo {

/// Row-major dense matrix: one trial (signal or coefficient vector) per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// trials x samples. Elements of the signal space, one per row.
using SignalMatrix = Matrix;
/// trials x D. Basis coefficients, one coefficient vector per row.
using CoefficientMatrix = Matrix;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                          const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) +
                                "x" + std::to_string(cols) + ", got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

/// Gather a subset of rows.
template <typename Indices>
Matrix take_rows(const Matrix& m, const Indices& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  Eigen::Index r = 0;
  for (auto i : rows) out.row(r++) = m.row(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace ppo
