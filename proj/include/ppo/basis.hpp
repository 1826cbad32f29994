#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ppo/matrix.hpp"

namespace ppo {

/// Discrete trigonometric orthonormal basis sampled on the uniform grid
/// x_j = 2*pi*j/M, j = 0..M-1.
///
/// Column layout (D = 2N + 2 columns):
///   column 2k     = cos(k x),       k = 0..N
///   column 2k + 1 = sin((k + 1) x), k = 0..N
/// Each column is scaled to unit Euclidean norm, so phi^T phi = I_D.
/// The sine frequencies start at 1 because sin(0 x) is identically zero.
///
/// phi is the synthesis operator, phi^T the analysis operator. Immutable once
/// built and safe to share between threads.
class TrigBasis {
 public:
  static TrigBasis build(std::size_t samples, std::size_t max_index) {
    if (samples < 4) {
      throw std::invalid_argument("build_trig_basis: need at least 4 samples, got " +
                                  std::to_string(samples));
    }
    if (max_index + 1 > (samples - 1) / 2) {
      throw std::invalid_argument(
          "build_trig_basis: max_index + 1 = " + std::to_string(max_index + 1) +
          " exceeds floor((M - 1) / 2) = " + std::to_string((samples - 1) / 2) +
          " (aliased or degenerate columns)");
    }
    return TrigBasis(samples, max_index);
  }

  std::size_t samples() const noexcept { return samples_; }
  std::size_t max_index() const noexcept { return max_index_; }
  std::size_t dim() const noexcept { return 2 * max_index_ + 2; }

  const Vector& grid() const noexcept { return grid_; }
  /// M x D synthesis matrix.
  const Matrix& phi() const noexcept { return phi_; }

  static constexpr std::size_t cos_column(std::size_t k) noexcept { return 2 * k; }
  static constexpr std::size_t sin_column(std::size_t k) noexcept { return 2 * (k - 1) + 1; }
  /// Integer frequency carried by a column.
  static constexpr std::size_t frequency_of(std::size_t column) noexcept {
    return column % 2 == 0 ? column / 2 : column / 2 + 1;
  }

 private:
  TrigBasis(std::size_t samples, std::size_t max_index)
      : samples_(samples), max_index_(max_index) {
    const auto m = static_cast<Eigen::Index>(samples);
    const auto d = static_cast<Eigen::Index>(dim());
    const double step = 2.0 * std::numbers::pi / static_cast<double>(samples);
    grid_.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) grid_(j) = step * static_cast<double>(j);

    // Reduce k*j modulo M before scaling so large products keep full accuracy.
    phi_.resize(m, d);
    for (std::size_t k = 0; k <= max_index_; ++k) {
      const auto c = static_cast<Eigen::Index>(cos_column(k));
      const auto s = static_cast<Eigen::Index>(sin_column(k + 1));
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        phi_(j, c) = std::cos(step * static_cast<double>((k * uj) % samples_));
        phi_(j, s) = std::sin(step * static_cast<double>(((k + 1) * uj) % samples_));
      }
    }
    for (Eigen::Index c = 0; c < d; ++c) phi_.col(c).normalize();
  }

  std::size_t samples_;
  std::size_t max_index_;
  Vector grid_;
  Matrix phi_;
};

/// Analysis operator: row r of the result is phi^T times signal row r.
inline CoefficientMatrix analyze(const TrigBasis& basis, const SignalMatrix& signal) {
  if (static_cast<std::size_t>(signal.cols()) != basis.samples()) {
    throw std::invalid_argument("analyze: signal has " + std::to_string(signal.cols()) +
                                " samples, basis expects " + std::to_string(basis.samples()));
  }
  return signal * basis.phi();
}

/// Synthesis operator: row r of the result is phi times coefficient row r.
inline SignalMatrix synthesize(const TrigBasis& basis, const CoefficientMatrix& coeffs) {
  if (static_cast<std::size_t>(coeffs.cols()) != basis.dim()) {
    throw std::invalid_argument("synthesize: coefficients have length " +
                                std::to_string(coeffs.cols()) + ", basis expects " +
                                std::to_string(basis.dim()));
  }
  return coeffs * basis.phi().transpose();
}

}  // namespace ppo
