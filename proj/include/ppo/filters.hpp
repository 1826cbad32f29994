#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppo/basis.hpp"
#include "ppo/matrix.hpp"
#include "ppo/nn.hpp"

namespace ppo {

enum class MaskKind { binary, soft };

/// Diagonal weighting of basis coefficients. Binary masks hold only 0 and 1
/// (projection operator); soft masks hold values in [0, 1] (pseudo projection).
class Mask {
 public:
  static Mask binary(Vector weights) {
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
      if (weights(k) != 0.0 && weights(k) != 1.0) {
        throw std::invalid_argument("Mask::binary: weight " + std::to_string(k) +
                                    " is not 0 or 1");
      }
    }
    return Mask(std::move(weights), MaskKind::binary);
  }

  static Mask soft(Vector weights) {
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
      if (!(weights(k) >= 0.0 && weights(k) <= 1.0)) {
        throw std::invalid_argument("Mask::soft: weight " + std::to_string(k) +
                                    " outside [0, 1]");
      }
    }
    return Mask(std::move(weights), MaskKind::soft);
  }

  /// Keeps every coefficient.
  static Mask all_pass(std::size_t dim) {
    return Mask(Vector::Ones(static_cast<Eigen::Index>(dim)), MaskKind::binary);
  }

  static Mask constant(std::size_t dim, double value) {
    return soft(Vector::Constant(static_cast<Eigen::Index>(dim), value));
  }

  const Vector& weights() const noexcept { return weights_; }
  MaskKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  double operator[](std::size_t k) const { return weights_(static_cast<Eigen::Index>(k)); }

 private:
  Mask(Vector w, MaskKind kind) : weights_(std::move(w)), kind_(kind) {}

  Vector weights_;
  MaskKind kind_;
};

/// weight_k = 1 iff |coeffs_k| > tau (strict).
inline Mask threshold_mask(const Vector& coeffs, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("threshold_mask: tau must be >= 0");
  return Mask::binary(
      coeffs.unaryExpr([tau](double c) { return std::abs(c) > tau ? 1.0 : 0.0; }));
}

/// Phi * diag(mask) * Phi^T applied to every row of signal.
inline SignalMatrix apply_projection(const TrigBasis& basis, const Mask& mask,
                                     const SignalMatrix& signal) {
  if (mask.size() != basis.dim()) {
    throw std::invalid_argument("apply_projection: mask length " + std::to_string(mask.size()) +
                                " != basis dimension " + std::to_string(basis.dim()));
  }
  CoefficientMatrix coeffs = analyze(basis, signal);
  coeffs.array().rowwise() *= mask.weights().transpose().array();
  return synthesize(basis, coeffs);
}

/// Row-wise masking: row r of masks weights the coefficients of signal row r.
inline SignalMatrix apply_row_masks(const TrigBasis& basis, const Matrix& masks,
                                    const SignalMatrix& signal) {
  const CoefficientMatrix coeffs = analyze(basis, signal);
  require_shape(masks, coeffs.rows(), coeffs.cols(), "apply_row_masks: masks");
  return synthesize(basis, masks.cwiseProduct(coeffs));
}

/// Explicit M x M matrix Phi * diag(mask) * Phi^T.
inline Matrix projection_matrix(const TrigBasis& basis, const Mask& mask) {
  require(mask.size() == basis.dim(), "projection_matrix: mask length mismatch");
  return basis.phi() * mask.weights().asDiagonal() * basis.phi().transpose();
}

/// Rule-based projection filter: each row keeps the coefficients whose
/// magnitude exceeds tau in that row. No threshold means all-pass.
inline SignalMatrix threshold_filter(const TrigBasis& basis, const SignalMatrix& signal,
                                     std::optional<double> tau) {
  CoefficientMatrix coeffs = analyze(basis, signal);
  if (tau) {
    if (!(*tau >= 0.0)) throw std::invalid_argument("threshold_filter: tau must be >= 0");
    const double t = *tau;
    coeffs = coeffs.unaryExpr([t](double c) { return std::abs(c) > t ? c : 0.0; });
  }
  return synthesize(basis, coeffs);
}

struct PpoOutput {
  SignalMatrix filtered;
  /// One soft mask per input row, rows x D, entries in (0, 1).
  Matrix masks;

  Mask mask(Eigen::Index row) const { return Mask::soft(masks.row(row).transpose()); }
};

/// Pseudo projection operator: the raw signal feeds both the analysis
/// operator and the mask network, and the network output weights the
/// coefficients before synthesis.
inline PpoOutput ppo_forward(const TrigBasis& basis, const Mlp& network, const SignalMatrix& signal) {
  if (network.layers.empty() || network.input_dim() != basis.samples() ||
      network.output_dim() != basis.dim()) {
    throw std::invalid_argument("ppo_forward: network maps " + std::to_string(network.input_dim()) +
                                " -> " + std::to_string(network.output_dim()) +
                                ", basis needs " + std::to_string(basis.samples()) + " -> " +
                                std::to_string(basis.dim()));
  }
  if (network.output_activation() != Activation::sigmoid) {
    throw std::invalid_argument("ppo_forward: mask network must end in a sigmoid");
  }
  PpoOutput out;
  out.masks = mlp_predict(network, signal);
  out.filtered = apply_row_masks(basis, out.masks, signal);
  return out;
}

}  // namespace ppo
