#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppo/basis.hpp"
#include "ppo/matrix.hpp"
#include "ppo/rng.hpp"

namespace ppo {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, affine = 2 };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::affine: return "affine";
  }
  return "?";
}

/// Logistic function evaluated without overflow for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// One fully connected layer: post = act(pre), pre = in * weight^T + bias.
struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::affine;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Feed-forward network. Used as the mask generator of the pseudo projection
/// operator (sigmoid head) and as the denoising autoencoder (affine head).
struct Mlp {
  std::vector<Layer> layers;

  std::size_t input_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().in_dim());
  }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().out_dim());
  }
  Activation output_activation() const { return layers.back().activation; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Throws if consecutive layer shapes disagree or any parameter is non-finite.
  void validate() const {
    require(!layers.empty(), "Mlp: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      require(l.bias.size() == l.out_dim(), "Mlp: bias length mismatch in layer " + std::to_string(i));
      require(l.in_dim() > 0 && l.out_dim() > 0, "Mlp: empty layer " + std::to_string(i));
      if (i > 0) {
        require(layers[i - 1].out_dim() == l.in_dim(),
                "Mlp: layer " + std::to_string(i) + " input does not match previous output");
      }
      require(l.weight.allFinite() && l.bias.allFinite(),
              "Mlp: non-finite parameters in layer " + std::to_string(i));
    }
  }

  bool operator==(const Mlp& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& a = layers[i];
      const auto& b = other.layers[i];
      if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
          a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias) {
        return false;
      }
    }
    return true;
  }
};

struct LayerGrad {
  Matrix weight;
  Vector bias;
};

/// Gradients with shapes mirroring an Mlp.
struct GradientSet {
  std::vector<LayerGrad> layers;
};

/// Uniform(-a, a) weights with a = sqrt(1 / fan_in), zero biases.
/// Deterministic in seed.
inline Mlp mlp_init(const std::vector<std::size_t>& layer_dims,
                    const std::vector<Activation>& activations, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("mlp_init: need at least one layer");
  if (activations.size() != layer_dims.size() - 1) {
    throw std::invalid_argument("mlp_init: " + std::to_string(activations.size()) +
                                " activations for " + std::to_string(layer_dims.size() - 1) +
                                " layers");
  }
  for (auto d : layer_dims) {
    if (d == 0) throw std::invalid_argument("mlp_init: zero layer dimension");
  }
  Mlp model;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(layer_dims[i]);
    const auto out = static_cast<Eigen::Index>(layer_dims[i + 1]);
    const double a = std::sqrt(1.0 / static_cast<double>(in));
    CounterRng rng(derive_seed(seed, "mlp_init", i));
    Layer layer{Matrix(out, in), Vector::Zero(out), activations[i]};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-a, a);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// Pre- and post-activation values of every layer; post[0] is the input.
struct ForwardCache {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

inline void activate(Activation act, Matrix& m) {
  switch (act) {
    case Activation::relu: m = m.cwiseMax(0.0); break;
    case Activation::sigmoid: m = m.unaryExpr([](double x) { return sigmoid(x); }); break;
    case Activation::affine: break;
  }
}

inline ForwardCache mlp_forward(const Mlp& model, const Matrix& input) {
  if (model.layers.empty()) throw std::invalid_argument("mlp_forward: empty model");
  if (static_cast<std::size_t>(input.cols()) != model.input_dim()) {
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.cols()) +
                                " columns, model expects " + std::to_string(model.input_dim()));
  }
  ForwardCache cache;
  cache.pre.reserve(model.layers.size());
  cache.post.reserve(model.layers.size() + 1);
  cache.post.push_back(input);
  for (const auto& layer : model.layers) {
    Matrix z = cache.post.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    Matrix a = z;
    activate(layer.activation, a);
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(a));
  }
  return cache;
}

inline Matrix mlp_predict(const Mlp& model, const Matrix& input) {
  return mlp_forward(model, input).post.back();
}

/// Backpropagate d(loss)/d(output) through the cached forward pass. Adds the
/// L2 term 2*l2*W to weight gradients (biases are not regularized).
inline GradientSet mlp_backward(const Mlp& model, const ForwardCache& cache, Matrix grad_output,
                                double l2) {
  GradientSet grads;
  grads.layers.resize(model.layers.size());
  Matrix delta = std::move(grad_output);
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const auto& layer = model.layers[i];
    switch (layer.activation) {
      case Activation::relu:
        delta = delta.cwiseProduct(
            cache.pre[i].unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; }));
        break;
      case Activation::sigmoid: {
        const Matrix& s = cache.post[i + 1];
        delta = delta.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
        break;
      }
      case Activation::affine: break;
    }
    auto& g = grads.layers[i];
    g.weight = delta.transpose() * cache.post[i];
    if (l2 != 0.0) g.weight += (2.0 * l2) * layer.weight;
    g.bias = delta.colwise().sum().transpose();
    if (i > 0) delta = delta * layer.weight;
  }
  return grads;
}

inline double l2_penalty(const Mlp& model, double l2) {
  if (l2 == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& l : model.layers) s += l.weight.squaredNorm();
  return l2 * s;
}

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads;
};

/// Mean squared error of the pseudo projection output against the clean
/// target, plus l2 * sum ||W||^2:
///   out = phi * (net(noisy) .* (phi^T noisy))
/// phi is fixed and receives no gradient.
inline LossAndGrad ppo_loss_and_grad(const TrigBasis& basis, const Mlp& model,
                                     const SignalMatrix& noisy, const SignalMatrix& clean,
                                     double l2) {
  require(l2 >= 0.0, "ppo_loss_and_grad: l2 must be non-negative");
  require(model.input_dim() == basis.samples() && model.output_dim() == basis.dim(),
          "ppo_loss_and_grad: network I/O does not match basis");
  require_shape(clean, noisy.rows(), noisy.cols(), "ppo_loss_and_grad: clean");
  const CoefficientMatrix coeffs = analyze(basis, noisy);
  ForwardCache cache = mlp_forward(model, noisy);
  const Matrix& mask = cache.output();
  const SignalMatrix residual = synthesize(basis, mask.cwiseProduct(coeffs)) - clean;
  const double n = static_cast<double>(residual.size());

  LossAndGrad out;
  out.loss = residual.squaredNorm() / n + l2_penalty(model, l2);
  const Matrix grad_mask = ((2.0 / n) * residual * basis.phi()).cwiseProduct(coeffs);
  out.grads = mlp_backward(model, cache, grad_mask, l2);
  return out;
}

/// Mean squared error of the network output against the clean target plus L2.
inline LossAndGrad dae_loss_and_grad(const Mlp& model, const SignalMatrix& noisy,
                                     const SignalMatrix& clean, double l2) {
  require(l2 >= 0.0, "dae_loss_and_grad: l2 must be non-negative");
  require_shape(clean, noisy.rows(), static_cast<Eigen::Index>(model.output_dim()),
                "dae_loss_and_grad: clean");
  ForwardCache cache = mlp_forward(model, noisy);
  const Matrix residual = cache.output() - clean;
  const double n = static_cast<double>(residual.size());
  LossAndGrad out;
  out.loss = residual.squaredNorm() / n + l2_penalty(model, l2);
  out.grads = mlp_backward(model, cache, (2.0 / n) * residual, l2);
  return out;
}

// ---------------------------------------------------------------------------
// Model families

enum class ModelKind { ppo1, ppo2, ppo3, dae1, dae2, dae3 };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ppo1: return "PPO1";
    case ModelKind::ppo2: return "PPO2";
    case ModelKind::ppo3: return "PPO3";
    case ModelKind::dae1: return "DAE1";
    case ModelKind::dae2: return "DAE2";
    case ModelKind::dae3: return "DAE3";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::ppo1, ModelKind::ppo2, ModelKind::ppo3, ModelKind::dae1,
                 ModelKind::dae2, ModelKind::dae3}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

inline bool is_ppo(ModelKind k) {
  return k == ModelKind::ppo1 || k == ModelKind::ppo2 || k == ModelKind::ppo3;
}

inline int depth(ModelKind k) {
  switch (k) {
    case ModelKind::ppo1: case ModelKind::dae1: return 1;
    case ModelKind::ppo2: case ModelKind::dae2: return 2;
    case ModelKind::ppo3: case ModelKind::dae3: return 3;
  }
  return 0;
}

struct LayerPlan {
  std::vector<std::size_t> dims;
  std::vector<Activation> activations;
};

/// Layer widths for a model family given M input samples and D coefficients.
/// Hidden widths sit at fixed fractions of the way from D to M, chosen so that
/// (M, D) = (4800, 2048) reproduces 4800 -> 3200 -> 2432 -> 2048 exactly.
/// PPOx maps M -> ... -> D with a sigmoid head. DAEx encodes M -> ... -> D and
/// decodes along the reversed widths back to M with an affine head.
inline LayerPlan layer_plan(ModelKind kind, std::size_t samples, std::size_t coeffs) {
  require(samples > 0 && coeffs > 0, "layer_plan: empty geometry");
  auto width = [&](double frac) {
    const double w = static_cast<double>(coeffs) +
                     frac * (static_cast<double>(samples) - static_cast<double>(coeffs));
    return static_cast<std::size_t>(std::max(1.0, std::round(w)));
  };
  const std::size_t wide = width(1152.0 / 2752.0);
  const std::size_t narrow = width(384.0 / 2752.0);

  std::vector<std::size_t> encoder{samples};
  const int d = depth(kind);
  if (d >= 3) encoder.push_back(wide);
  if (d >= 2) encoder.push_back(narrow);
  encoder.push_back(coeffs);

  LayerPlan plan;
  plan.dims = encoder;
  if (is_ppo(kind)) {
    plan.activations.assign(encoder.size() - 1, Activation::relu);
    plan.activations.back() = Activation::sigmoid;
  } else {
    for (auto it = encoder.rbegin() + 1; it != encoder.rend(); ++it) plan.dims.push_back(*it);
    plan.activations.assign(plan.dims.size() - 1, Activation::relu);
    plan.activations.back() = Activation::affine;
  }
  return plan;
}

inline Mlp make_model(ModelKind kind, std::size_t samples, std::size_t coeffs, std::uint64_t seed) {
  const auto plan = layer_plan(kind, samples, coeffs);
  return mlp_init(plan.dims, plan.activations, seed);
}

}  // namespace ppo
