#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppo/basis.hpp"
#include "ppo/data.hpp"
#include "ppo/filters.hpp"
#include "ppo/nn.hpp"

namespace ppo {

enum class OptimizerKind { adam, sgd };

/// Produces noisy inputs for a block of clean rows; the seed fully determines
/// the realization.
using NoiseFn = std::function<SignalMatrix(const SignalMatrix& clean, std::uint64_t seed)>;

struct TrainConfig {
  ModelKind model = ModelKind::ppo1;
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  std::vector<double> learning_rates{1e-2, 1e-3, 1e-4, 1e-5};
  double l2 = 1e-5;
  double validation_fraction = 0.2;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  /// Replaces the noise model named by `noise.kind` when set (seeds still
  /// derive from `noise.seed`).
  NoiseFn custom_noise;

  void validate() const {
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(!learning_rates.empty(), "TrainConfig: no learning rates");
    for (double lr : learning_rates) require(lr > 0.0, "TrainConfig: learning rates must be positive");
    require(l2 >= 0.0, "TrainConfig: l2 must be non-negative");
    require(validation_fraction > 0.0 && validation_fraction < 1.0,
            "TrainConfig: validation_fraction must lie in (0, 1)");
  }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_mse;
  std::vector<double> wall_seconds;
  std::size_t best_epoch = 0;

  std::size_t size() const { return train_loss.size(); }
  double best_val_mse() const {
    return val_mse.empty() ? std::numeric_limits<double>::infinity() : val_mse[best_epoch];
  }
};

// ---------------------------------------------------------------------------
// Optimizers

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam update with bias correction; `step` is 1-based.
inline void adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<double> m, std::span<double> v, std::uint64_t step, double lr,
                        const AdamConstants& c = {}) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw std::invalid_argument("adam_update: shape mismatch");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grads[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.epsilon);
  }
}

/// First and second moments for every parameter of an Mlp.
struct AdamState {
  GradientSet m;
  GradientSet v;
  std::uint64_t step = 0;
  AdamConstants constants;

  static AdamState zeros_like(const Mlp& model) {
    AdamState s;
    for (const auto& l : model.layers) {
      s.m.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    }
    s.v = s.m;
    return s;
  }
};

namespace detail {

template <typename Dense>
std::span<double> flat(Dense& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}
template <typename Dense>
std::span<const double> flat(const Dense& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}

inline void check_grad_shapes(const Mlp& model, const GradientSet& g, const char* who) {
  if (g.layers.size() != model.layers.size()) throw std::invalid_argument(std::string(who) + ": shape mismatch");
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (g.layers[i].weight.rows() != l.weight.rows() || g.layers[i].weight.cols() != l.weight.cols() ||
        g.layers[i].bias.size() != l.bias.size()) {
      throw std::invalid_argument(std::string(who) + ": shape mismatch in layer " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline void adam_step(Mlp& model, const GradientSet& grads, AdamState& state, double lr) {
  detail::check_grad_shapes(model, grads, "adam_step");
  detail::check_grad_shapes(model, state.m, "adam_step");
  detail::check_grad_shapes(model, state.v, "adam_step");
  ++state.step;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    adam_update(detail::flat(l.weight), detail::flat(grads.layers[i].weight),
                detail::flat(state.m.layers[i].weight), detail::flat(state.v.layers[i].weight),
                state.step, lr, state.constants);
    adam_update(detail::flat(l.bias), detail::flat(grads.layers[i].bias),
                detail::flat(state.m.layers[i].bias), detail::flat(state.v.layers[i].bias),
                state.step, lr, state.constants);
  }
}

inline void sgd_step(Mlp& model, const GradientSet& grads, double lr) {
  detail::check_grad_shapes(model, grads, "sgd_step");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    model.layers[i].weight -= lr * grads.layers[i].weight;
    model.layers[i].bias -= lr * grads.layers[i].bias;
  }
}

// ---------------------------------------------------------------------------
// Model evaluation

/// Filtered output of a trained model: the pseudo projection output for a
/// sigmoid-headed mask network, the network output itself for an autoencoder.
inline SignalMatrix model_predict(const TrigBasis& basis, const Mlp& model, const SignalMatrix& noisy) {
  if (model.output_activation() == Activation::sigmoid) return ppo_forward(basis, model, noisy).filtered;
  return mlp_predict(model, noisy);
}

inline double mse(const Matrix& predicted, const Matrix& target) {
  require_shape(predicted, target.rows(), target.cols(), "mse: predicted");
  require(target.size() > 0, "mse: empty input");
  return (predicted - target).squaredNorm() / static_cast<double>(target.size());
}

inline LossAndGrad model_loss_and_grad(ModelKind kind, const TrigBasis& basis, const Mlp& model,
                                       const SignalMatrix& noisy, const SignalMatrix& clean, double l2) {
  return is_ppo(kind) ? ppo_loss_and_grad(basis, model, noisy, clean, l2)
                      : dae_loss_and_grad(model, noisy, clean, l2);
}

// ---------------------------------------------------------------------------
// Training loop

/// Noise realization for one epoch. The stream tag keeps training and
/// validation draws independent of each other.
inline SignalMatrix epoch_noisy_inputs(const NoiseSpec& noise, const SignalMatrix& clean,
                                       std::string_view stream, std::size_t epoch) {
  return apply_noise({noise.kind, derive_seed(noise.seed, stream, epoch)}, clean);
}

inline SignalMatrix epoch_noisy_inputs(const TrainConfig& config, const SignalMatrix& clean,
                                       std::string_view stream, std::size_t epoch) {
  if (config.custom_noise) return config.custom_noise(clean, derive_seed(config.noise.seed, stream, epoch));
  return epoch_noisy_inputs(config.noise, clean, stream, epoch);
}

struct TrainResult {
  Mlp best_model;
  TrainHistory history;
  double learning_rate = 0.0;
  bool diverged = false;
  std::string diagnostic;
  /// Row indices (into clean_train) used for fitting and for validation.
  RowSplit rows;
};

/// Train one model at a single learning rate. Each epoch draws fresh noisy
/// inputs from the clean rows, runs shuffled minibatches, and scores the
/// validation rows; the returned model is the snapshot with the lowest
/// validation MSE. A non-finite loss stops the run and sets `diverged`.
inline TrainResult train(const TrainConfig& config, const TrigBasis& basis,
                         const SignalMatrix& clean_train, double learning_rate) {
  config.validate();
  require(learning_rate > 0.0, "train: learning rate must be positive");
  require(static_cast<std::size_t>(clean_train.cols()) == basis.samples(),
          "train: data has " + std::to_string(clean_train.cols()) + " samples, basis expects " +
              std::to_string(basis.samples()));

  TrainResult result;
  result.learning_rate = learning_rate;
  result.rows = split_rows(static_cast<std::size_t>(clean_train.rows()), config.validation_fraction,
                           derive_seed(config.seed, "validation"));
  const SignalMatrix fit_clean = take_rows(clean_train, result.rows.first);
  const SignalMatrix val_clean = take_rows(clean_train, result.rows.second);

  Mlp model = make_model(config.model, basis.samples(), basis.dim(), derive_seed(config.seed, "init"));
  AdamState adam = AdamState::zeros_like(model);
  result.best_model = model;
  double best_val = std::numeric_limits<double>::infinity();

  const auto fit_rows = static_cast<std::size_t>(fit_clean.rows());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const SignalMatrix fit_noisy = epoch_noisy_inputs(config, fit_clean, "train-noise", epoch);
    const auto order = random_permutation(fit_rows, derive_seed(config.seed, "order", epoch));

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < fit_rows; begin += config.batch_size) {
      const std::size_t end = std::min(fit_rows, begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const SignalMatrix noisy = take_rows(fit_noisy, batch);
      const SignalMatrix clean = take_rows(fit_clean, batch);
      LossAndGrad lg = model_loss_and_grad(config.model, basis, model, noisy, clean, config.l2);
      if (!std::isfinite(lg.loss)) {
        result.diverged = true;
        result.diagnostic = "non-finite training loss at epoch " + std::to_string(epoch) +
                            " (learning rate " + std::to_string(learning_rate) + ")";
        break;
      }
      loss_sum += lg.loss * static_cast<double>(end - begin);
      if (config.optimizer == OptimizerKind::adam) {
        adam_step(model, lg.grads, adam, learning_rate);
      } else {
        sgd_step(model, lg.grads, learning_rate);
      }
    }
    if (result.diverged) break;

    const SignalMatrix val_noisy = epoch_noisy_inputs(config, val_clean, "val-noise", epoch);
    const double val = mse(model_predict(basis, model, val_noisy), val_clean);
    if (!std::isfinite(val)) {
      result.diverged = true;
      result.diagnostic = "non-finite validation MSE at epoch " + std::to_string(epoch) +
                          " (learning rate " + std::to_string(learning_rate) + ")";
      break;
    }
    result.history.train_loss.push_back(loss_sum / static_cast<double>(fit_rows));
    result.history.val_mse.push_back(val);
    result.history.wall_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (val < best_val) {
      best_val = val;
      result.history.best_epoch = epoch;
      result.best_model = model;
    }
  }
  return result;
}

struct SweepResult {
  std::size_t best_index = 0;
  double best_lr = 0.0;
  Mlp best_model;
  std::vector<TrainResult> runs;

  const TrainResult& best() const { return runs[best_index]; }
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Train once per learning rate and keep the run with the lowest validation
/// MSE. Diverged runs are excluded. Only training rows are ever seen here.
inline SweepResult lr_sweep_select(const TrainConfig& config, const TrigBasis& basis,
                                   const SignalMatrix& clean_train) {
  config.validate();
  SweepResult sweep;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < config.learning_rates.size(); ++i) {
    sweep.runs.push_back(train(config, basis, clean_train, config.learning_rates[i]));
    const auto& run = sweep.runs.back();
    if (run.diverged || run.history.size() == 0) continue;
    if (!any || run.history.best_val_mse() < best) {
      any = true;
      best = run.history.best_val_mse();
      sweep.best_index = i;
    }
  }
  if (!any) {
    std::string why = "lr_sweep_select: every learning rate diverged";
    for (const auto& r : sweep.runs) why += "; " + r.diagnostic;
    throw TrainingError(why);
  }
  sweep.best_lr = config.learning_rates[sweep.best_index];
  sweep.best_model = sweep.runs[sweep.best_index].best_model;
  return sweep;
}

inline std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,train_loss,val_mse\n";
  char line[96];
  for (std::size_t e = 0; e < h.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", e, h.train_loss[e], h.val_mse[e]);
    out += line;
  }
  return out;
}

}  // namespace ppo
