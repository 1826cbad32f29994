#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppo/basis.hpp"
#include "ppo/matrix.hpp"
#include "ppo/rng.hpp"

namespace ppo {

// ---------------------------------------------------------------------------
// Segmentation

/// Cut a mono track into whole one-second rows and keep every
/// `factor`-th sample of each second (indices 0, factor, 2*factor, ...).
/// Trailing partial seconds are dropped.
inline SignalMatrix segment_and_downsample(std::span<const double> track,
                                           std::size_t sample_rate = 48000,
                                           std::size_t factor = 10) {
  require(sample_rate > 0 && factor > 0, "segment_and_downsample: zero rate or factor");
  if (track.size() < sample_rate) {
    throw std::invalid_argument("segment_and_downsample: track shorter than one second (" +
                                std::to_string(track.size()) + " samples)");
  }
  const std::size_t seconds = track.size() / sample_rate;
  const std::size_t cols = (sample_rate + factor - 1) / factor;
  SignalMatrix out(static_cast<Eigen::Index>(seconds), static_cast<Eigen::Index>(cols));
  for (std::size_t s = 0; s < seconds; ++s)
    for (std::size_t c = 0; c < cols; ++c)
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) =
          track[s * sample_rate + c * factor];
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic band-limited data

struct SyntheticData {
  SignalMatrix signals;
  /// Ground-truth coefficients, rows x D, zero outside the active set.
  CoefficientMatrix coefficients;
};

/// rows signals phi * alpha with alpha supported on active_indices and each
/// active amplitude drawn uniformly from [amp_lo, amp_hi).
inline SyntheticData synth_bandlimited_dataset(const TrigBasis& basis, std::size_t rows,
                                               const std::vector<std::size_t>& active_indices,
                                               double amp_lo, double amp_hi,
                                               std::uint64_t seed) {
  require(!active_indices.empty(), "synth_bandlimited_dataset: empty index set");
  require(amp_lo <= amp_hi, "synth_bandlimited_dataset: amplitude range reversed");
  for (auto k : active_indices) {
    if (k >= basis.dim()) {
      throw std::invalid_argument("synth_bandlimited_dataset: index " + std::to_string(k) +
                                  " outside 0.." + std::to_string(basis.dim() - 1));
    }
  }
  SyntheticData out;
  out.coefficients = CoefficientMatrix::Zero(static_cast<Eigen::Index>(rows),
                                             static_cast<Eigen::Index>(basis.dim()));
  CounterRng rng(derive_seed(seed, "synth"));
  for (Eigen::Index r = 0; r < out.coefficients.rows(); ++r)
    for (auto k : active_indices)
      out.coefficients(r, static_cast<Eigen::Index>(k)) = rng.uniform(amp_lo, amp_hi);
  out.signals = synthesize(basis, out.coefficients);
  return out;
}

// ---------------------------------------------------------------------------
// Scaling

enum class ScalerKind : std::uint8_t { none = 0, minmax = 1, standard = 2 };

inline std::string_view to_string(ScalerKind k) {
  switch (k) {
    case ScalerKind::none: return "none";
    case ScalerKind::minmax: return "minmax";
    case ScalerKind::standard: return "standard";
  }
  return "?";
}

inline std::optional<ScalerKind> parse_scaler_kind(std::string_view s) {
  for (auto k : {ScalerKind::none, ScalerKind::minmax, ScalerKind::standard})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

/// Per-column affine scaling fitted on training rows:
///   minmax:   x -> -1 + 2 (x - min) / (max - min)
///   standard: x -> (x - mean) / std  (population std)
/// Both are stored as scaled = (x - offset) * gain - shift so inversion is
/// uniform. Constant columns get gain 0 and land on 0.
struct ScalerParams {
  ScalerKind kind = ScalerKind::none;
  Vector first;   // min or mean
  Vector second;  // max or std

  bool fitted() const { return kind == ScalerKind::none || first.size() > 0; }
};

inline ScalerParams fit_scaler(const SignalMatrix& train, ScalerKind kind) {
  if (train.rows() == 0 || train.cols() == 0) throw std::invalid_argument("fit_scaler: empty input");
  ScalerParams p;
  p.kind = kind;
  switch (kind) {
    case ScalerKind::none: break;
    case ScalerKind::minmax:
      p.first = train.colwise().minCoeff().transpose();
      p.second = train.colwise().maxCoeff().transpose();
      break;
    case ScalerKind::standard: {
      p.first = train.colwise().mean().transpose();
      p.second.resize(train.cols());
      for (Eigen::Index c = 0; c < train.cols(); ++c) {
        const double var =
            (train.col(c).array() - p.first(c)).square().sum() / static_cast<double>(train.rows());
        p.second(c) = std::sqrt(var);
      }
      break;
    }
  }
  return p;
}

inline SignalMatrix apply_scaler(const ScalerParams& p, const SignalMatrix& data) {
  if (p.kind == ScalerKind::none) return data;
  if (!p.fitted()) throw std::logic_error("apply_scaler: scaler not fitted");
  require(data.cols() == p.first.size(), "apply_scaler: column count mismatch");
  SignalMatrix out(data.rows(), data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double a = p.first(c), b = p.second(c);
    if (p.kind == ScalerKind::minmax) {
      const double range = b - a;
      if (range > 0.0) {
        out.col(c) = ((data.col(c).array() - a) * (2.0 / range) - 1.0).matrix();
      } else {
        out.col(c).setZero();
      }
    } else {
      if (b > 0.0) {
        out.col(c) = ((data.col(c).array() - a) / b).matrix();
      } else {
        out.col(c) = (data.col(c).array() - a).matrix();
      }
    }
  }
  return out;
}

/// Inverse of apply_scaler. Constant minmax columns map back to their value.
inline SignalMatrix invert_scaler(const ScalerParams& p, const SignalMatrix& data) {
  if (p.kind == ScalerKind::none) return data;
  if (!p.fitted()) throw std::logic_error("invert_scaler: scaler not fitted");
  require(data.cols() == p.first.size(), "invert_scaler: column count mismatch");
  SignalMatrix out(data.rows(), data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double a = p.first(c), b = p.second(c);
    if (p.kind == ScalerKind::minmax) {
      const double range = b - a;
      if (range > 0.0) {
        out.col(c) = ((data.col(c).array() + 1.0) * (range / 2.0) + a).matrix();
      } else {
        out.col(c).setConstant(a);
      }
    } else {
      const double gain = b > 0.0 ? b : 1.0;
      out.col(c) = (data.col(c).array() * gain + a).matrix();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise models

enum class NoiseKind : std::uint8_t { clean = 0, shuffle = 1, outliers = 2 };

inline std::string_view to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::clean: return "clean";
    case NoiseKind::shuffle: return "shuffle";
    case NoiseKind::outliers: return "outliers";
  }
  return "?";
}

inline std::optional<NoiseKind> parse_noise_kind(std::string_view s) {
  for (auto k : {NoiseKind::clean, NoiseKind::shuffle, NoiseKind::outliers})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::clean;
  std::uint64_t seed = 0;
};

/// Uniformly random permutation of 0..n-1 (Fisher-Yates).
inline std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterRng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

/// noisy row r = clean row r + clean row perm[r].
inline SignalMatrix add_shuffle_noise(const SignalMatrix& clean,
                                      const std::vector<std::size_t>& perm) {
  require(static_cast<Eigen::Index>(perm.size()) == clean.rows(),
          "add_shuffle_noise: permutation length mismatch");
  SignalMatrix noisy = clean;
  for (Eigen::Index r = 0; r < clean.rows(); ++r)
    noisy.row(r) += clean.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)]));
  return noisy;
}

/// Adds a row-permuted copy of the data to itself, so different segments'
/// frequencies collide.
inline SignalMatrix add_shuffle_noise(const SignalMatrix& clean, std::uint64_t seed) {
  require(clean.rows() >= 1, "add_shuffle_noise: need at least one row");
  return add_shuffle_noise(
      clean, random_permutation(static_cast<std::size_t>(clean.rows()), derive_seed(seed, "shuffle")));
}

/// The outlier scale factor for entry (row, col), uniform on [1, 2).
inline double outlier_factor(std::uint64_t seed, std::uint64_t row, std::uint64_t col,
                             std::uint64_t cols) {
  static constexpr std::uint64_t kStream = tag_hash("outliers");
  const CounterRng rng(seed ^ kStream);
  return 1.0 + CounterRng::to_unit(rng.at(row * cols + col));
}

/// Multiplies every entry by its own independent draw from [1, 2).
inline SignalMatrix add_outlier_noise(const SignalMatrix& clean, std::uint64_t seed) {
  SignalMatrix noisy(clean.rows(), clean.cols());
  const auto cols = static_cast<std::uint64_t>(clean.cols());
  for (Eigen::Index r = 0; r < clean.rows(); ++r)
    for (Eigen::Index c = 0; c < clean.cols(); ++c)
      noisy(r, c) = clean(r, c) * outlier_factor(seed, static_cast<std::uint64_t>(r),
                                                 static_cast<std::uint64_t>(c), cols);
  return noisy;
}

inline SignalMatrix apply_noise(const NoiseSpec& spec, const SignalMatrix& clean) {
  switch (spec.kind) {
    case NoiseKind::clean: return clean;
    case NoiseKind::shuffle: return add_shuffle_noise(clean, spec.seed);
    case NoiseKind::outliers: return add_outlier_noise(clean, spec.seed);
  }
  return clean;
}

// ---------------------------------------------------------------------------
// Splitting

struct RowSplit {
  std::vector<std::size_t> first;   // train
  std::vector<std::size_t> second;  // held out
};

/// Random disjoint partition of 0..rows-1; the held-out part gets
/// round(fraction * rows) rows. Index lists are sorted.
inline RowSplit split_rows(std::size_t rows, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, "split_rows: fraction must lie in (0, 1)");
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows)));
  require(held >= 1 && held < rows, "split_rows: split of " + std::to_string(rows) +
                                        " rows leaves an empty side");
  auto perm = random_permutation(rows, derive_seed(seed, "split"));
  RowSplit s;
  s.second.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(held));
  s.first.assign(perm.begin() + static_cast<std::ptrdiff_t>(held), perm.end());
  std::sort(s.first.begin(), s.first.end());
  std::sort(s.second.begin(), s.second.end());
  return s;
}

struct DataSplit {
  SignalMatrix train;
  SignalMatrix eval;
  RowSplit rows;
};

/// Shuffled train/evaluation split (default 80/20).
inline DataSplit shuffle_split(const SignalMatrix& data, double eval_fraction = 0.2,
                               std::uint64_t seed = 0) {
  if (data.rows() < 5) {
    throw std::invalid_argument("shuffle_split: need at least 5 rows, got " +
                                std::to_string(data.rows()));
  }
  DataSplit out;
  out.rows = split_rows(static_cast<std::size_t>(data.rows()), eval_fraction, seed);
  out.train = take_rows(data, out.rows.first);
  out.eval = take_rows(data, out.rows.second);
  return out;
}

}  // namespace ppo
