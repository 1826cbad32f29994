#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppo/basis.hpp"
#include "ppo/data.hpp"
#include "ppo/filters.hpp"
#include "ppo/io.hpp"
#include "ppo/training.hpp"
#include "ppo/wav.hpp"

namespace ppo {

// ---------------------------------------------------------------------------
// Models under comparison

/// A learnable family, or a rule-based projection filter with an optional
/// magnitude threshold (no threshold = all-pass).
struct ModelSpec {
  std::variant<ModelKind, std::optional<double>> what;

  bool learnable() const { return std::holds_alternative<ModelKind>(what); }
  ModelKind kind() const { return std::get<ModelKind>(what); }
  std::optional<double> threshold() const { return std::get<std::optional<double>>(what); }

  std::string name() const {
    if (learnable()) return std::string(to_string(kind()));
    const auto t = threshold();
    if (!t) return "PO";
    char buf[40];
    std::snprintf(buf, sizeof buf, "PO %g", *t);
    return buf;
  }

  static ModelSpec parse(const std::string& s) {
    if (auto k = parse_model_kind(s)) return {*k};
    if (s == "PO") return {std::optional<double>{}};
    if (s.starts_with("PO ")) {
      std::size_t used = 0;
      double t = 0.0;
      try {
        t = std::stod(s.substr(3), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == s.size() - 3 && t >= 0.0) return {std::optional<double>{t}};
    }
    throw std::invalid_argument("unknown model '" + s + "' (expected PPO1..3, DAE1..3, PO or 'PO <threshold>')");
  }
};

// ---------------------------------------------------------------------------
// Configuration

enum class SourceKind { synthetic, wav_dir, dataset_file };

struct SyntheticSpec {
  std::size_t rows = 2000;
  std::size_t samples = 256;
  std::vector<std::size_t> active_indices{1, 2, 5, 6, 9, 12, 17, 20, 26, 33, 41, 50};
  double amplitude_min = -1.0;
  double amplitude_max = 1.0;
};

struct ExperimentConfig {
  SourceKind source = SourceKind::synthetic;
  std::filesystem::path path;  // wav directory or dataset file
  SyntheticSpec synthetic;
  std::size_t max_index = 31;
  double eval_fraction = 0.2;
  std::vector<ScalerKind> scalers{ScalerKind::standard};
  std::vector<NoiseKind> noises{NoiseKind::clean};
  std::vector<ModelSpec> models;
  TrainConfig train;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;

  void validate() const {
    require(!models.empty(), "ExperimentConfig: no models");
    require(!scalers.empty(), "ExperimentConfig: no scalers");
    require(!noises.empty(), "ExperimentConfig: no noise kinds");
    require(eval_fraction > 0.0 && eval_fraction < 1.0, "ExperimentConfig: eval_fraction must lie in (0, 1)");
    if (source != SourceKind::synthetic && !std::filesystem::exists(path))
      throw std::invalid_argument("ExperimentConfig: input " + path.string() + " does not exist");
    train.validate();
  }
};

/// Default desk-scale model list: all learnable families plus the PO family.
inline std::vector<ModelSpec> default_models() {
  std::vector<ModelSpec> m;
  for (auto k : {ModelKind::ppo1, ModelKind::ppo2, ModelKind::ppo3, ModelKind::dae1, ModelKind::dae2,
                 ModelKind::dae3})
    m.push_back({k});
  m.push_back({std::optional<double>{}});
  for (double t : {0.1, 0.3, 0.5}) m.push_back({std::optional<double>{t}});
  return m;
}

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> keys, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw std::invalid_argument(where + ": unknown key '" + k + "'");
  }
}

template <typename T, typename Parse>
std::vector<T> enum_list(const json& j, Parse parse, const std::string& what) {
  std::vector<T> out;
  const auto add = [&](const json& item) {
    const auto s = item.get<std::string>();
    const auto v = parse(s);
    if (!v) throw std::invalid_argument("unknown " + what + " '" + s + "'");
    out.push_back(*v);
  };
  if (j.is_array()) {
    for (const auto& item : j) add(item);
  } else {
    add(j);
  }
  return out;
}

}  // namespace detail

/// Parse the JSON experiment description. Every object rejects unknown keys;
/// missing keys keep their defaults.
inline ExperimentConfig parse_experiment_config(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  detail::reject_unknown(j, {"source", "path", "synthetic", "max_index", "eval_fraction", "scalers", "noise",
                             "models", "train", "output_dir", "seed"},
                         "config");
  ExperimentConfig c;
  c.models = default_models();
  try {
    if (j.contains("source")) {
      const auto s = j["source"].get<std::string>();
      if (s == "synthetic") c.source = SourceKind::synthetic;
      else if (s == "wav-dir") c.source = SourceKind::wav_dir;
      else if (s == "dataset-file") c.source = SourceKind::dataset_file;
      else throw std::invalid_argument("config: unknown source '" + s + "'");
    }
    if (j.contains("path")) c.path = j["path"].get<std::string>();
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      detail::reject_unknown(s, {"rows", "samples", "active_indices", "amplitude_min", "amplitude_max"},
                             "config.synthetic");
      if (s.contains("rows")) c.synthetic.rows = s["rows"].get<std::size_t>();
      if (s.contains("samples")) c.synthetic.samples = s["samples"].get<std::size_t>();
      if (s.contains("active_indices")) c.synthetic.active_indices = s["active_indices"].get<std::vector<std::size_t>>();
      if (s.contains("amplitude_min")) c.synthetic.amplitude_min = s["amplitude_min"].get<double>();
      if (s.contains("amplitude_max")) c.synthetic.amplitude_max = s["amplitude_max"].get<double>();
    }
    if (j.contains("max_index")) c.max_index = j["max_index"].get<std::size_t>();
    if (j.contains("eval_fraction")) c.eval_fraction = j["eval_fraction"].get<double>();
    if (j.contains("scalers"))
      c.scalers = detail::enum_list<ScalerKind>(j["scalers"], parse_scaler_kind, "scaler");
    if (j.contains("noise")) c.noises = detail::enum_list<NoiseKind>(j["noise"], parse_noise_kind, "noise kind");
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j["models"]) c.models.push_back(ModelSpec::parse(m.get<std::string>()));
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      detail::reject_unknown(t, {"epochs", "batch_size", "learning_rates", "l2", "validation_fraction", "optimizer"},
                             "config.train");
      if (t.contains("epochs")) c.train.epochs = t["epochs"].get<std::size_t>();
      if (t.contains("batch_size")) c.train.batch_size = t["batch_size"].get<std::size_t>();
      if (t.contains("learning_rates")) c.train.learning_rates = t["learning_rates"].get<std::vector<double>>();
      if (t.contains("l2")) c.train.l2 = t["l2"].get<double>();
      if (t.contains("validation_fraction")) c.train.validation_fraction = t["validation_fraction"].get<double>();
      if (t.contains("optimizer")) {
        const auto o = t["optimizer"].get<std::string>();
        if (o == "adam") c.train.optimizer = OptimizerKind::adam;
        else if (o == "sgd") c.train.optimizer = OptimizerKind::sgd;
        else throw std::invalid_argument("config.train: unknown optimizer '" + o + "'");
      }
    }
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const detail::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path));
}

// ---------------------------------------------------------------------------
// Results

struct ResultEntry {
  std::string dataset;  // noise kind
  std::string scaler;
  std::string model;
  double raw_mse = 0.0;
  double normalized_mse = 0.0;
  /// Selected learning rate; 0 for rule-based filters.
  double learning_rate = 0.0;
};

struct ResultTable {
  std::vector<ResultEntry> entries;
  /// Groups whose largest MSE was zero (every value reported as 0).
  std::vector<std::pair<std::string, std::string>> degenerate_groups;

  const ResultEntry* find(std::string_view dataset, std::string_view scaler, std::string_view model) const {
    for (const auto& e : entries)
      if (e.dataset == dataset && e.scaler == scaler && e.model == model) return &e;
    return nullptr;
  }
};

/// Divide every raw MSE by the largest raw MSE of its (dataset, scaler) group.
inline ResultTable normalize_groups(ResultTable table) {
  std::map<std::pair<std::string, std::string>, double> group_max;
  for (const auto& e : table.entries) {
    require(std::isfinite(e.raw_mse) && e.raw_mse >= 0.0, "normalize_groups: invalid MSE for " + e.model);
    auto [it, inserted] = group_max.try_emplace({e.dataset, e.scaler}, e.raw_mse);
    if (!inserted) it->second = std::max(it->second, e.raw_mse);
  }
  table.degenerate_groups.clear();
  for (const auto& [key, mx] : group_max)
    if (mx == 0.0) table.degenerate_groups.push_back(key);
  for (auto& e : table.entries) {
    const double mx = group_max.at({e.dataset, e.scaler});
    e.normalized_mse = mx > 0.0 ? e.raw_mse / mx : 0.0;
  }
  return table;
}

inline std::string results_csv(const ResultTable& table) {
  std::string out = "dataset,scaler,model,raw_mse,normalized_mse,learning_rate\n";
  for (const auto& e : table.entries) {
    out += e.dataset + "," + e.scaler + "," + e.model + "," + format_double(e.raw_mse) + "," +
           format_double(e.normalized_mse) + "," + format_double(e.learning_rate) + "\n";
  }
  return out;
}

/// Read a results CSV written by results_csv (normalized values are recomputed
/// by the caller if needed).
inline ResultTable parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("dataset,scaler,model,raw_mse"))
    throw FormatError("results CSV: missing header");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 4) throw FormatError("results CSV: short row '" + line + "'");
    ResultEntry e{cells[0], cells[1], cells[2], std::stod(cells[3]), 0.0, 0.0};
    if (cells.size() > 4) e.normalized_mse = std::stod(cells[4]);
    if (cells.size() > 5) e.learning_rate = std::stod(cells[5]);
    table.entries.push_back(std::move(e));
  }
  return table;
}

inline std::string sanitize(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  return s;
}

/// Grouped bar chart of normalized MSE for one (dataset, scaler) group.
inline std::string group_svg(const ResultTable& table, const std::string& dataset, const std::string& scaler) {
  std::vector<const ResultEntry*> rows;
  for (const auto& e : table.entries)
    if (e.dataset == dataset && e.scaler == scaler) rows.push_back(&e);
  const int bar = 36, gap = 14, left = 50, top = 40, height = 220;
  const int width = left + static_cast<int>(rows.size()) * (bar + gap) + gap;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + height + 60
      << "\">\n";
  svg << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << dataset << " / "
      << scaler << ": normalized evaluation MSE</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width << "\" y2=\"" << top + height
      << "\" stroke=\"black\"/>\n";
  for (double tick : {0.0, 0.5, 1.0}) {
    const int y = top + height - static_cast<int>(tick * height);
    svg << "<text x=\"8\" y=\"" << y + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">" << tick << "</text>\n";
  }
  int x = left + gap;
  for (const auto* e : rows) {
    const int h = static_cast<int>(std::lround(e->normalized_mse * height));
    const char* fill = e->model.starts_with("PPO") ? "#1f77b4" : e->model.starts_with("DAE") ? "#ff7f0e" : "#7f7f7f";
    svg << "<rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << bar << "\" height=\"" << h
        << "\" fill=\"" << fill << "\"/>\n";
    svg << "<text x=\"" << x + bar / 2 << "\" y=\"" << top + height + 16
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" << e->model << "</text>\n";
    x += bar + gap;
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Write results.csv and one SVG per (dataset, scaler) group.
inline std::vector<std::filesystem::path> emit_report(const ResultTable& table, const std::filesystem::path& out_dir) {
  require(!table.entries.empty(), "emit_report: empty table");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  written.push_back(out_dir / "results.csv");
  write_file(written.back(), results_csv(table));
  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& e : table.entries) {
    std::pair<std::string, std::string> g{e.dataset, e.scaler};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  for (const auto& [d, s] : groups) {
    written.push_back(out_dir / ("mse_" + sanitize(d) + "_" + sanitize(s) + ".svg"));
    write_file(written.back(), group_svg(table, d, s));
  }
  return written;
}

// ---------------------------------------------------------------------------
// Orchestration

class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Fixed evaluation pair on disk together with the hash recorded at write time.
struct EvalPair {
  std::filesystem::path noisy_path;
  std::filesystem::path clean_path;
  std::string noisy_hash;
  std::string clean_hash;

  static EvalPair write(const std::filesystem::path& dir, const SignalMatrix& noisy, const SignalMatrix& clean) {
    EvalPair p{dir / "eval_noisy.sigmat", dir / "eval_clean.sigmat", {}, {}};
    const auto nb = encode_signal_matrix(noisy);
    const auto cb = encode_signal_matrix(clean);
    write_file(p.noisy_path, nb);
    write_file(p.clean_path, cb);
    p.noisy_hash = content_hash(nb);
    p.clean_hash = content_hash(cb);
    write_file(dir / "eval.hash", "eval_noisy.sigmat " + p.noisy_hash + "\neval_clean.sigmat " + p.clean_hash + "\n");
    return p;
  }

  /// Reload both matrices, failing if either file changed since it was written.
  std::pair<SignalMatrix, SignalMatrix> load_verified() const {
    auto nb = read_file(noisy_path);
    auto cb = read_file(clean_path);
    if (content_hash(nb) != noisy_hash) throw FormatError(noisy_path.string() + " changed after it was written");
    if (content_hash(cb) != clean_hash) throw FormatError(clean_path.string() + " changed after it was written");
    return {decode_signal_matrix(std::move(nb)), decode_signal_matrix(std::move(cb))};
  }
};

inline double evaluate_model(const TrigBasis& basis, const ModelSpec& spec, const Mlp* model,
                             const SignalMatrix& noisy, const SignalMatrix& clean) {
  const SignalMatrix out = spec.learnable() ? model_predict(basis, *model, noisy)
                                            : threshold_filter(basis, noisy, spec.threshold());
  return mse(out, clean);
}

inline SignalMatrix load_source(const ExperimentConfig& config) {
  switch (config.source) {
    case SourceKind::synthetic: {
      const auto basis = TrigBasis::build(config.synthetic.samples, config.max_index);
      return synth_bandlimited_dataset(basis, config.synthetic.rows, config.synthetic.active_indices,
                                       config.synthetic.amplitude_min, config.synthetic.amplitude_max,
                                       derive_seed(config.seed, "source"))
          .signals;
    }
    case SourceKind::wav_dir: return dataset_from_wav_dir(config.path);
    case SourceKind::dataset_file: return load_signal_matrix(config.path);
  }
  throw std::logic_error("unreachable");
}

using ProgressFn = std::function<void(const std::string&)>;

/// Full protocol: load data, split 80/20, and for every (noise, scaler) group
/// fit the scaler on training rows, write a fixed noisy/clean evaluation pair,
/// train each learnable model with a learning-rate sweep, evaluate every model
/// on the identical hashed evaluation pair, and report raw and group-normalized
/// MSE. Checkpoints and histories land under output_dir.
inline ResultTable run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {}) {
  namespace fs = std::filesystem;
  const auto& out = config.output_dir;
  auto log = [&](const std::string& s) { if (progress) progress(s); };
  auto stage = [&](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const ExperimentError&) {
      throw;
    } catch (const std::exception& e) {
      std::error_code ec;
      fs::create_directories(out, ec);
      write_file(out / "STALE", "run aborted in stage '" + name + "': " + e.what() + "\n");
      throw ExperimentError(name, e.what());
    }
  };

  stage("config", [&] { config.validate(); return 0; });
  fs::create_directories(out);
  fs::remove(out / "STALE");

  const SignalMatrix data = stage("load", [&] { return load_source(config); });
  const auto basis = stage("basis", [&] { return TrigBasis::build(static_cast<std::size_t>(data.cols()), config.max_index); });
  const DataSplit split = stage("split", [&] { return shuffle_split(data, config.eval_fraction, derive_seed(config.seed, "split")); });

  ResultTable table;
  for (const auto noise : config.noises) {
    for (const auto scaler_kind : config.scalers) {
      const std::string dataset(to_string(noise)), scaler(to_string(scaler_kind));
      const std::string group = dataset + "_" + scaler;
      const fs::path dir = out / group;
      const std::uint64_t group_seed = derive_seed(config.seed, group);

      const ScalerParams scaler_params = stage(group + "/scale", [&] { return fit_scaler(split.train, scaler_kind); });
      const SignalMatrix train_scaled = apply_scaler(scaler_params, split.train);
      const EvalPair eval = stage(group + "/eval-data", [&] {
        const SignalMatrix clean = apply_scaler(scaler_params, split.eval);
        const SignalMatrix noisy = apply_noise({noise, derive_seed(group_seed, "eval-noise")}, clean);
        return EvalPair::write(dir, noisy, clean);
      });

      for (const auto& spec : config.models) {
        const std::string name = spec.name();
        ResultEntry entry{dataset, scaler, name, 0.0, 0.0, 0.0};
        std::optional<Mlp> model;
        if (spec.learnable()) {
          log(group + ": training " + name);
          const SweepResult sweep = stage(group + "/train " + name, [&] {
            TrainConfig tc = config.train;
            tc.model = spec.kind();
            tc.noise = {noise, derive_seed(group_seed, "train-noise")};
            tc.seed = derive_seed(group_seed, name);
            return lr_sweep_select(tc, basis, train_scaled);
          });
          entry.learning_rate = sweep.best_lr;
          model = sweep.best_model;
          stage(group + "/save " + name, [&] {
            save_checkpoint(dir / "checkpoints" / (name + ".ckpt"), *model, scaler_params);
            for (const auto& run : sweep.runs) {
              char lr[32];
              std::snprintf(lr, sizeof lr, "%g", run.learning_rate);
              write_file(dir / "history" / (name + "_lr" + lr + ".csv"), history_csv(run.history));
            }
            return 0;
          });
        }
        entry.raw_mse = stage(group + "/evaluate " + name, [&] {
          const auto [noisy, clean] = eval.load_verified();
          return evaluate_model(basis, spec, model ? &*model : nullptr, noisy, clean);
        });
        log(group + ": " + name + " mse " + format_double(entry.raw_mse));
        table.entries.push_back(std::move(entry));
      }
    }
  }
  table = normalize_groups(std::move(table));
  stage("report", [&] { return emit_report(table, out); });
  return table;
}

}  // namespace ppo
