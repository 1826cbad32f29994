// Command-line front end: dataset generation, WAV preparation, training,
// evaluation, full experiments and reporting.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppo/ppo.hpp"

namespace {

using namespace ppo;
namespace fs = std::filesystem;

std::vector<std::size_t> parse_index_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

template <typename T, typename Parse>
T parse_or_throw(const std::string& s, Parse parse, const char* what) {
  if (auto v = parse(s)) return *v;
  throw CLI::ValidationError(std::string("unknown ") + what + " '" + s + "'");
}

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  bool seed_given() const { return seed_set; }
  bool seed_set = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo projection operator toolkit"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out", g.out, "Output path");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic band-limited dataset")->fallthrough();
  std::size_t gen_rows = 2000, gen_samples = 256, gen_max_index = 31;
  std::string gen_active = "1,2,5,6,9,12,17,20,26,33,41,50", gen_truth;
  double amp_lo = -1.0, amp_hi = 1.0;
  gen->add_option("--rows", gen_rows);
  gen->add_option("--samples", gen_samples);
  gen->add_option("--max-index", gen_max_index);
  gen->add_option("--active", gen_active, "Comma-separated coefficient indices");
  gen->add_option("--amp-min", amp_lo);
  gen->add_option("--amp-max", amp_hi);
  gen->add_option("--truth", gen_truth, "Also write the ground-truth coefficients here");

  // prep-wav
  auto* prep = app.add_subcommand("prep-wav", "Segment a directory of mono 48 kHz WAV stems")->fallthrough();
  std::string wav_dir;
  prep->add_option("--dir", wav_dir)->required()->check(CLI::ExistingDirectory);

  // train
  auto* tr = app.add_subcommand("train", "Train one model with a learning-rate sweep")->fallthrough();
  std::string tr_data, tr_model = "PPO1", tr_noise = "clean", tr_scaler = "standard";
  std::size_t tr_max_index = 31, tr_epochs = 200, tr_batch = 256;
  std::vector<double> tr_lrs{1e-2, 1e-3, 1e-4, 1e-5};
  double tr_l2 = 1e-5, tr_val = 0.2, tr_eval_fraction = 0.2;
  tr->add_option("--data", tr_data, "Clean dataset (SIGMAT01)")->required()->check(CLI::ExistingFile);
  tr->add_option("--model", tr_model, "PPO1..3 or DAE1..3");
  tr->add_option("--noise", tr_noise, "clean | shuffle | outliers");
  tr->add_option("--scaler", tr_scaler, "minmax | standard | none");
  tr->add_option("--max-index", tr_max_index);
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--lr", tr_lrs, "Learning rates to sweep");
  tr->add_option("--l2", tr_l2);
  tr->add_option("--validation-fraction", tr_val);
  tr->add_option("--eval-fraction", tr_eval_fraction, "Held-out fraction excluded from training");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint or PO filter on a fixed evaluation pair")->fallthrough();
  std::string ev_ckpt, ev_po, ev_noisy, ev_clean, ev_hash;
  std::size_t ev_max_index = 31;
  ev->add_option("--checkpoint", ev_ckpt)->check(CLI::ExistingFile);
  ev->add_option("--po", ev_po, "Rule-based filter instead: 'PO' or 'PO <threshold>'");
  ev->add_option("--max-index", ev_max_index, "Basis size for PO filters");
  ev->add_option("--noisy", ev_noisy)->required()->check(CLI::ExistingFile);
  ev->add_option("--clean", ev_clean)->required()->check(CLI::ExistingFile);
  ev->add_option("--hash-file", ev_hash, "eval.hash to verify against")->check(CLI::ExistingFile);

  // run
  auto* run = app.add_subcommand("run", "Run a full experiment from --config")->fallthrough();

  // report
  auto* rep = app.add_subcommand("report", "Re-normalize a results table and render CSV/SVG")->fallthrough();
  std::string rep_in;
  rep->add_option("--input", rep_in, "results.csv")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*gen) {
      if (g.out.empty()) throw CLI::ValidationError("gen-data needs --out <file>");
      const auto basis = TrigBasis::build(gen_samples, gen_max_index);
      const auto data = synth_bandlimited_dataset(basis, gen_rows, parse_index_list(gen_active), amp_lo, amp_hi, g.seed);
      save_signal_matrix(g.out, data.signals);
      if (!gen_truth.empty()) save_signal_matrix(gen_truth, data.coefficients);
      std::cout << "wrote " << data.signals.rows() << "x" << data.signals.cols() << " to " << g.out << "\n";
    } else if (*prep) {
      if (g.out.empty()) throw CLI::ValidationError("prep-wav needs --out <file>");
      const auto data = dataset_from_wav_dir(wav_dir);
      save_signal_matrix(g.out, data);
      std::cout << "wrote " << data.rows() << "x" << data.cols() << " to " << g.out << "\n";
    } else if (*tr) {
      if (g.out.empty()) throw CLI::ValidationError("train needs --out <dir>");
      const auto kind = parse_or_throw<ModelKind>(tr_model, parse_model_kind, "model");
      const auto noise = parse_or_throw<NoiseKind>(tr_noise, parse_noise_kind, "noise kind");
      const auto scaler_kind = parse_or_throw<ScalerKind>(tr_scaler, parse_scaler_kind, "scaler");
      const SignalMatrix data = load_signal_matrix(tr_data);
      const auto basis = TrigBasis::build(static_cast<std::size_t>(data.cols()), tr_max_index);
      const auto split = shuffle_split(data, tr_eval_fraction, derive_seed(g.seed, "split"));
      const auto scaler = fit_scaler(split.train, scaler_kind);
      TrainConfig c;
      c.model = kind;
      c.epochs = tr_epochs;
      c.batch_size = tr_batch;
      c.learning_rates = tr_lrs;
      c.l2 = tr_l2;
      c.validation_fraction = tr_val;
      c.noise = {noise, derive_seed(g.seed, "train-noise")};
      c.seed = derive_seed(g.seed, tr_model);
      const auto sweep = lr_sweep_select(c, basis, apply_scaler(scaler, split.train));
      const fs::path out = g.out;
      save_checkpoint(out / (tr_model + ".ckpt"), sweep.best_model, scaler);
      for (const auto& r : sweep.runs) {
        char lr[32];
        std::snprintf(lr, sizeof lr, "%g", r.learning_rate);
        write_file(out / (tr_model + "_lr" + lr + ".csv"), history_csv(r.history));
        std::cout << "lr " << lr << ": "
                  << (r.diverged ? "diverged (" + r.diagnostic + ")"
                                 : "best val mse " + format_double(r.history.best_val_mse()))
                  << "\n";
      }
      std::cout << "selected lr " << sweep.best_lr << ", checkpoint " << (out / (tr_model + ".ckpt")).string() << "\n";
    } else if (*ev) {
      if (ev_ckpt.empty() == ev_po.empty()) throw CLI::ValidationError("eval needs exactly one of --checkpoint or --po");
      if (!ev_hash.empty()) {
        std::istringstream in(read_file(ev_hash));
        std::string name, hash;
        while (in >> name >> hash) {
          const fs::path target = name == "eval_noisy.sigmat" ? fs::path(ev_noisy) : fs::path(ev_clean);
          if (file_hash(target) != hash) throw FormatError(target.string() + " does not match " + ev_hash);
        }
      }
      const SignalMatrix noisy = load_signal_matrix(ev_noisy);
      const SignalMatrix clean = load_signal_matrix(ev_clean);
      double err = 0.0;
      if (!ev_ckpt.empty()) {
        const auto ck = load_checkpoint(ev_ckpt);
        const std::size_t d = ck.model.output_activation() == Activation::sigmoid ? ck.model.output_dim()
                                                                                 : 2 * ev_max_index + 2;
        const auto basis = TrigBasis::build(ck.model.input_dim(), d / 2 - 1);
        err = mse(model_predict(basis, ck.model, noisy), clean);
      } else {
        const auto spec = ModelSpec::parse(ev_po);
        const auto basis = TrigBasis::build(static_cast<std::size_t>(noisy.cols()), ev_max_index);
        err = evaluate_model(basis, spec, nullptr, noisy, clean);
      }
      std::cout << format_double(err) << "\n";
    } else if (*run) {
      if (g.config.empty()) throw CLI::ValidationError("run needs --config <file>");
      auto config = load_experiment_config(g.config);
      if (g.seed_given()) config.seed = g.seed;
      if (!g.out.empty()) config.output_dir = g.out;
      const auto table = run_experiment(config, [](const std::string& s) { std::cerr << s << "\n"; });
      std::cout << results_csv(table);
    } else if (*rep) {
      if (g.out.empty()) throw CLI::ValidationError("report needs --out <dir>");
      const auto table = normalize_groups(parse_results_csv(read_file(rep_in)));
      for (const auto& p : emit_report(table, g.out)) std::cout << "wrote " << p.string() << "\n";
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
