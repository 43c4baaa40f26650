#include "marginfilter/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>

#include "marginfilter/harness.hpp"
#include "marginfilter/io.hpp"
#include "marginfilter/kernels.hpp"

namespace marginfilter {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LabeledSignal load_labeled(const std::string& path) {
  io::Dataset ds = io::load_dataset(path);
  if (!ds.y) throw UsageError(path + ": a label column is required");
  return {std::move(ds.x), std::move(*ds.y)};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw std::runtime_error(dir + ": cannot create output directory");
}

void write_artifacts(const std::string& dir, const SequenceLabeler& labeler) {
  ensure_dir(dir);
  io::save_labeler(fs::path(dir) / "model.json", labeler);
  io::save_filter(fs::path(dir) / "filter.json", labeler.filter);
  io::save_transitions(fs::path(dir) / "transitions.json", labeler.transitions);
  io::save_history(fs::path(dir) / "history.csv", labeler.history);
}

void report_error(std::ostream& out, const io::Dataset& ds, const LabelSequence& pred) {
  if (!ds.y) return;
  out << "error_rate " << io::format_double(error_rate(pred, *ds.y)) << "\n";
}

struct TrainFlags {
  std::string method = "kf-svm";
  Hyperparams hp{.C = 100.0, .lambda = 1.0, .sigma_k = 1.0, .f = 11, .n0 = 6};
  TrainingOptions training;
  std::uint64_t seed = 0;
};

void add_training_options(CLI::App* cmd, TrainingOptions& t) {
  cmd->add_option("--max-cg-iters", t.max_cg_iters, "Conjugate-gradient iteration cap")->capture_default_str();
  cmd->add_option("--tol-rel-j", t.tol_rel_J, "Relative objective decrease stopping tolerance")->capture_default_str();
  cmd->add_option("--tol-df", t.tol_dF, "Filter step stopping tolerance")->capture_default_str();
  cmd->add_option("--mm-max-outer", t.mm_max_outer, "Reweighting iterations for skf-svm")->capture_default_str();
  cmd->add_flag("--scaled-likelihood", t.scaled_likelihood, "Divide posteriors by class priors before Viterbi");
}

std::string grid_csv(const GridSearchResult& r) {
  std::string out = "C,lambda,sigma_k,f,n0,validation_error,status\n";
  for (const auto& c : r.cells) {
    out += io::format_double(c.hp.C) + "," + io::format_double(c.hp.lambda) + "," + io::format_double(c.hp.sigma_k) +
           "," + std::to_string(c.hp.f) + "," + std::to_string(c.hp.n0) + "," + io::format_double(c.validation_error) +
           "," + (c.ok ? "ok" : "failed") + "\n";
  }
  return out;
}

int run_compare(const std::string& path_a, const std::string& path_b, const std::string& method_a,
                const std::string& method_b, const std::string& decode, std::ostream& out) {
  using Key = std::tuple<double, std::string, std::uint64_t>;
  auto collect = [&](const std::string& path, const std::string& method) {
    std::map<Key, double> m;
    for (const auto& r : io::load_sweep(path)) {
      if (!method.empty() && r.method != std::string(to_string(parse_method(method)))) continue;
      if (!decode.empty() && r.decode != decode) continue;
      if (!m.emplace(Key{r.axis_value, r.decode, r.seed}, r.test_error).second) {
        throw UsageError(path + ": several rows share axis value, decode mode and seed; narrow with --method-a/--method-b/--decode");
      }
    }
    return m;
  };
  const auto a = collect(path_a, method_a);
  const auto b = collect(path_b, method_b);
  std::vector<double> ea, eb;
  for (const auto& [key, err] : a) {
    if (auto it = b.find(key); it != b.end()) {
      ea.push_back(err);
      eb.push_back(it->second);
    }
  }
  if (ea.size() < 5) throw UsageError("compare: only " + std::to_string(ea.size()) + " paired rows (need at least 5)");
  const double p = wilcoxon_signed_rank(ea, eb);
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < ea.size(); ++k) {
    ma += ea[k];
    mb += eb[k];
  }
  out << "pairs " << ea.size() << "\n";
  out << "mean_a " << io::format_double(ma / static_cast<double>(ea.size())) << "\n";
  out << "mean_b " << io::format_double(mb / static_cast<double>(eb.size())) << "\n";
  out << "p_value " << io::format_double(p) << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Filter-learning SVM sequence labeling", "margin-filter"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // generate-toy
  ToyParams toy;
  std::optional<std::uint64_t> lag_seed;
  std::string toy_out;
  auto* gen = app.add_subcommand("generate-toy", "Write a synthetic two-channel-informative toy signal");
  gen->add_option("--sigma-n", toy.sigma_n, "Noise standard deviation")->capture_default_str();
  gen->add_option("--lag", toy.lag, "Maximum channel lag")->capture_default_str();
  gen->add_option("--n", toy.n, "Number of samples")->capture_default_str();
  gen->add_option("--nbtot", toy.nbtot, "Total channel count")->capture_default_str();
  gen->add_option("--seed", toy.seed, "Content seed")->capture_default_str();
  gen->add_option("--lag-seed", lag_seed, "Seed for channel lags (defaults to --seed)");
  gen->add_option("--run-min", toy.run_min, "Shortest label run")->capture_default_str();
  gen->add_option("--run-max", toy.run_max, "Longest label run")->capture_default_str();
  gen->add_flag("--three-class", toy.three_class, "Add a third class");
  gen->add_option("-o,--out", toy_out, "Output dataset CSV")->required();

  // train
  TrainFlags tf;
  std::string train_path, val_path, train_dir;
  auto* train = app.add_subcommand("train", "Train a sequence labeler");
  train->add_option("--train", train_path, "Labeled training CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--validation", val_path, "Labeled CSV used for probability calibration")->check(CLI::ExistingFile);
  train->add_option("--method", tf.method, "svm, avg-svm, kf-svm or skf-svm")->capture_default_str();
  train->add_option("--f", tf.hp.f, "Filter length")->capture_default_str();
  train->add_option("--n0", tf.hp.n0, "Filter delay")->capture_default_str();
  train->add_option("--C", tf.hp.C, "SVM regularization")->capture_default_str();
  train->add_option("--lambda", tf.hp.lambda, "Filter regularization")->capture_default_str();
  train->add_option("--sigma-k", tf.hp.sigma_k, "Gaussian kernel width")->capture_default_str();
  train->add_option("--seed", tf.seed, "Seed (training itself is deterministic)")->capture_default_str();
  add_training_options(train, tf.training);
  train->add_option("-o,--out-dir", train_dir, "Directory for model.json, filter.json, transitions.json, history.csv")
      ->required();

  // predict / decode
  std::string model_path, data_path, labels_out, probs_out, mode_str = "online";
  auto* pred = app.add_subcommand("predict", "Label a signal online and optionally write class probabilities");
  pred->add_option("--model", model_path, "model.json")->required()->check(CLI::ExistingFile);
  pred->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  pred->add_option("-o,--out", labels_out, "Output t,label CSV")->required();
  pred->add_option("--probabilities", probs_out, "Output t,p1..pc CSV");

  auto* dec = app.add_subcommand("decode", "Label a signal online or by Viterbi decoding");
  dec->add_option("--model", model_path, "model.json")->required()->check(CLI::ExistingFile);
  dec->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  dec->add_option("--mode", mode_str, "online or viterbi")->capture_default_str();
  dec->add_option("-o,--out", labels_out, "Output t,label CSV")->required();

  // grid-search
  GridSpec grid;
  std::string grid_method = "kf-svm", grid_decode = "online", grid_dir;
  TrainingOptions grid_training;
  auto* gs = app.add_subcommand("grid-search", "Select hyperparameters on a validation signal");
  gs->add_option("--train", train_path, "Labeled training CSV")->required()->check(CLI::ExistingFile);
  gs->add_option("--validation", val_path, "Labeled validation CSV")->required()->check(CLI::ExistingFile);
  gs->add_option("--method", grid_method, "svm, avg-svm, kf-svm or skf-svm")->capture_default_str();
  gs->add_option("--decode", grid_decode, "Decoding used to score validation error")->capture_default_str();
  gs->add_option("--C", grid.C, "C values")->delimiter(',');
  gs->add_option("--lambda", grid.lambda, "lambda values")->delimiter(',');
  gs->add_option("--sigma-k", grid.sigma_k, "Kernel widths")->delimiter(',');
  gs->add_option("--f", grid.f, "Filter lengths")->delimiter(',');
  gs->add_option("--n0", grid.n0, "Filter delays")->delimiter(',');
  add_training_options(gs, grid_training);
  gs->add_option("-o,--out-dir", grid_dir, "Directory for the selected model and grid.csv")->required();

  // sweep
  std::string axis_str = "lag", sweep_out, summary_out;
  std::vector<double> axis_values;
  std::vector<std::string> method_strs{"svm", "avg-svm", "kf-svm"};
  std::size_t seed_count = 10;
  std::uint64_t first_seed = 0;
  SweepOptions sweep_opts;
  auto* sw = app.add_subcommand("sweep", "Run the toy benchmark across one axis");
  sw->add_option("--axis", axis_str, "noise, size, lag, f or sigma_k")->capture_default_str();
  sw->add_option("--values", axis_values, "Axis values (defaults per axis)")->delimiter(',');
  sw->add_option("--methods", method_strs, "Methods to compare")->delimiter(',');
  sw->add_option("--seeds", seed_count, "Number of seeds")->capture_default_str();
  sw->add_option("--seed", first_seed, "First seed")->capture_default_str();
  sw->add_option("--sigma-n", sweep_opts.base.sigma_n, "Base noise level")->capture_default_str();
  sw->add_option("--lag", sweep_opts.base.lag, "Base lag")->capture_default_str();
  sw->add_option("--nbtot", sweep_opts.base.nbtot, "Base channel count")->capture_default_str();
  sw->add_option("--n-train", sweep_opts.n_train, "Training samples")->capture_default_str();
  sw->add_option("--n-validation", sweep_opts.n_validation, "Validation samples")->capture_default_str();
  sw->add_option("--n-test", sweep_opts.n_test, "Test samples")->capture_default_str();
  add_training_options(sw, sweep_opts.training);
  sw->add_option("-o,--out", sweep_out, "Per-seed results CSV")->required();
  sw->add_option("--summary", summary_out, "Per-cell mean error CSV");

  // compare
  std::string cmp_a, cmp_b, cmp_method_a, cmp_method_b, cmp_decode;
  auto* cmp = app.add_subcommand("compare", "Wilcoxon signed-rank test between two result CSVs");
  cmp->add_option("a", cmp_a, "First results CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("b", cmp_b, "Second results CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--method-a", cmp_method_a, "Keep only this method from the first file");
  cmp->add_option("--method-b", cmp_method_b, "Keep only this method from the second file");
  cmp->add_option("--decode", cmp_decode, "Keep only this decode mode");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  kernels::configure_threads_from_env();
  try {
    if (*gen) {
      toy.lag_seed = lag_seed;
      const ToySignal s = generate_toy(toy);
      io::save_dataset(toy_out, s.x, s.y);
      out << "wrote " << toy_out << " (" << s.x.rows() << " x " << s.x.cols() << ")\n";
    } else if (*train) {
      const LabeledSignal tr = load_labeled(train_path);
      std::optional<std::pair<SignalMatrix, LabelSequence>> calib;
      if (!val_path.empty()) {
        LabeledSignal v = load_labeled(val_path);
        calib.emplace(std::move(v.x), std::move(v.y));
      }
      const SequenceLabeler l = train_labeler(parse_method(tf.method), tf.hp, tr.x, tr.y, tf.training, calib);
      write_artifacts(train_dir, l);
      out << "trained " << to_string(l.method) << " on " << tr.x.rows() << " samples, " << l.history.size()
          << " history records\n";
    } else if (*pred || *dec) {
      const SequenceLabeler l = io::load_labeler(model_path);
      const io::Dataset ds = io::load_dataset(data_path);
      if (ds.x.cols() != l.filter.channels()) {
        throw UsageError(data_path + ": " + std::to_string(ds.x.cols()) + " channels, model expects " +
                         std::to_string(l.filter.channels()));
      }
      const DecodeMode mode = *dec ? parse_decode_mode(mode_str) : DecodeMode::online;
      const LabelSequence labels = predict(l, ds.x, mode);
      io::save_labels(labels_out, labels);
      if (*pred && !probs_out.empty()) {
        const Matrix p = predict_probabilities(l, ds.x);
        std::string csv = "t";
        for (std::size_t k = 0; k < p.cols(); ++k) csv += ",p" + std::to_string(k + 1);
        csv += '\n';
        for (std::size_t i = 0; i < p.rows(); ++i) {
          csv += std::to_string(i);
          for (std::size_t k = 0; k < p.cols(); ++k) csv += "," + io::format_double(p(i, k));
          csv += '\n';
        }
        io::write_file_atomic(probs_out, csv);
      }
      report_error(out, ds, labels);
    } else if (*gs) {
      grid.method = parse_method(grid_method);
      grid.decode = parse_decode_mode(grid_decode);
      const GridSearchResult r = grid_search(load_labeled(train_path), load_labeled(val_path), grid, grid_training);
      write_artifacts(grid_dir, r.model);
      io::write_file_atomic(fs::path(grid_dir) / "grid.csv", grid_csv(r));
      out << "best C=" << r.best.C << " lambda=" << r.best.lambda << " sigma_k=" << r.best.sigma_k
          << " f=" << r.best.f << " n0=" << r.best.n0 << " validation_error=" << io::format_double(r.validation_error)
          << "\n";
    } else if (*sw) {
      const SweepAxis axis = parse_axis(axis_str);
      if (axis_values.empty()) axis_values = default_axis_values(axis);
      std::vector<Method> methods;
      for (const auto& m : method_strs) methods.push_back(parse_method(m));
      std::vector<std::uint64_t> seeds(seed_count);
      for (std::size_t k = 0; k < seed_count; ++k) seeds[k] = first_seed + k;
      const SweepResult r = run_toy_sweep(axis, axis_values, methods, seeds, sweep_opts);
      io::save_sweep(sweep_out, r);
      if (!summary_out.empty()) io::save_sweep_summary(summary_out, r);
      out << io::sweep_summary_to_csv(r);
    } else if (*cmp) {
      return run_compare(cmp_a, cmp_b, cmp_method_a, cmp_method_b, cmp_decode, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cli_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace marginfilter
