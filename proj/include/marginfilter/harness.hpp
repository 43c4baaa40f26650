#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "marginfilter/pipeline.hpp"
#include "marginfilter/signal.hpp"

namespace marginfilter {

// Fraction of samples whose labels differ.
double error_rate(const LabelSequence& pred, const LabelSequence& truth);

struct GridSpec {
  std::vector<double> C{1.0};
  std::vector<double> lambda{0.0};
  std::vector<double> sigma_k{1.0};
  std::vector<std::size_t> f{1};
  std::vector<int> n0{0};
  Method method = Method::svm;
  DecodeMode decode = DecodeMode::online;
};

void validate(const GridSpec& grid);

// Cells of the grid after dropping the parameters the method ignores
// (f, n0 and lambda for svm; lambda for avg-svm) and removing duplicates.
std::vector<Hyperparams> grid_cells(const GridSpec& grid);

struct GridCell {
  Hyperparams hp;
  double validation_error = 1.0;
  bool ok = false;
  std::string message;
};

struct GridSearchResult {
  Hyperparams best;
  double validation_error = 1.0;
  SequenceLabeler model;  // trained on the training set, calibrated on validation
  std::vector<GridCell> cells;
};

struct LabeledSignal {
  SignalMatrix x;
  LabelSequence y;
};

// Exhaustive search: trains every cell on `train`, scores validation error,
// keeps the minimizer. Ties go to larger lambda, then smaller C, then larger
// sigma_k, then grid order. Failed cells are recorded and skipped; throws
// std::runtime_error when every cell fails.
GridSearchResult grid_search(const LabeledSignal& train, const LabeledSignal& validation, const GridSpec& grid,
                             const TrainingOptions& options = {});

// Two-sided Wilcoxon signed-rank p-value. Zero differences are dropped;
// exact enumeration up to 12 non-zero differences, tie-corrected normal
// approximation with continuity correction beyond. Requires >= 5 pairs.
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);
double wilcoxon_exact(const std::vector<double>& differences);
double wilcoxon_normal(const std::vector<double>& differences);

enum class SweepAxis { noise, size, lag, f, sigma_k };
std::string_view to_string(SweepAxis a) noexcept;
SweepAxis parse_axis(std::string_view s);

struct SweepOptions {
  ToyParams base = [] {
    ToyParams p;
    p.lag = 5;
    return p;
  }();
  std::size_t n_train = 1000;
  std::size_t n_validation = 1000;
  std::size_t n_test = 10000;
  std::map<Method, GridSpec> grids = default_toy_grids();
  TrainingOptions training;

  // Grids used for the toy benchmark: f = 11, n0 = 6.
  static std::map<Method, GridSpec> default_toy_grids();
};

struct SweepEntry {
  double axis_value = 0.0;
  Method method = Method::svm;
  DecodeMode decode = DecodeMode::online;
  std::uint64_t seed = 0;
  double test_error = 0.0;
  Hyperparams selected;
  std::vector<double> filter_column_norms;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::noise;
  std::vector<SweepEntry> entries;  // ordered by (axis value, method, decode, seed)
  std::size_t seed_count = 0;

  [[nodiscard]] double mean_error(double axis_value, Method method, DecodeMode decode) const;
  [[nodiscard]] std::vector<double> errors(double axis_value, Method method, DecodeMode decode) const;
};

struct ToySplit {
  LabeledSignal train;
  LabeledSignal validation;
  LabeledSignal test;
};

// Train, validation and test signals for one seed. They share the channel
// lags (one acquisition setup) and differ in content.
ToySplit make_toy_split(const ToyParams& base, std::uint64_t seed, std::size_t n_train, std::size_t n_validation,
                        std::size_t n_test);

// Default axis values bracketing the toy operating point.
std::vector<double> default_axis_values(SweepAxis axis);

SweepResult run_toy_sweep(SweepAxis axis, const std::vector<double>& values, const std::vector<Method>& methods,
                          const std::vector<std::uint64_t>& seeds, const SweepOptions& options = {});

// Seeds 0..count-1.
std::vector<std::uint64_t> default_seeds(std::size_t count = 10);

}  // namespace marginfilter
