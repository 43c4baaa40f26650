#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "marginfilter/decoding.hpp"
#include "marginfilter/filter_learning.hpp"
#include "marginfilter/harness.hpp"
#include "marginfilter/pipeline.hpp"
#include "marginfilter/signal.hpp"

namespace marginfilter::io {

inline constexpr int kFormatVersion = 1;

// Malformed or inconsistent input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  SignalMatrix x;
  std::optional<LabelSequence> y;
};

// CSV with header `t,ch1,...,chd[,label]`, one row per sample.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text, const std::string& source = "<memory>");
void save_dataset(const std::filesystem::path& path, const SignalMatrix& x, const std::optional<LabelSequence>& y);

// `{ "format_version": 1, "f": int, "d": int, "n0": int, "coeffs": [row-major f x d] }`
std::string filter_to_json(const FilterBank& filter);
FilterBank filter_from_json(const std::string& text);
void save_filter(const std::filesystem::path& path, const FilterBank& filter);
FilterBank load_filter(const std::filesystem::path& path);

std::string transitions_to_json(const TransitionMatrix& t);
TransitionMatrix transitions_from_json(const std::string& text);
void save_transitions(const std::filesystem::path& path, const TransitionMatrix& t);
TransitionMatrix load_transitions(const std::filesystem::path& path);

// Whole labeler: method, hyperparameters, filter, both SVM banks (kernel,
// support vectors, multipliers, bias), Platt parameters and transitions.
std::string labeler_to_json(const SequenceLabeler& labeler);
SequenceLabeler labeler_from_json(const std::string& text);
void save_labeler(const std::filesystem::path& path, const SequenceLabeler& labeler);
SequenceLabeler load_labeler(const std::filesystem::path& path);

// `iter,J,normF`
void save_history(const std::filesystem::path& path, const std::vector<IterationRecord>& history);

// `t,label`
void save_labels(const std::filesystem::path& path, const LabelSequence& labels);
LabelSequence load_labels(const std::filesystem::path& path);

// `axis_value,method,decode,seed,test_error`
std::string sweep_to_csv(const SweepResult& result);
// `axis_value,method,decode,mean_error,seeds`
std::string sweep_summary_to_csv(const SweepResult& result);
void save_sweep(const std::filesystem::path& path, const SweepResult& result);
void save_sweep_summary(const std::filesystem::path& path, const SweepResult& result);

struct ResultRow {
  double axis_value = 0.0;
  std::string method;
  std::string decode;
  std::uint64_t seed = 0;
  double test_error = 0.0;
};
std::vector<ResultRow> load_sweep(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace marginfilter::io
