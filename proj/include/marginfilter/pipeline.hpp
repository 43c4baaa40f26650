#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "marginfilter/decoding.hpp"
#include "marginfilter/filter_learning.hpp"
#include "marginfilter/signal.hpp"
#include "marginfilter/svm.hpp"

namespace marginfilter {

enum class Method { svm, avg_svm, kf_svm, skf_svm };
enum class DecodeMode { online, viterbi };

std::string_view to_string(Method m) noexcept;
std::string_view to_string(DecodeMode m) noexcept;
// Accepts both "kf-svm" and "kf_svm" spellings.
Method parse_method(std::string_view s);
DecodeMode parse_decode_mode(std::string_view s);

struct Hyperparams {
  double C = 1.0;
  double lambda = 0.0;
  double sigma_k = 1.0;
  std::size_t f = 1;
  int n0 = 0;
  bool operator==(const Hyperparams&) const = default;
};

// Solver settings shared by every training run; hyperparameters come apart.
struct TrainingOptions {
  int max_cg_iters = 200;
  double tol_rel_J = 1e-5;
  double tol_dF = 1e-6;
  int mm_max_outer = 20;
  double mm_eps = 1e-8;
  SolverOptions svm{1e-4, 0};
  bool scaled_likelihood = false;
};

LearnerConfig make_learner_config(Method method, const Hyperparams& hp, const TrainingOptions& options);

// A trained sample labeler: filter, SVM banks, calibration and transitions.
struct SequenceLabeler {
  Method method = Method::svm;
  Hyperparams hp;
  FilterBank filter;
  MulticlassModel models;
  std::vector<PlattParams> platt;
  TransitionMatrix transitions;
  std::vector<IterationRecord> history;
  std::vector<double> surrogate;
  bool scaled_likelihood = false;

  [[nodiscard]] int classes() const noexcept { return models.classes; }
};

// Learns the filter (svm: identity, avg-svm: average filter, kf/skf: learned)
// and both SVM banks on `x`, estimates transitions from `y`. Platt sigmoids
// are fitted on `calibration` when given, on the training data otherwise.
SequenceLabeler train_labeler(Method method, const Hyperparams& hp, const SignalMatrix& x, const LabelSequence& y,
                              const TrainingOptions& options = {},
                              const std::optional<std::pair<SignalMatrix, LabelSequence>>& calibration = std::nullopt);

// Refits the per-class Platt sigmoids on held-out data.
void calibrate_labeler(SequenceLabeler& labeler, const SignalMatrix& x, const LabelSequence& y);

LabelSequence predict(const SequenceLabeler& labeler, const SignalMatrix& x, DecodeMode mode);
// n x c calibrated probabilities.
Matrix predict_probabilities(const SequenceLabeler& labeler, const SignalMatrix& x);

}  // namespace marginfilter
