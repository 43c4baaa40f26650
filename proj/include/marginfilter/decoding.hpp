#pragma once

#include <span>
#include <vector>

#include "marginfilter/matrix.hpp"
#include "marginfilter/signal.hpp"
#include "marginfilter/svm.hpp"

namespace marginfilter {

// Row-stochastic class transition matrix with a class prior.
struct TransitionMatrix {
  Matrix M;                    // c x c, M(a, b) = P(next = b | current = a)
  std::vector<double> prior;   // length c

  [[nodiscard]] int classes() const noexcept { return static_cast<int>(prior.size()); }
  static TransitionMatrix uniform(int classes);
};

void validate(const TransitionMatrix& t);

// n x c per-sample class log-probabilities.
struct EmissionSequence {
  Matrix logprobs;
};

// Emissions from per-sample class probabilities (rows renormalized, then log).
EmissionSequence emissions_from_probabilities(const Matrix& probabilities);

// Laplace-smoothed bigram estimate; prior from smoothed class frequencies.
TransitionMatrix estimate_transitions(const LabelSequence& y, int classes);

// Maximum a posteriori path, ties resolved toward the lowest class index.
LabelSequence viterbi(const EmissionSequence& e, const TransitionMatrix& t);

// log prior(s_1) + sum_i e(i, s_i) + sum_i log M(s_{i-1}, s_i).
double path_score(const EmissionSequence& e, const TransitionMatrix& t, const LabelSequence& path);

// Per-sample One-Against-One votes on filtered samples.
LabelSequence decode_online(const MulticlassModel& mc, const Matrix& filtered);

struct OfflineOptions {
  // Divide posteriors by the class prior (scaled likelihoods) before decoding.
  bool scaled_likelihood = false;
};

// Calibrated posteriors as emissions, then Viterbi.
LabelSequence decode_offline(const MulticlassModel& mc, std::span<const PlattParams> platt,
                             const TransitionMatrix& t, const Matrix& filtered, const OfflineOptions& options = {});

// n x c calibrated class probabilities for each filtered sample.
Matrix class_probability_matrix(const MulticlassModel& mc, std::span<const PlattParams> platt,
                                const Matrix& filtered);

}  // namespace marginfilter
