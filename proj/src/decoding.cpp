#include "marginfilter/decoding.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace marginfilter {

TransitionMatrix TransitionMatrix::uniform(int classes) {
  if (classes < 1) throw std::invalid_argument("transition matrix needs at least one class");
  const auto c = static_cast<std::size_t>(classes);
  return {Matrix(c, c, 1.0 / classes), std::vector<double>(c, 1.0 / classes)};
}

void validate(const TransitionMatrix& t) {
  const std::size_t c = t.prior.size();
  if (c == 0 || t.M.rows() != c || t.M.cols() != c) throw std::invalid_argument("transition matrix must be c x c with a length-c prior");
  double prior_sum = 0.0;
  for (std::size_t a = 0; a < c; ++a) {
    if (!(t.prior[a] > 0.0)) throw std::invalid_argument("transition prior entries must be positive");
    prior_sum += t.prior[a];
    double row = 0.0;
    for (std::size_t b = 0; b < c; ++b) {
      if (!(t.M(a, b) > 0.0) || !std::isfinite(t.M(a, b))) throw std::invalid_argument("transition entries must be positive");
      row += t.M(a, b);
    }
    if (std::abs(row - 1.0) > 1e-9) throw std::invalid_argument("transition row " + std::to_string(a) + " does not sum to 1");
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw std::invalid_argument("transition prior does not sum to 1");
}

EmissionSequence emissions_from_probabilities(const Matrix& probabilities) {
  EmissionSequence e{Matrix(probabilities.rows(), probabilities.cols())};
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    double total = 0.0;
    for (double p : probabilities.row(i)) total += p;
    for (std::size_t k = 0; k < probabilities.cols(); ++k) e.logprobs(i, k) = std::log(probabilities(i, k) / total);
  }
  return e;
}

TransitionMatrix estimate_transitions(const LabelSequence& y, int classes) {
  if (y.size() < 2) throw std::invalid_argument("estimate_transitions needs at least two samples");
  if (classes < 1) throw std::invalid_argument("estimate_transitions needs at least one class");
  const auto c = static_cast<std::size_t>(classes);
  Matrix counts(c, c, 1.0);
  std::vector<double> freq(c, 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 1 || y[i] > classes) throw std::invalid_argument("label outside 1..classes");
    freq[static_cast<std::size_t>(y[i] - 1)] += 1.0;
    if (i > 0) counts(static_cast<std::size_t>(y[i - 1] - 1), static_cast<std::size_t>(y[i] - 1)) += 1.0;
  }
  TransitionMatrix t{counts, freq};
  for (std::size_t a = 0; a < c; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < c; ++b) row += counts(a, b);
    for (std::size_t b = 0; b < c; ++b) t.M(a, b) = counts(a, b) / row;
  }
  const double total = static_cast<double>(y.size() + c);
  for (auto& p : t.prior) p /= total;
  return t;
}

LabelSequence viterbi(const EmissionSequence& e, const TransitionMatrix& t) {
  const Matrix& lp = e.logprobs;
  const std::size_t n = lp.rows();
  const std::size_t c = lp.cols();
  if (c != t.prior.size() || t.M.rows() != c || t.M.cols() != c) {
    throw std::invalid_argument("viterbi: emission classes differ from transition matrix");
  }
  if (n == 0) return {};
  for (double v : lp.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument("viterbi: emissions must be finite");
  }
  Matrix log_m(c, c);
  for (std::size_t a = 0; a < c; ++a) {
    for (std::size_t b = 0; b < c; ++b) log_m(a, b) = std::log(t.M(a, b));
  }

  std::vector<double> score(c);
  std::vector<double> next(c);
  std::vector<std::size_t> back(n * c, 0);
  for (std::size_t k = 0; k < c; ++k) score[k] = std::log(t.prior[k]) + lp(0, k);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      std::size_t arg = 0;
      double best = score[0] + log_m(0, k);
      for (std::size_t j = 1; j < c; ++j) {
        const double cand = score[j] + log_m(j, k);
        if (cand > best) {
          best = cand;
          arg = j;
        }
      }
      next[k] = best + lp(i, k);
      back[i * c + k] = arg;
    }
    score.swap(next);
  }
  std::size_t state = 0;
  for (std::size_t k = 1; k < c; ++k) {
    if (score[k] > score[state]) state = k;
  }
  std::vector<int> path(n);
  for (std::size_t i = n; i-- > 0;) {
    path[i] = static_cast<int>(state) + 1;
    if (i > 0) state = back[i * c + state];
  }
  return {std::move(path), static_cast<int>(c)};
}

double path_score(const EmissionSequence& e, const TransitionMatrix& t, const LabelSequence& path) {
  if (path.size() != e.logprobs.rows()) throw std::invalid_argument("path_score: path length differs from emissions");
  if (path.size() == 0) return 0.0;
  auto idx = [&](std::size_t i) { return static_cast<std::size_t>(path[i] - 1); };
  double s = std::log(t.prior[idx(0)]) + e.logprobs(0, idx(0));
  for (std::size_t i = 1; i < path.size(); ++i) s += std::log(t.M(idx(i - 1), idx(i))) + e.logprobs(i, idx(i));
  return s;
}

LabelSequence decode_online(const MulticlassModel& mc, const Matrix& filtered) {
  const Matrix scores = pairwise_scores(mc, filtered);
  std::vector<int> labels(filtered.rows());
  for (std::size_t i = 0; i < filtered.rows(); ++i) labels[i] = oao_vote(scores.row(i), mc.classes);
  return {std::move(labels), mc.classes};
}

Matrix class_probability_matrix(const MulticlassModel& mc, std::span<const PlattParams> platt, const Matrix& filtered) {
  const Matrix scores = one_vs_all_scores(mc, filtered);
  Matrix out(filtered.rows(), static_cast<std::size_t>(mc.classes));
  for (std::size_t i = 0; i < filtered.rows(); ++i) {
    const auto p = class_probabilities(scores.row(i), platt);
    for (std::size_t k = 0; k < p.size(); ++k) out(i, k) = p[k];
  }
  return out;
}

LabelSequence decode_offline(const MulticlassModel& mc, std::span<const PlattParams> platt, const TransitionMatrix& t,
                             const Matrix& filtered, const OfflineOptions& options) {
  Matrix probs = class_probability_matrix(mc, platt, filtered);
  if (options.scaled_likelihood) {
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      for (std::size_t k = 0; k < probs.cols(); ++k) probs(i, k) /= t.prior[k];
    }
  }
  return viterbi(emissions_from_probabilities(probs), t);
}

}  // namespace marginfilter
