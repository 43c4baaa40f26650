#pragma once

#include <optional>
#include <span>
#include <vector>

#include "marginfilter/matrix.hpp"
#include "marginfilter/signal.hpp"
#include "marginfilter/svm.hpp"

namespace marginfilter {

enum class RegularizerKind { frobenius, weighted_frobenius, mixed_norm };

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::frobenius;
  double lambda = 0.0;
  std::vector<double> weights;  // per channel, weighted_frobenius only
};

void validate(const RegularizerSpec& reg, std::size_t channels);

struct LineSearchParams {
  double c1 = 1e-4;         // Armijo constant
  double backtrack = 0.5;   // step shrink factor
  int max_halvings = 30;
};

struct LearnerConfig {
  double C = 1.0;
  KernelParams kernel;
  RegularizerSpec reg;
  std::size_t f = 1;
  int n0 = 0;
  int max_cg_iters = 200;
  double tol_rel_J = 1e-5;
  double tol_dF = 1e-6;
  LineSearchParams line_search;
  int mm_max_outer = 20;
  double mm_eps = 1e-8;
  SolverOptions svm{1e-4, 0};
};

void validate(const LearnerConfig& cfg, std::size_t channels);

struct IterationRecord {
  int iter = 0;
  double J = 0.0;
  double normF = 0.0;
};

struct TrainedFilterModel {
  FilterBank filter;
  SvmModel svm;
  std::vector<IterationRecord> history;  // accepted CG steps, starting with the initial filter
  // J'(F) + lambda * mixed_norm(F) at the initial filter and after every
  // outer majorization-minimization step (SKF-SVM only).
  std::vector<double> surrogate;
  bool svm_converged = true;
};

struct RegularizerValue {
  double value = 0.0;
  Matrix gradient;
};

// sum F(u, v)^2 and 2 F.
RegularizerValue frobenius_reg(const FilterBank& filter);
// sum_v w_v sum_u F(u, v)^2 and its gradient.
RegularizerValue weighted_frobenius_reg(const FilterBank& filter, std::span<const double> weights);
// sum_v |F(., v)|_2.
double mixed_norm(const FilterBank& filter);

// Omega(F) for any regularizer kind.
double regularizer_value(const FilterBank& filter, const RegularizerSpec& reg);

struct ObjectiveValue {
  double value = 0.0;     // J'(F) + lambda Omega(F)
  double data_term = 0.0; // J'(F), the optimal SVM objective on the filtered samples
  double penalty = 0.0;   // lambda Omega(F)
  SvmModel svm;
};

// Filters x, solves the SVM (warm-started from `warm_alphas` when given) on
// +1/-1 labels `y`.
ObjectiveValue objective_J(const FilterBank& filter, const SignalMatrix& x, std::span<const double> y,
                           const LearnerConfig& cfg, std::span<const double> warm_alphas = {});

// Gradient of J'(F) + lambda Omega(F) with alpha held at `alphas`, the SVM
// solution at `filter`. Not defined for the mixed norm.
Matrix gradient_J(const FilterBank& filter, const SignalMatrix& x, std::span<const double> y,
                  std::span<const double> alphas, const LearnerConfig& cfg);

// Conjugate gradient (Fletcher-Reeves) on J(F) from the average filter, or
// from `init` when given. Requires a differentiable regularizer.
TrainedFilterModel learn_kf_svm(const SignalMatrix& x, std::span<const double> y, const LearnerConfig& cfg,
                                const std::optional<FilterBank>& init = std::nullopt);

// Mixed-norm regularized filter learning by majorization-minimization over
// weighted Frobenius subproblems.
TrainedFilterModel learn_skf_svm(const SignalMatrix& x, std::span<const double> y, const LearnerConfig& cfg);

struct MulticlassFilterModel {
  FilterBank filter;
  MulticlassModel models;
  std::vector<IterationRecord> history;
  std::vector<double> surrogate;
};

// One filter shared by all classes. For more than two classes the pairwise
// One-Against-One objectives are summed into a single J'(F); for two classes
// this is exactly learn_kf_svm / learn_skf_svm. The final banks are retrained
// on the learned filtering. The regularizer kind selects KF (differentiable)
// or SKF (mixed norm).
MulticlassFilterModel learn_multiclass_filter(const SignalMatrix& x, const LabelSequence& y, const LearnerConfig& cfg);

// Binary view for a two-class sequence: class 1 -> +1, class 2 -> -1.
std::vector<double> binary_labels(const LabelSequence& y);

}  // namespace marginfilter
