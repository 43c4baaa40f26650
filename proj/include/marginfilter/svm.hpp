#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "marginfilter/matrix.hpp"

namespace marginfilter {

struct KernelParams {
  double sigma_k = 1.0;
};

void validate(const KernelParams& k);

// K(i, j) = exp(-|a_i - b_j|^2 / (2 sigma_k^2)).
Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelParams& k);
Matrix kernel_matrix(const Matrix& a, const KernelParams& k);

struct SolverOptions {
  double tol = 1e-3;            // maximal KKT violation accepted
  std::size_t max_iter = 0;     // 0 picks max(10^6, 100 n)
};

// Solution of  max_a  sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//              s.t.   0 <= a_i <= C/n,  sum a_i y_i = 0.
// `objective` is that dual value, which equals the primal
// 1/2 |g|^2 + C/n sum hinge at the optimum.
struct DualSolution {
  std::vector<double> alphas;
  double bias = 0.0;
  double objective = 0.0;
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// SMO with second-order working-set selection. `warm_start`, when non-empty,
// must be feasible (it is projected onto the box; the equality is checked).
// Throws std::invalid_argument on shape errors or when y holds one class.
// A run hitting max_iter returns its last iterate with converged == false.
DualSolution solve_svm_dual(const Matrix& kernel, std::span<const double> y, double C,
                            const SolverOptions& options = {}, std::span<const double> warm_start = {});

// Largest violation of the first-order optimality conditions, in units of the
// dual gradient (the quantity solve_svm_dual drives below tol).
double kkt_violation(const Matrix& kernel, std::span<const double> y, std::span<const double> alphas, double C);

// Dual objective sum a - 1/2 a'Qa.
double dual_objective(const Matrix& kernel, std::span<const double> y, std::span<const double> alphas);

struct SvmModel {
  KernelParams kernel;
  double C = 1.0;
  double box = 0.0;  // C / n
  double bias = 0.0;
  double objective = 0.0;
  bool converged = true;
  std::vector<double> alphas;           // one per training sample
  std::vector<std::size_t> sv_indices;  // training rows with alpha > sv threshold
  Matrix sv_rows;                       // filtered training samples of the SVs
  std::vector<double> sv_labels;        // +1 / -1
  std::vector<double> sv_coef;          // alpha * y

  [[nodiscard]] std::size_t support_size() const noexcept { return sv_indices.size(); }
  // Model of the same problem with labels flipped.
  [[nodiscard]] SvmModel negated() const;
};

// Alphas above this fraction of C/n mark support vectors.
inline constexpr double kSupportThreshold = 1e-8;

// Trains on filtered samples (rows) with +1/-1 labels.
SvmModel train_svm(const Matrix& samples, std::span<const double> y, double C, const KernelParams& kernel,
                   const SolverOptions& options = {}, std::span<const double> warm_start = {});

// Same, reusing a Gram matrix already computed for `samples`.
SvmModel train_svm(const Matrix& samples, const Matrix& gram, std::span<const double> y, double C,
                   const KernelParams& kernel, const SolverOptions& options = {},
                   std::span<const double> warm_start = {});

// g(i) = sum_j alpha_j y_j k(x_i, sv_j) + bias.
std::vector<double> decision_scores(const SvmModel& model, const Matrix& samples);

struct PlattParams {
  double A = 0.0;
  double B = 0.0;
  // P(y = +1 | score) = 1 / (1 + exp(A score + B)).
  [[nodiscard]] double probability(double score) const noexcept;
};

// Regularized-target Newton fit with backtracking, labels +1/-1.
PlattParams platt_fit(std::span<const double> scores, std::span<const double> labels);

// Regularized negative log-likelihood minimized by platt_fit.
double platt_objective(std::span<const double> scores, std::span<const double> labels, double A, double B);

// One-Against-One bank (pairs (a, b), a < b, ordered lexicographically, with
// class a as +1) plus a One-Against-All bank (class k vs rest, k as +1).
struct MulticlassModel {
  int classes = 0;
  std::vector<SvmModel> pairwise;
  std::vector<SvmModel> one_vs_all;
};

// Index of pair (a, b), 0-based classes a < b, in MulticlassModel::pairwise.
std::size_t pair_index(int a, int b, int classes) noexcept;

// Trains both banks on filtered samples. `labels` hold 1..classes.
MulticlassModel train_multiclass(const Matrix& samples, std::span<const int> labels, int classes, double C,
                                 const KernelParams& kernel, const SolverOptions& options = {});

// Class of one sample by pairwise voting. Ties go to the largest summed
// |margin| of the won duels, then to the lowest class.
int oao_vote(std::span<const double> pairwise_scores, int classes);
int oao_vote(const MulticlassModel& mc, std::span<const double> sample);

// m x P matrix of pairwise decision scores.
Matrix pairwise_scores(const MulticlassModel& mc, const Matrix& samples);
// m x c matrix of one-vs-all decision scores.
Matrix one_vs_all_scores(const MulticlassModel& mc, const Matrix& samples);

// Platt sigmoids of the one-vs-all scores, renormalized to sum to one.
std::vector<double> class_probabilities(std::span<const double> one_vs_all_scores,
                                        std::span<const PlattParams> platt);
std::vector<double> class_probabilities(const MulticlassModel& mc, std::span<const PlattParams> platt,
                                        std::span<const double> sample);

// Fits one PlattParams per class from held-out one-vs-all scores.
std::vector<PlattParams> calibrate(const MulticlassModel& mc, const Matrix& samples, std::span<const int> labels);

}  // namespace marginfilter
