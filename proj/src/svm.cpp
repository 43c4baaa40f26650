#include "marginfilter/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "marginfilter/kernels.hpp"

namespace marginfilter {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_labels(std::span<const double> y) {
  bool pos = false;
  bool neg = false;
  for (double v : y) {
    if (v == 1.0) {
      pos = true;
    } else if (v == -1.0) {
      neg = true;
    } else {
      throw std::invalid_argument("binary labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw std::invalid_argument("SVM training needs both classes");
}

// Working-set SMO state on a dense Gram matrix.
class SmoSolver {
 public:
  SmoSolver(const Matrix& k, std::span<const double> y, double upper)
      : k_(k), y_(y), upper_(upper), n_(y.size()), alpha_(n_, 0.0), grad_(n_, -1.0) {}

  void warm_start(std::span<const double> alpha) {
    double balance = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      alpha_[i] = std::clamp(alpha[i], 0.0, upper_);
      balance += alpha_[i] * y_[i];
    }
    if (std::abs(balance) > 1e-8 * std::max(1.0, upper_ * static_cast<double>(n_))) {
      throw std::invalid_argument("warm start violates sum alpha_i y_i = 0");
    }
    std::fill(grad_.begin(), grad_.end(), -1.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (alpha_[j] == 0.0) continue;
      const double aj = alpha_[j] * y_[j];
      const auto kj = k_.row(j);
      for (std::size_t i = 0; i < n_; ++i) grad_[i] += y_[i] * aj * kj[i];
    }
  }

  // Returns true when converged.
  bool run(double tol, std::size_t max_iter, std::size_t& iterations) {
    for (iterations = 0; iterations < max_iter; ++iterations) {
      std::size_t i = 0;
      std::size_t j = 0;
      if (!select(tol, i, j)) return true;
      update(i, j);
    }
    std::size_t i = 0;
    std::size_t j = 0;
    return !select(tol, i, j);
  }

  [[nodiscard]] double violation() const {
    double gmax = -kInf;
    double gmax2 = -kInf;
    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] > 0) {
        if (!at_upper(t)) gmax = std::max(gmax, -grad_[t]);
        if (!at_lower(t)) gmax2 = std::max(gmax2, grad_[t]);
      } else {
        if (!at_lower(t)) gmax = std::max(gmax, grad_[t]);
        if (!at_upper(t)) gmax2 = std::max(gmax2, -grad_[t]);
      }
    }
    return std::max(0.0, gmax + gmax2);
  }

  [[nodiscard]] double bias() const {
    double ub = kInf;
    double lb = -kInf;
    double sum_free = 0.0;
    std::size_t free = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double yg = y_[i] * grad_[i];
      if (at_upper(i)) {
        if (y_[i] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (at_lower(i)) {
        if (y_[i] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++free;
        sum_free += yg;
      }
    }
    const double rho = free > 0 ? sum_free / static_cast<double>(free) : 0.5 * (ub + lb);
    return -rho;
  }

  [[nodiscard]] double objective() const {
    // f = 1/2 a'Qa - e'a = 1/2 sum a_i (G_i - 1); dual value is -f.
    double f = 0.0;
    for (std::size_t i = 0; i < n_; ++i) f += alpha_[i] * (grad_[i] - 1.0);
    return -0.5 * f;
  }

  std::vector<double> take_alphas() { return std::move(alpha_); }

 private:
  [[nodiscard]] bool at_upper(std::size_t i) const noexcept { return alpha_[i] >= upper_; }
  [[nodiscard]] bool at_lower(std::size_t i) const noexcept { return alpha_[i] <= 0.0; }
  [[nodiscard]] double q(std::size_t i, std::size_t j) const noexcept { return y_[i] * y_[j] * k_(i, j); }

  bool select(double tol, std::size_t& out_i, std::size_t& out_j) const {
    double gmax = -kInf;
    std::size_t imax = n_;
    for (std::size_t t = 0; t < n_; ++t) {
      if (y_[t] > 0) {
        if (!at_upper(t) && -grad_[t] >= gmax) {
          gmax = -grad_[t];
          imax = t;
        }
      } else if (!at_lower(t) && grad_[t] >= gmax) {
        gmax = grad_[t];
        imax = t;
      }
    }
    if (imax == n_) return false;
    const std::size_t i = imax;
    const auto ki = k_.row(i);
    const double kii = k_(i, i);
    double gmax2 = -kInf;
    double best = kInf;
    std::size_t jmin = n_;
    for (std::size_t t = 0; t < n_; ++t) {
      const double qit = y_[i] * y_[t] * ki[t];
      if (y_[t] > 0) {
        if (at_lower(t)) continue;
        const double diff = gmax + grad_[t];
        gmax2 = std::max(gmax2, grad_[t]);
        if (diff > 0) {
          const double quad = kii + k_(t, t) - 2.0 * y_[i] * qit;
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best) {
            best = obj;
            jmin = t;
          }
        }
      } else {
        if (at_upper(t)) continue;
        const double diff = gmax - grad_[t];
        gmax2 = std::max(gmax2, -grad_[t]);
        if (diff > 0) {
          const double quad = kii + k_(t, t) + 2.0 * y_[i] * qit;
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best) {
            best = obj;
            jmin = t;
          }
        }
      }
    }
    if (gmax + gmax2 < tol || jmin == n_) return false;
    out_i = i;
    out_j = jmin;
    return true;
  }

  void update(std::size_t i, std::size_t j) {
    const double c = upper_;
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    const double qij = q(i, j);
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (y_[i] != y_[j]) {
      double quad = k_(i, i) + k_(j, j) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else if (ai < 0) {
        ai = 0; aj = -diff;
      }
      if (diff > 0) {
        if (ai > c) { ai = c; aj = c - diff; }
      } else if (aj > c) {
        aj = c; ai = c + diff;
      }
    } else {
      double quad = k_(i, i) + k_(j, j) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) { ai = c; aj = sum - c; }
      } else if (aj < 0) {
        aj = 0; ai = sum;
      }
      if (sum > c) {
        if (aj > c) { aj = c; ai = sum - c; }
      } else if (ai < 0) {
        ai = 0; aj = sum;
      }
    }
    const double di = (ai - old_i) * y_[i];
    const double dj = (aj - old_j) * y_[j];
    const auto ki = k_.row(i);
    const auto kj = k_.row(j);
    for (std::size_t t = 0; t < n_; ++t) grad_[t] += y_[t] * (ki[t] * di + kj[t] * dj);
  }

  const Matrix& k_;
  std::span<const double> y_;
  double upper_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
};

void check_square(const Matrix& kernel, std::size_t n) {
  if (kernel.rows() != n || kernel.cols() != n) {
    throw std::invalid_argument("kernel matrix must be n x n with n = " + std::to_string(n));
  }
}

}  // namespace

void validate(const KernelParams& k) {
  if (!(k.sigma_k > 0.0) || !std::isfinite(k.sigma_k)) throw std::invalid_argument("sigma_k must be positive and finite");
}

Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelParams& k) {
  validate(k);
  if (a.cols() != b.cols()) throw std::invalid_argument("kernel_matrix: channel count mismatch");
  return kernels::gaussian_gram(a, b, k.sigma_k);
}

Matrix kernel_matrix(const Matrix& a, const KernelParams& k) {
  validate(k);
  return kernels::gaussian_gram(a, k.sigma_k);
}

DualSolution solve_svm_dual(const Matrix& kernel, std::span<const double> y, double C, const SolverOptions& options,
                            std::span<const double> warm_start) {
  const std::size_t n = y.size();
  check_square(kernel, n);
  check_labels(y);
  if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("C must be positive and finite");
  const double upper = C / static_cast<double>(n);

  SmoSolver smo(kernel, y, upper);
  if (!warm_start.empty()) {
    if (warm_start.size() != n) throw std::invalid_argument("warm start has the wrong length");
    smo.warm_start(warm_start);
  }
  const std::size_t max_iter = options.max_iter > 0 ? options.max_iter : std::max<std::size_t>(1000000, 100 * n);
  DualSolution out;
  out.converged = smo.run(options.tol, max_iter, out.iterations);
  out.kkt_violation = smo.violation();
  out.bias = smo.bias();
  out.objective = smo.objective();
  out.alphas = smo.take_alphas();
  return out;
}

double kkt_violation(const Matrix& kernel, std::span<const double> y, std::span<const double> alphas, double C) {
  check_square(kernel, y.size());
  SmoSolver smo(kernel, y, C / static_cast<double>(y.size()));
  smo.warm_start(alphas);
  return smo.violation();
}

double dual_objective(const Matrix& kernel, std::span<const double> y, std::span<const double> alphas) {
  check_square(kernel, y.size());
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    linear += alphas[i];
    for (std::size_t j = 0; j < y.size(); ++j) quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel(i, j);
  }
  return linear - 0.5 * quad;
}

SvmModel SvmModel::negated() const {
  SvmModel m = *this;
  m.bias = -bias;
  for (auto& l : m.sv_labels) l = -l;
  for (auto& c : m.sv_coef) c = -c;
  return m;
}

SvmModel train_svm(const Matrix& samples, std::span<const double> y, double C, const KernelParams& kernel,
                   const SolverOptions& options, std::span<const double> warm_start) {
  return train_svm(samples, kernel_matrix(samples, kernel), y, C, kernel, options, warm_start);
}

SvmModel train_svm(const Matrix& samples, const Matrix& gram, std::span<const double> y, double C,
                   const KernelParams& kernel, const SolverOptions& options, std::span<const double> warm_start) {
  if (samples.rows() != y.size()) throw std::invalid_argument("train_svm: label count differs from sample count");
  DualSolution sol = solve_svm_dual(gram, y, C, options, warm_start);
  SvmModel m;
  m.kernel = kernel;
  m.C = C;
  m.box = C / static_cast<double>(y.size());
  m.bias = sol.bias;
  m.objective = sol.objective;
  m.converged = sol.converged;
  const double threshold = kSupportThreshold * m.box;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (sol.alphas[i] > threshold) {
      m.sv_indices.push_back(i);
      m.sv_labels.push_back(y[i]);
      m.sv_coef.push_back(sol.alphas[i] * y[i]);
    }
  }
  m.sv_rows = select_rows(samples, m.sv_indices);
  m.alphas = std::move(sol.alphas);
  return m;
}

std::vector<double> decision_scores(const SvmModel& model, const Matrix& samples) {
  if (!model.sv_rows.empty() && samples.cols() != model.sv_rows.cols()) {
    throw std::invalid_argument("decision_scores: sample has " + std::to_string(samples.cols()) +
                                " channels, model expects " + std::to_string(model.sv_rows.cols()));
  }
  return kernels::kernel_expansion(samples, model.sv_rows, model.sv_coef, model.kernel.sigma_k, model.bias);
}

double PlattParams::probability(double score) const noexcept {
  const double z = A * score + B;
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace {

struct PlattTargets {
  std::vector<double> t;
  double n_pos = 0;
  double n_neg = 0;
};

PlattTargets platt_targets(std::span<const double> labels) {
  PlattTargets out;
  for (double l : labels) (l > 0 ? out.n_pos : out.n_neg) += 1.0;
  const double hi = (out.n_pos + 1.0) / (out.n_pos + 2.0);
  const double lo = 1.0 / (out.n_neg + 2.0);
  out.t.reserve(labels.size());
  for (double l : labels) out.t.push_back(l > 0 ? hi : lo);
  return out;
}

double platt_value(std::span<const double> scores, std::span<const double> t, double A, double B) {
  double f = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double z = scores[i] * A + B;
    if (z >= 0) {
      f += t[i] * z + std::log1p(std::exp(-z));
    } else {
      f += (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
  }
  return f;
}

}  // namespace

double platt_objective(std::span<const double> scores, std::span<const double> labels, double A, double B) {
  if (scores.size() != labels.size()) throw std::invalid_argument("platt: scores and labels differ in length");
  return platt_value(scores, platt_targets(labels).t, A, B);
}

PlattParams platt_fit(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("platt: scores and labels differ in length");
  const PlattTargets tg = platt_targets(labels);
  if (tg.n_pos == 0 || tg.n_neg == 0) throw std::invalid_argument("platt: both classes must be present");

  PlattParams p{0.0, std::log((tg.n_neg + 1.0) / (tg.n_pos + 1.0))};
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) return p;  // no information beyond the base rate

  constexpr int kMaxIter = 200;
  constexpr double kMinStep = 1e-12;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-10;
  double fval = platt_value(scores, tg.t, p.A, p.B);
  for (int it = 0; it < kMaxIter; ++it) {
    double h11 = kSigma;
    double h22 = kSigma;
    double h21 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = scores[i] * p.A + p.B;
      double pr;
      double qr;
      if (z >= 0) {
        const double e = std::exp(-z);
        pr = e / (1.0 + e);
        qr = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        pr = 1.0 / (1.0 + e);
        qr = e / (1.0 + e);
      }
      const double d2 = pr * qr;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = tg.t[i] - pr;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    bool moved = false;
    while (step >= kMinStep) {
      const double nA = p.A + step * dA;
      const double nB = p.B + step * dB;
      const double nf = platt_value(scores, tg.t, nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        p = {nA, nB};
        fval = nf;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return p;
}

std::size_t pair_index(int a, int b, int classes) noexcept {
  // pairs (0,1), (0,2), ..., (0,c-1), (1,2), ...
  const auto c = static_cast<std::size_t>(classes);
  const auto ua = static_cast<std::size_t>(a);
  return ua * c - ua * (ua + 1) / 2 + static_cast<std::size_t>(b - a - 1);
}

MulticlassModel train_multiclass(const Matrix& samples, std::span<const int> labels, int classes, double C,
                                 const KernelParams& kernel, const SolverOptions& options) {
  if (classes < 2) throw std::invalid_argument("multiclass training needs at least two classes");
  if (samples.rows() != labels.size()) throw std::invalid_argument("train_multiclass: label count differs from sample count");
  const Matrix gram = kernel_matrix(samples, kernel);
  MulticlassModel mc;
  mc.classes = classes;
  for (int a = 0; a < classes; ++a) {
    for (int b = a + 1; b < classes; ++b) {
      std::vector<std::size_t> rows;
      std::vector<double> y;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == a + 1 || labels[i] == b + 1) {
          rows.push_back(i);
          y.push_back(labels[i] == a + 1 ? 1.0 : -1.0);
        }
      }
      Matrix sub(rows.size(), rows.size());
      for (std::size_t p = 0; p < rows.size(); ++p) {
        for (std::size_t q = 0; q < rows.size(); ++q) sub(p, q) = gram(rows[p], rows[q]);
      }
      mc.pairwise.push_back(train_svm(select_rows(samples, rows), sub, y, C, kernel, options));
    }
  }
  if (classes == 2) {
    mc.one_vs_all = {mc.pairwise[0], mc.pairwise[0].negated()};
    return mc;
  }
  for (int k = 0; k < classes; ++k) {
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == k + 1 ? 1.0 : -1.0;
    mc.one_vs_all.push_back(train_svm(samples, gram, y, C, kernel, options));
  }
  return mc;
}

int oao_vote(std::span<const double> scores, int classes) {
  std::vector<int> votes(static_cast<std::size_t>(classes), 0);
  std::vector<double> margin(static_cast<std::size_t>(classes), 0.0);
  for (int a = 0; a < classes; ++a) {
    for (int b = a + 1; b < classes; ++b) {
      const double s = scores[pair_index(a, b, classes)];
      const auto winner = static_cast<std::size_t>(s >= 0 ? a : b);
      ++votes[winner];
      margin[winner] += std::abs(s);
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < votes.size(); ++k) {
    if (votes[k] > votes[best] || (votes[k] == votes[best] && margin[k] > margin[best])) best = k;
  }
  return static_cast<int>(best) + 1;
}

int oao_vote(const MulticlassModel& mc, std::span<const double> sample) {
  Matrix one(1, sample.size(), std::vector<double>(sample.begin(), sample.end()));
  const Matrix s = pairwise_scores(mc, one);
  return oao_vote(s.row(0), mc.classes);
}

Matrix pairwise_scores(const MulticlassModel& mc, const Matrix& samples) {
  Matrix out(samples.rows(), mc.pairwise.size());
  for (std::size_t p = 0; p < mc.pairwise.size(); ++p) {
    const auto s = decision_scores(mc.pairwise[p], samples);
    for (std::size_t i = 0; i < s.size(); ++i) out(i, p) = s[i];
  }
  return out;
}

Matrix one_vs_all_scores(const MulticlassModel& mc, const Matrix& samples) {
  Matrix out(samples.rows(), mc.one_vs_all.size());
  if (mc.classes == 2 && mc.one_vs_all.size() == 2) {
    const auto s = decision_scores(mc.one_vs_all[0], samples);
    for (std::size_t i = 0; i < s.size(); ++i) {
      out(i, 0) = s[i];
      out(i, 1) = -s[i];
    }
    return out;
  }
  for (std::size_t k = 0; k < mc.one_vs_all.size(); ++k) {
    const auto s = decision_scores(mc.one_vs_all[k], samples);
    for (std::size_t i = 0; i < s.size(); ++i) out(i, k) = s[i];
  }
  return out;
}

std::vector<double> class_probabilities(std::span<const double> scores, std::span<const PlattParams> platt) {
  if (scores.size() != platt.size()) throw std::invalid_argument("class_probabilities: one Platt fit per class required");
  constexpr double kFloor = 1e-12;
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::max(platt[k].probability(scores[k]), kFloor);
    total += p[k];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> class_probabilities(const MulticlassModel& mc, std::span<const PlattParams> platt,
                                        std::span<const double> sample) {
  Matrix one(1, sample.size(), std::vector<double>(sample.begin(), sample.end()));
  const Matrix s = one_vs_all_scores(mc, one);
  return class_probabilities(s.row(0), platt);
}

std::vector<PlattParams> calibrate(const MulticlassModel& mc, const Matrix& samples, std::span<const int> labels) {
  if (samples.rows() != labels.size()) throw std::invalid_argument("calibrate: label count differs from sample count");
  const Matrix scores = one_vs_all_scores(mc, samples);
  std::vector<PlattParams> out;
  std::vector<double> s(samples.rows());
  std::vector<double> y(samples.rows());
  for (int k = 0; k < mc.classes; ++k) {
    for (std::size_t i = 0; i < samples.rows(); ++i) {
      s[i] = scores(i, static_cast<std::size_t>(k));
      y[i] = labels[i] == k + 1 ? 1.0 : -1.0;
    }
    const bool has_pos = std::find(y.begin(), y.end(), 1.0) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), -1.0) != y.end();
    if (has_pos && has_neg) {
      out.push_back(platt_fit(s, y));
    } else {
      // Class absent (or alone) in the calibration set: fall back to the
      // score sign with a unit slope.
      out.push_back({-1.0, 0.0});
    }
  }
  return out;
}

}  // namespace marginfilter
