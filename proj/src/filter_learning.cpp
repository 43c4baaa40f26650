#include "marginfilter/filter_learning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "marginfilter/kernels.hpp"

namespace marginfilter {

namespace {

// One binary SVM problem on a subset of the signal's samples.
struct BinaryTask {
  std::vector<std::size_t> rows;
  std::vector<double> y;
  bool all_rows = false;
};

struct Evaluation {
  double value = 0.0;
  double data = 0.0;
  double penalty = 0.0;
  bool converged = true;
  std::vector<SvmModel> models;
  Matrix filtered;
};

Matrix regularizer_gradient(const FilterBank& filter, const RegularizerSpec& reg) {
  switch (reg.kind) {
    case RegularizerKind::frobenius:
      return frobenius_reg(filter).gradient;
    case RegularizerKind::weighted_frobenius:
      return weighted_frobenius_reg(filter, reg.weights).gradient;
    case RegularizerKind::mixed_norm:
      break;
  }
  throw std::invalid_argument("the mixed norm is not differentiable; use learn_skf_svm");
}

class FilterObjective {
 public:
  FilterObjective(const Matrix& x, std::vector<BinaryTask> tasks, const LearnerConfig& cfg)
      : x_(x), tasks_(std::move(tasks)), cfg_(cfg) {}

  [[nodiscard]] Evaluation evaluate(const FilterBank& filter, const RegularizerSpec& reg,
                                    const Evaluation* warm) const {
    Evaluation e;
    e.filtered = apply_filter(x_, filter);
    for (std::size_t t = 0; t < tasks_.size(); ++t) {
      const BinaryTask& task = tasks_[t];
      std::span<const double> start;
      if (warm != nullptr) start = warm->models[t].alphas;
      if (task.all_rows) {
        e.models.push_back(train_svm(e.filtered, task.y, cfg_.C, cfg_.kernel, cfg_.svm, start));
      } else {
        e.models.push_back(train_svm(select_rows(e.filtered, task.rows), task.y, cfg_.C, cfg_.kernel, cfg_.svm, start));
      }
      e.data += e.models.back().objective;
      e.converged = e.converged && e.models.back().converged;
    }
    e.penalty = reg.lambda * regularizer_value(filter, reg);
    e.value = e.data + e.penalty;
    return e;
  }

  [[nodiscard]] Matrix gradient(const FilterBank& filter, const RegularizerSpec& reg, const Evaluation& e) const {
    Matrix grad(filter.length(), filter.channels());
    for (std::size_t t = 0; t < tasks_.size(); ++t) {
      const SvmModel& m = e.models[t];
      std::vector<std::size_t> rows(m.sv_indices.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        rows[k] = tasks_[t].all_rows ? m.sv_indices[k] : tasks_[t].rows[m.sv_indices[k]];
      }
      axpy(1.0, kernels::filter_gradient(x_, e.filtered, rows, m.sv_coef, filter.length(), filter.n0,
                                         cfg_.kernel.sigma_k),
           grad);
    }
    if (reg.lambda != 0.0) axpy(reg.lambda, regularizer_gradient(filter, reg), grad);
    return grad;
  }

 private:
  const Matrix& x_;
  std::vector<BinaryTask> tasks_;
  const LearnerConfig& cfg_;
};

void zero_frozen(Matrix& m, const std::vector<bool>& frozen) {
  for (std::size_t v = 0; v < frozen.size(); ++v) {
    if (!frozen[v]) continue;
    for (std::size_t u = 0; u < m.rows(); ++u) m(u, v) = 0.0;
  }
}

struct CgOutcome {
  FilterBank filter;
  Evaluation eval;
};

// Fletcher-Reeves conjugate gradient with Armijo backtracking along D.
CgOutcome run_cg(const FilterObjective& objective, FilterBank filter, const RegularizerSpec& reg,
                 const std::vector<bool>& frozen, const LearnerConfig& cfg, const Evaluation* warm,
                 std::vector<IterationRecord>& history) {
  Evaluation current = objective.evaluate(filter, reg, warm);
  int iter = history.empty() ? 0 : history.back().iter;
  history.push_back({iter, current.value, std::sqrt(squared_norm(filter.coeffs))});
  if (cfg.max_cg_iters <= 0) return {std::move(filter), std::move(current)};

  const auto restart_period = static_cast<int>(filter.length() * filter.channels());
  Matrix grad = objective.gradient(filter, reg, current);
  zero_frozen(grad, frozen);
  double grad_norm2 = squared_norm(grad);
  Matrix direction;
  double prev_grad_norm2 = 0.0;
  double prev_step = 0.0;
  double prev_slope = 0.0;

  for (int it = 0; it < cfg.max_cg_iters; ++it) {
    if (grad_norm2 == 0.0) break;
    bool steepest = it == 0 || it % restart_period == 0;
    if (!steepest) {
      const double beta = grad_norm2 / prev_grad_norm2;
      for (std::size_t k = 0; k < direction.size(); ++k) {
        direction.values()[k] = -grad.values()[k] + beta * direction.values()[k];
      }
      if (dot(grad, direction) >= 0.0) steepest = true;
    }

    bool accepted = false;
    double step = 0.0;
    double slope = 0.0;
    FilterBank trial;
    Evaluation trial_eval;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (steepest) {
        direction = grad;
        for (double& v : direction.values()) v = -v;
      }
      slope = dot(grad, direction);
      const double dir_norm = std::sqrt(squared_norm(direction));
      if (prev_step > 0.0) {
        step = std::min(prev_step * prev_slope / slope, 10.0 * prev_step);
      } else {
        const double fnorm = std::sqrt(squared_norm(filter.coeffs));
        step = (fnorm > 0.0 ? fnorm : 1.0) / dir_norm;
      }
      for (int h = 0; h <= cfg.line_search.max_halvings; ++h) {
        Matrix coeffs = filter.coeffs;
        axpy(step, direction, coeffs);
        zero_frozen(coeffs, frozen);
        trial = FilterBank(std::move(coeffs), filter.n0);
        trial_eval = objective.evaluate(trial, reg, &current);
        if (trial_eval.value <= current.value + cfg.line_search.c1 * step * slope) {
          accepted = true;
          break;
        }
        step *= cfg.line_search.backtrack;
      }
      if (!accepted && steepest) break;
      steepest = true;
    }
    if (!accepted) break;

    const double moved = step * std::sqrt(squared_norm(direction));
    const double rel = (current.value - trial_eval.value) / std::max(std::abs(current.value), 1e-300);
    filter = std::move(trial);
    current = std::move(trial_eval);
    history.push_back({++iter, current.value, std::sqrt(squared_norm(filter.coeffs))});
    prev_step = step;
    prev_slope = slope;
    if (rel < cfg.tol_rel_J || moved < cfg.tol_dF) break;

    prev_grad_norm2 = grad_norm2;
    grad = objective.gradient(filter, reg, current);
    zero_frozen(grad, frozen);
    grad_norm2 = squared_norm(grad);
  }
  return {std::move(filter), std::move(current)};
}

struct LearnOutcome {
  FilterBank filter;
  Evaluation eval;
  std::vector<IterationRecord> history;
  std::vector<double> surrogate;
};

LearnOutcome learn_kf(const Matrix& x, std::vector<BinaryTask> tasks, const LearnerConfig& cfg,
                      FilterBank init) {
  FilterObjective objective(x, std::move(tasks), cfg);
  LearnOutcome out;
  const std::vector<bool> frozen(x.cols(), false);
  auto cg = run_cg(objective, std::move(init), cfg.reg, frozen, cfg, nullptr, out.history);
  out.filter = std::move(cg.filter);
  out.eval = std::move(cg.eval);
  return out;
}

LearnOutcome learn_skf(const Matrix& x, std::vector<BinaryTask> tasks, const LearnerConfig& cfg) {
  FilterObjective objective(x, std::move(tasks), cfg);
  const std::size_t d = x.cols();
  const double lambda = cfg.reg.lambda;
  LearnOutcome out;
  std::vector<bool> frozen(d, false);

  // sqrt(s) <= sqrt(s0) / 2 + s / (2 sqrt(s0)), so the majorizer of
  // lambda * mixed_norm is (lambda / 2) sum_v d_v |F_v|^2 + const with
  // d_v = 1 / |F0_v|.
  RegularizerSpec inner{RegularizerKind::weighted_frobenius, 0.5 * lambda, std::vector<double>(d, 1.0)};
  FilterBank filter = make_average_filter(cfg.f, cfg.n0, d);
  Evaluation current = objective.evaluate(filter, inner, nullptr);
  out.surrogate.push_back(current.data + lambda * mixed_norm(filter));

  for (int outer = 0; outer < cfg.mm_max_outer; ++outer) {
    auto cg = run_cg(objective, filter, inner, frozen, cfg, &current, out.history);
    FilterBank next = std::move(cg.filter);
    current = std::move(cg.eval);

    bool newly_frozen = false;
    for (std::size_t v = 0; v < d; ++v) {
      const double norm = next.column_norm(v);
      if (!frozen[v] && norm < cfg.mm_eps) {
        frozen[v] = true;
        newly_frozen = true;
      }
      inner.weights[v] = 1.0 / std::max(norm, cfg.mm_eps);
    }
    if (newly_frozen) {
      zero_frozen(next.coeffs, frozen);
      current = objective.evaluate(next, inner, &current);
    }
    out.surrogate.push_back(current.data + lambda * mixed_norm(next));

    Matrix delta = next.coeffs;
    axpy(-1.0, filter.coeffs, delta);
    filter = std::move(next);
    if (std::sqrt(squared_norm(delta)) < cfg.tol_dF) break;
  }
  out.filter = std::move(filter);
  out.eval = std::move(current);
  return out;
}

BinaryTask full_task(std::span<const double> y) {
  BinaryTask t;
  t.y.assign(y.begin(), y.end());
  t.rows.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t.rows[i] = i;
  t.all_rows = true;
  return t;
}

void check_inputs(const SignalMatrix& x, std::span<const double> y, const LearnerConfig& cfg) {
  validate_signal(x);
  validate(cfg, x.cols());
  if (y.size() != x.rows()) throw std::invalid_argument("label count differs from sample count");
}

}  // namespace

void validate(const RegularizerSpec& reg, std::size_t channels) {
  if (!(reg.lambda >= 0.0) || !std::isfinite(reg.lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  if (reg.kind == RegularizerKind::weighted_frobenius) {
    if (reg.weights.size() != channels) throw std::invalid_argument("weighted Frobenius needs one weight per channel");
    for (double w : reg.weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("channel weights must be positive and finite");
    }
  }
}

void validate(const LearnerConfig& cfg, std::size_t channels) {
  if (!(cfg.C > 0.0) || !std::isfinite(cfg.C)) throw std::invalid_argument("C must be positive");
  validate(cfg.kernel);
  validate(cfg.reg, channels);
  if (cfg.f == 0) throw std::invalid_argument("filter length f must be >= 1");
  if (cfg.n0 < 0 || cfg.n0 >= static_cast<int>(cfg.f)) throw std::invalid_argument("filter delay n0 must lie in [0, f-1]");
  if (cfg.max_cg_iters < 0 || cfg.mm_max_outer < 0) throw std::invalid_argument("iteration limits must be >= 0");
  if (!(cfg.tol_rel_J >= 0.0) || !(cfg.tol_dF >= 0.0)) throw std::invalid_argument("tolerances must be >= 0");
  if (!(cfg.line_search.c1 > 0.0 && cfg.line_search.c1 < 1.0)) throw std::invalid_argument("Armijo constant must lie in (0, 1)");
  if (!(cfg.line_search.backtrack > 0.0 && cfg.line_search.backtrack < 1.0)) throw std::invalid_argument("backtrack factor must lie in (0, 1)");
  if (!(cfg.mm_eps > 0.0)) throw std::invalid_argument("mm_eps must be positive");
}

RegularizerValue frobenius_reg(const FilterBank& filter) {
  RegularizerValue r{squared_norm(filter.coeffs), filter.coeffs};
  for (double& g : r.gradient.values()) g *= 2.0;
  return r;
}

RegularizerValue weighted_frobenius_reg(const FilterBank& filter, std::span<const double> weights) {
  if (weights.size() != filter.channels()) throw std::invalid_argument("weighted Frobenius needs one weight per channel");
  RegularizerValue r{0.0, Matrix(filter.length(), filter.channels())};
  for (std::size_t u = 0; u < filter.length(); ++u) {
    for (std::size_t v = 0; v < filter.channels(); ++v) {
      const double c = filter.coeffs(u, v);
      r.value += weights[v] * c * c;
      r.gradient(u, v) = 2.0 * weights[v] * c;
    }
  }
  return r;
}

double mixed_norm(const FilterBank& filter) {
  double s = 0.0;
  for (std::size_t v = 0; v < filter.channels(); ++v) s += filter.column_norm(v);
  return s;
}

double regularizer_value(const FilterBank& filter, const RegularizerSpec& reg) {
  switch (reg.kind) {
    case RegularizerKind::frobenius:
      return squared_norm(filter.coeffs);
    case RegularizerKind::weighted_frobenius:
      return weighted_frobenius_reg(filter, reg.weights).value;
    case RegularizerKind::mixed_norm:
      return mixed_norm(filter);
  }
  return 0.0;
}

ObjectiveValue objective_J(const FilterBank& filter, const SignalMatrix& x, std::span<const double> y,
                           const LearnerConfig& cfg, std::span<const double> warm_alphas) {
  check_inputs(x, y, cfg);
  const SignalMatrix filtered = apply_filter(x, filter);
  ObjectiveValue out;
  out.svm = train_svm(filtered, y, cfg.C, cfg.kernel, cfg.svm, warm_alphas);
  out.data_term = out.svm.objective;
  out.penalty = cfg.reg.lambda * regularizer_value(filter, cfg.reg);
  out.value = out.data_term + out.penalty;
  return out;
}

Matrix gradient_J(const FilterBank& filter, const SignalMatrix& x, std::span<const double> y,
                  std::span<const double> alphas, const LearnerConfig& cfg) {
  check_inputs(x, y, cfg);
  if (alphas.size() != x.rows()) {
    throw std::invalid_argument("gradient_J: " + std::to_string(alphas.size()) + " multipliers for " +
                                std::to_string(x.rows()) + " samples");
  }
  if (cfg.reg.kind == RegularizerKind::mixed_norm) throw std::invalid_argument("gradient_J: the mixed norm is not differentiable");
  const SignalMatrix filtered = apply_filter(x, filter);
  const double threshold = kSupportThreshold * cfg.C / static_cast<double>(x.rows());
  std::vector<std::size_t> rows;
  std::vector<double> coef;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i] > threshold) {
      rows.push_back(i);
      coef.push_back(alphas[i] * y[i]);
    }
  }
  Matrix grad = kernels::filter_gradient(x, filtered, rows, coef, filter.length(), filter.n0, cfg.kernel.sigma_k);
  if (cfg.reg.lambda != 0.0) axpy(cfg.reg.lambda, regularizer_gradient(filter, cfg.reg), grad);
  return grad;
}

TrainedFilterModel learn_kf_svm(const SignalMatrix& x, std::span<const double> y, const LearnerConfig& cfg,
                                const std::optional<FilterBank>& init) {
  check_inputs(x, y, cfg);
  if (cfg.reg.kind == RegularizerKind::mixed_norm) throw std::invalid_argument("learn_kf_svm needs a differentiable regularizer");
  FilterBank start = init ? *init : make_average_filter(cfg.f, cfg.n0, x.cols());
  if (start.channels() != x.cols()) throw std::invalid_argument("initial filter channel count differs from signal");
  LearnOutcome r = learn_kf(x, {full_task(y)}, cfg, std::move(start));
  TrainedFilterModel out;
  out.filter = std::move(r.filter);
  out.svm = std::move(r.eval.models.front());
  out.svm_converged = r.eval.converged;
  out.history = std::move(r.history);
  return out;
}

TrainedFilterModel learn_skf_svm(const SignalMatrix& x, std::span<const double> y, const LearnerConfig& cfg) {
  check_inputs(x, y, cfg);
  if (cfg.reg.kind != RegularizerKind::mixed_norm) throw std::invalid_argument("learn_skf_svm expects the mixed-norm regularizer");
  LearnOutcome r = learn_skf(x, {full_task(y)}, cfg);
  TrainedFilterModel out;
  out.filter = std::move(r.filter);
  out.svm = std::move(r.eval.models.front());
  out.svm_converged = r.eval.converged;
  out.history = std::move(r.history);
  out.surrogate = std::move(r.surrogate);
  return out;
}

std::vector<double> binary_labels(const LabelSequence& y) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1 && y[i] != 2) throw std::invalid_argument("binary labels must be 1 or 2");
    out[i] = y[i] == 1 ? 1.0 : -1.0;
  }
  return out;
}

MulticlassFilterModel learn_multiclass_filter(const SignalMatrix& x, const LabelSequence& y, const LearnerConfig& cfg) {
  if (y.classes < 2) throw std::invalid_argument("multiclass filter learning needs at least two classes");
  if (y.size() != x.rows()) throw std::invalid_argument("label count differs from sample count");
  validate_signal(x);
  validate(cfg, x.cols());

  std::vector<BinaryTask> tasks;
  if (y.classes == 2) {
    tasks.push_back(full_task(binary_labels(y)));
  } else {
    for (int a = 1; a <= y.classes; ++a) {
      for (int b = a + 1; b <= y.classes; ++b) {
        BinaryTask t;
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (y[i] == a || y[i] == b) {
            t.rows.push_back(i);
            t.y.push_back(y[i] == a ? 1.0 : -1.0);
          }
        }
        const bool pos = std::find(t.y.begin(), t.y.end(), 1.0) != t.y.end();
        const bool neg = std::find(t.y.begin(), t.y.end(), -1.0) != t.y.end();
        // A pair with a missing class carries no margin information.
        if (pos && neg) tasks.push_back(std::move(t));
      }
    }
    if (tasks.empty()) throw std::invalid_argument("no class pair has samples of both classes");
  }

  LearnOutcome r = cfg.reg.kind == RegularizerKind::mixed_norm
                       ? learn_skf(x, std::move(tasks), cfg)
                       : learn_kf(x, std::move(tasks), cfg, make_average_filter(cfg.f, cfg.n0, x.cols()));
  MulticlassFilterModel out;
  out.filter = std::move(r.filter);
  out.history = std::move(r.history);
  out.surrogate = std::move(r.surrogate);
  if (y.classes == 2) {
    out.models.classes = 2;
    SvmModel pair = std::move(r.eval.models.front());
    out.models.one_vs_all = {pair, pair.negated()};
    out.models.pairwise = {std::move(pair)};
  } else {
    out.models = train_multiclass(r.eval.filtered, y.labels, y.classes, cfg.C, cfg.kernel, cfg.svm);
  }
  return out;
}

}  // namespace marginfilter
