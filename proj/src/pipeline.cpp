#include "marginfilter/pipeline.hpp"

#include <stdexcept>
#include <string>

namespace marginfilter {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::svm: return "svm";
    case Method::avg_svm: return "avg-svm";
    case Method::kf_svm: return "kf-svm";
    case Method::skf_svm: return "skf-svm";
  }
  return "?";
}

std::string_view to_string(DecodeMode m) noexcept { return m == DecodeMode::online ? "online" : "viterbi"; }

Method parse_method(std::string_view s) {
  std::string norm(s);
  for (char& ch : norm) {
    if (ch == '_') ch = '-';
  }
  if (norm == "svm") return Method::svm;
  if (norm == "avg-svm") return Method::avg_svm;
  if (norm == "kf-svm") return Method::kf_svm;
  if (norm == "skf-svm") return Method::skf_svm;
  throw std::invalid_argument("unknown method '" + std::string(s) + "' (expected svm, avg-svm, kf-svm or skf-svm)");
}

DecodeMode parse_decode_mode(std::string_view s) {
  if (s == "online") return DecodeMode::online;
  if (s == "viterbi") return DecodeMode::viterbi;
  throw std::invalid_argument("unknown decode mode '" + std::string(s) + "' (expected online or viterbi)");
}

LearnerConfig make_learner_config(Method method, const Hyperparams& hp, const TrainingOptions& options) {
  LearnerConfig cfg;
  cfg.C = hp.C;
  cfg.kernel = {hp.sigma_k};
  cfg.f = method == Method::svm ? 1 : hp.f;
  cfg.n0 = method == Method::svm ? 0 : hp.n0;
  cfg.reg.kind = method == Method::skf_svm ? RegularizerKind::mixed_norm : RegularizerKind::frobenius;
  cfg.reg.lambda = (method == Method::kf_svm || method == Method::skf_svm) ? hp.lambda : 0.0;
  cfg.max_cg_iters = (method == Method::kf_svm || method == Method::skf_svm) ? options.max_cg_iters : 0;
  cfg.tol_rel_J = options.tol_rel_J;
  cfg.tol_dF = options.tol_dF;
  cfg.mm_max_outer = options.mm_max_outer;
  cfg.mm_eps = options.mm_eps;
  cfg.svm = options.svm;
  return cfg;
}

SequenceLabeler train_labeler(Method method, const Hyperparams& hp, const SignalMatrix& x, const LabelSequence& y,
                              const TrainingOptions& options,
                              const std::optional<std::pair<SignalMatrix, LabelSequence>>& calibration) {
  validate_signal(x);
  if (y.size() != x.rows()) throw std::invalid_argument("label count differs from sample count");
  if (y.classes < 2) throw std::invalid_argument("training needs at least two classes");
  const LearnerConfig cfg = make_learner_config(method, hp, options);
  validate(cfg, x.cols());

  SequenceLabeler out;
  out.method = method;
  out.hp = hp;
  out.scaled_likelihood = options.scaled_likelihood;
  if (method == Method::kf_svm || method == Method::skf_svm) {
    MulticlassFilterModel m = learn_multiclass_filter(x, y, cfg);
    out.filter = std::move(m.filter);
    out.models = std::move(m.models);
    out.history = std::move(m.history);
    out.surrogate = std::move(m.surrogate);
  } else {
    out.filter = make_average_filter(cfg.f, cfg.n0, x.cols());
    const SignalMatrix filtered = apply_filter(x, out.filter);
    out.models = train_multiclass(filtered, y.labels, y.classes, cfg.C, cfg.kernel, cfg.svm);
  }
  out.transitions = estimate_transitions(y, y.classes);
  if (calibration) {
    calibrate_labeler(out, calibration->first, calibration->second);
  } else {
    calibrate_labeler(out, x, y);
  }
  return out;
}

void calibrate_labeler(SequenceLabeler& labeler, const SignalMatrix& x, const LabelSequence& y) {
  if (y.size() != x.rows()) throw std::invalid_argument("calibration label count differs from sample count");
  labeler.platt = calibrate(labeler.models, apply_filter(x, labeler.filter), y.labels);
}

LabelSequence predict(const SequenceLabeler& labeler, const SignalMatrix& x, DecodeMode mode) {
  const SignalMatrix filtered = apply_filter(x, labeler.filter);
  if (mode == DecodeMode::online) return decode_online(labeler.models, filtered);
  return decode_offline(labeler.models, labeler.platt, labeler.transitions, filtered,
                        {.scaled_likelihood = labeler.scaled_likelihood});
}

Matrix predict_probabilities(const SequenceLabeler& labeler, const SignalMatrix& x) {
  return class_probability_matrix(labeler.models, labeler.platt, apply_filter(x, labeler.filter));
}

}  // namespace marginfilter
