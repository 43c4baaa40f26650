#include "marginfilter/signal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "marginfilter/kernels.hpp"

namespace marginfilter {

void validate_signal(const SignalMatrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("signal must have at least one sample and one channel");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t v = 0; v < x.cols(); ++v) {
      if (!std::isfinite(x(i, v))) {
        throw std::invalid_argument("signal entry (" + std::to_string(i) + ", " + std::to_string(v) +
                                    ") is not finite");
      }
    }
  }
}

LabelSequence::LabelSequence(std::vector<int> values, int class_count)
    : labels(std::move(values)), classes(class_count) {
  if (classes < 1) throw std::invalid_argument("label sequence needs at least one class");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > classes) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                                  " outside 1.." + std::to_string(classes));
    }
  }
}

LabelSequence LabelSequence::from_values(std::vector<int> values) {
  if (values.empty()) throw std::invalid_argument("empty label sequence");
  const int c = *std::max_element(values.begin(), values.end());
  return {std::move(values), c};
}

FilterBank::FilterBank(Matrix coefficients, int delay) : coeffs(std::move(coefficients)), n0(delay) {
  if (coeffs.rows() == 0 || coeffs.cols() == 0) throw std::invalid_argument("filter must have f >= 1 and d >= 1");
  if (n0 < 0 || n0 >= static_cast<int>(coeffs.rows())) {
    throw std::invalid_argument("filter delay n0 must lie in [0, f-1]");
  }
  for (double c : coeffs.values()) {
    if (!std::isfinite(c)) throw std::invalid_argument("filter coefficient is not finite");
  }
}

double FilterBank::column_norm(std::size_t v) const {
  double s = 0.0;
  for (std::size_t u = 0; u < coeffs.rows(); ++u) s += coeffs(u, v) * coeffs(u, v);
  return std::sqrt(s);
}

SignalMatrix apply_filter(const SignalMatrix& x, const FilterBank& filter) {
  if (x.cols() != filter.channels()) {
    throw std::invalid_argument("apply_filter: signal has " + std::to_string(x.cols()) + " channels, filter has " +
                                std::to_string(filter.channels()));
  }
  return kernels::convolve_channels(x, filter.coeffs, filter.n0);
}

FilterBank make_average_filter(std::size_t f, int n0, std::size_t channels) {
  if (f == 0 || channels == 0) throw std::invalid_argument("average filter needs f >= 1 and d >= 1");
  return {Matrix(f, channels, 1.0 / static_cast<double>(f)), n0};
}

FilterBank make_identity_filter(std::size_t channels) { return make_average_filter(1, 0, channels); }

SignalMatrix decimate(const SignalMatrix& x, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("decimation factor must be >= 1");
  const std::size_t blocks = (x.rows() + factor - 1) / factor;
  SignalMatrix out(blocks, x.cols());
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t begin = b * factor;
    const std::size_t end = std::min(begin + factor, x.rows());
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t v = 0; v < x.cols(); ++v) out(b, v) += x(i, v);
    }
    for (std::size_t v = 0; v < x.cols(); ++v) out(b, v) /= static_cast<double>(end - begin);
  }
  return out;
}

std::pair<SignalMatrix, LabelSequence> decimate(const SignalMatrix& x, const LabelSequence& y, std::size_t factor) {
  if (y.size() != x.rows()) throw std::invalid_argument("decimate: label count differs from sample count");
  SignalMatrix out = decimate(x, factor);
  std::vector<int> labels(out.rows());
  std::vector<std::size_t> votes(static_cast<std::size_t>(y.classes) + 1);
  for (std::size_t b = 0; b < out.rows(); ++b) {
    std::fill(votes.begin(), votes.end(), 0);
    const std::size_t begin = b * factor;
    const std::size_t end = std::min(begin + factor, x.rows());
    for (std::size_t i = begin; i < end; ++i) ++votes[static_cast<std::size_t>(y[i])];
    int best = y[begin];
    for (int k = 1; k <= y.classes; ++k) {
      if (votes[static_cast<std::size_t>(k)] > votes[static_cast<std::size_t>(best)]) best = k;
    }
    labels[b] = best;
  }
  return {std::move(out), LabelSequence(std::move(labels), y.classes)};
}

void validate(const ToyParams& p) {
  if (!(p.sigma_n >= 0.0) || !std::isfinite(p.sigma_n)) throw std::invalid_argument("toy: sigma_n must be >= 0");
  if (p.lag < 0) throw std::invalid_argument("toy: lag must be >= 0");
  if (p.nbtot < 2) throw std::invalid_argument("toy: nbtot must be >= 2");
  if (p.n == 0) throw std::invalid_argument("toy: n must be >= 1");
  if (p.run_min < 1 || p.run_min > p.run_max) throw std::invalid_argument("toy: need 1 <= run_min <= run_max");
}

std::vector<int> draw_channel_lags(const ToyParams& p) {
  std::mt19937_64 rng(p.lag_seed.value_or(p.seed) ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> dist(-p.lag, p.lag);
  std::vector<int> lags(p.nbtot);
  for (auto& l : lags) l = dist(rng);
  return lags;
}

ToySignal generate_toy(const ToyParams& p) {
  validate(p);
  static constexpr double kModes[3][2][2] = {
      {{-1.0, -1.0}, {1.0, 1.0}},
      {{-1.0, 1.0}, {1.0, -1.0}},
      {{2.0, 2.0}, {-2.0, -2.0}},
  };
  const int classes = p.three_class ? 3 : 2;

  std::mt19937_64 rng(p.seed);
  std::uniform_int_distribution<int> run_length(p.run_min, p.run_max);
  std::uniform_int_distribution<int> pick_class(1, classes);
  std::uniform_int_distribution<int> pick_mode(0, 1);

  ToySignal out;
  std::vector<int> labels(p.n);
  std::vector<int> modes(p.n);
  for (std::size_t i = 0; i < p.n;) {
    const int len = run_length(rng);
    const int cls = pick_class(rng);
    const int mode = pick_mode(rng);
    const std::size_t end = std::min(p.n, i + static_cast<std::size_t>(len));
    out.run_lengths.push_back(static_cast<int>(end - i));
    for (; i < end; ++i) {
      labels[i] = cls;
      modes[i] = mode;
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix clean(p.n, p.nbtot);
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto& mode = kModes[labels[i] - 1][modes[i]];
    for (std::size_t v = 0; v < p.nbtot; ++v) {
      const double base = v < 2 ? mode[v] : 0.0;
      clean(i, v) = base + p.sigma_n * noise(rng);
    }
  }

  out.lags = draw_channel_lags(p);
  out.x = Matrix(p.n, p.nbtot);
  const auto n = static_cast<std::ptrdiff_t>(p.n);
  for (std::size_t v = 0; v < p.nbtot; ++v) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const std::ptrdiff_t src = i - out.lags[v];
      if (src >= 0 && src < n) out.x(static_cast<std::size_t>(i), v) = clean(static_cast<std::size_t>(src), v);
    }
  }
  out.y = LabelSequence(std::move(labels), classes);
  return out;
}

}  // namespace marginfilter
