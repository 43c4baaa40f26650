#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "marginfilter/matrix.hpp"

namespace marginfilter {

// n x d signal: one row per sample, one column per channel.
using SignalMatrix = Matrix;

// Throws std::invalid_argument unless n >= 1, d >= 1 and every entry is finite.
void validate_signal(const SignalMatrix& x);

// Per-sample class labels in 1..classes.
struct LabelSequence {
  std::vector<int> labels;
  int classes = 0;

  LabelSequence() = default;
  LabelSequence(std::vector<int> values, int class_count);
  // Infers the class count as the largest label.
  static LabelSequence from_values(std::vector<int> values);

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  int operator[](std::size_t i) const noexcept { return labels[i]; }
  bool operator==(const LabelSequence&) const = default;
};

// f x d FIR coefficients (column v filters channel v) with delay n0.
struct FilterBank {
  Matrix coeffs;
  int n0 = 0;

  FilterBank() = default;
  FilterBank(Matrix coefficients, int delay);

  [[nodiscard]] std::size_t length() const noexcept { return coeffs.rows(); }
  [[nodiscard]] std::size_t channels() const noexcept { return coeffs.cols(); }
  // Euclidean norm of column v.
  [[nodiscard]] double column_norm(std::size_t v) const;
  bool operator==(const FilterBank&) const = default;
};

// Filtered signal: out(i, v) = sum_u F(u, v) x(i - u + n0, v), zero-padded.
SignalMatrix apply_filter(const SignalMatrix& x, const FilterBank& filter);

FilterBank make_average_filter(std::size_t f, int n0, std::size_t channels);

// Single-tap unit filter; apply_filter with it is the identity.
FilterBank make_identity_filter(std::size_t channels);

// Block-averaging decimation. Block label is the majority label, ties going to
// the label of the block's first sample.
std::pair<SignalMatrix, LabelSequence> decimate(const SignalMatrix& x, const LabelSequence& y,
                                                std::size_t factor);
SignalMatrix decimate(const SignalMatrix& x, std::size_t factor);

struct ToyParams {
  double sigma_n = 1.0;
  int lag = 0;
  std::size_t nbtot = 2;
  std::size_t n = 1000;
  int run_min = 30;
  int run_max = 40;
  std::uint64_t seed = 0;
  // Channel lags are drawn from their own stream so that several signals
  // (train / validation / test) can share one set of channel delays.
  std::optional<std::uint64_t> lag_seed;
  // When set, two extra modes (2,2) and (-2,-2) form a third class.
  bool three_class = false;
};

void validate(const ToyParams& p);

struct ToySignal {
  SignalMatrix x;
  LabelSequence y;
  std::vector<int> lags;       // per channel, applied as x'(i) = x(i - lag)
  std::vector<int> run_lengths;  // before shifting; the final run may be truncated
};

std::vector<int> draw_channel_lags(const ToyParams& p);
ToySignal generate_toy(const ToyParams& p);

}  // namespace marginfilter
