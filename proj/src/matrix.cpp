#include "marginfilter/matrix.hpp"

namespace marginfilter {

Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= m.rows()) throw std::out_of_range("select_rows: row index out of range");
    const auto src = m.row(indices[k]);
    auto dst = out.row(k);
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c];
  }
  return out;
}

double squared_norm(const Matrix& m) noexcept {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

double dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("dot: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

void axpy(double scale, const Matrix& b, Matrix& a) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("axpy: shape mismatch");
  }
  for (std::size_t i = 0; i < a.size(); ++i) a.values()[i] += scale * b.values()[i];
}

}  // namespace marginfilter
