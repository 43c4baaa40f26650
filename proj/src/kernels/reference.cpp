#include <cmath>
#include <stdexcept>

#include "marginfilter/kernels.hpp"

namespace marginfilter::kernels::reference {

namespace {

double sample(const Matrix& x, std::ptrdiff_t i, std::size_t v) {
  if (i < 0 || i >= static_cast<std::ptrdiff_t>(x.rows())) return 0.0;
  return x(static_cast<std::size_t>(i), v);
}

double rbf(std::span<const double> a, std::span<const double> b, double sigma) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-s / (2.0 * sigma * sigma));
}

}  // namespace

Matrix convolve_channels(const Matrix& x, const Matrix& coeffs, int n0) {
  if (x.cols() != coeffs.cols()) throw std::invalid_argument("convolve_channels: channel count mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t v = 0; v < x.cols(); ++v) {
      double s = 0.0;
      for (std::size_t u = 0; u < coeffs.rows(); ++u) {
        const auto src = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(u) + n0;
        s += coeffs(u, v) * sample(x, src, v);
      }
      out(i, v) = s;
    }
  }
  return out;
}

Matrix gaussian_gram(const Matrix& a, const Matrix& b, double sigma) {
  if (a.cols() != b.cols()) throw std::invalid_argument("gaussian_gram: channel count mismatch");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = rbf(a.row(i), b.row(j), sigma);
  }
  return out;
}

std::vector<double> kernel_expansion(const Matrix& queries, const Matrix& centers,
                                     std::span<const double> coef, double sigma, double bias) {
  if (centers.rows() != coef.size()) throw std::invalid_argument("kernel_expansion: coefficient count mismatch");
  std::vector<double> out(queries.rows(), bias);
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    for (std::size_t j = 0; j < centers.rows(); ++j) {
      out[i] += coef[j] * rbf(queries.row(i), centers.row(j), sigma);
    }
  }
  return out;
}

Matrix filter_gradient(const Matrix& x, const Matrix& filtered,
                       std::span<const std::size_t> rows, std::span<const double> coef,
                       std::size_t f, int n0, double sigma) {
  if (rows.size() != coef.size()) throw std::invalid_argument("filter_gradient: coefficient count mismatch");
  Matrix grad(f, x.cols());
  const double scale = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t p = 0; p < rows.size(); ++p) {
    for (std::size_t q = 0; q < rows.size(); ++q) {
      const std::size_t i = rows[p];
      const std::size_t j = rows[q];
      const double k = rbf(filtered.row(i), filtered.row(j), sigma);
      const double w = coef[p] * coef[q] * k;
      for (std::size_t u = 0; u < f; ++u) {
        const auto si = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(u) + n0;
        const auto sj = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(u) + n0;
        for (std::size_t v = 0; v < x.cols(); ++v) {
          grad(u, v) += scale * w * (filtered(i, v) - filtered(j, v)) *
                        (sample(x, si, v) - sample(x, sj, v));
        }
      }
    }
  }
  return grad;
}

}  // namespace marginfilter::kernels::reference
