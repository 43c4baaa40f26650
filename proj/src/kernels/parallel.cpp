#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "marginfilter/kernels.hpp"

namespace marginfilter::kernels {

namespace {

using index_t = std::ptrdiff_t;

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

void require_cols(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.cols()) throw std::invalid_argument(std::string(what) + ": channel count mismatch");
}

}  // namespace

Matrix convolve_channels(const Matrix& x, const Matrix& coeffs, int n0) {
  require_cols(x, coeffs, "convolve_channels");
  const auto n = static_cast<index_t>(x.rows());
  const auto d = static_cast<index_t>(x.cols());
  const auto f = static_cast<index_t>(coeffs.rows());
  Matrix out(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < n; ++i) {
    double* dst = out.data() + i * d;
    for (index_t u = 0; u < f; ++u) {
      const index_t src = i - u + n0;
      if (src < 0 || src >= n) continue;
      const double* xs = x.data() + src * d;
      const double* fu = coeffs.data() + u * d;
      for (index_t v = 0; v < d; ++v) dst[v] += fu[v] * xs[v];
    }
  }
  return out;
}

Matrix gaussian_gram(const Matrix& a, const Matrix& b, double sigma) {
  require_cols(a, b, "gaussian_gram");
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  const auto m = static_cast<index_t>(a.rows());
  const auto p = b.rows();
  Matrix out(a.rows(), p);
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < m; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    auto dst = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < p; ++j) dst[j] = std::exp(-gamma * squared_distance(ai, b.row(j)));
  }
  return out;
}

Matrix gaussian_gram(const Matrix& a, double sigma) {
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  const auto m = static_cast<index_t>(a.rows());
  Matrix out(a.rows(), a.rows());
#pragma omp parallel for schedule(dynamic, 16)
  for (index_t i = 0; i < m; ++i) {
    const auto ai = a.row(static_cast<std::size_t>(i));
    out(i, i) = 1.0;
    for (index_t j = i + 1; j < m; ++j) {
      out(i, j) = std::exp(-gamma * squared_distance(ai, a.row(static_cast<std::size_t>(j))));
    }
  }
  for (index_t i = 0; i < m; ++i) {
    for (index_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  }
  return out;
}

std::vector<double> kernel_expansion(const Matrix& queries, const Matrix& centers,
                                     std::span<const double> coef, double sigma, double bias) {
  if (centers.rows() != coef.size()) throw std::invalid_argument("kernel_expansion: coefficient count mismatch");
  if (!centers.empty()) require_cols(queries, centers, "kernel_expansion");
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  const auto m = static_cast<index_t>(queries.rows());
  std::vector<double> out(queries.rows(), bias);
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < m; ++i) {
    const auto q = queries.row(static_cast<std::size_t>(i));
    double s = 0.0;
    for (std::size_t j = 0; j < centers.rows(); ++j) {
      s += coef[j] * std::exp(-gamma * squared_distance(q, centers.row(j)));
    }
    out[static_cast<std::size_t>(i)] += s;
  }
  return out;
}

Matrix filter_gradient(const Matrix& x, const Matrix& filtered,
                       std::span<const std::size_t> rows, std::span<const double> coef,
                       std::size_t f, int n0, double sigma) {
  require_cols(x, filtered, "filter_gradient");
  if (rows.size() != coef.size()) throw std::invalid_argument("filter_gradient: coefficient count mismatch");
  const auto ns = static_cast<index_t>(rows.size());
  const auto d = static_cast<index_t>(x.cols());
  const auto n = static_cast<index_t>(x.rows());
  Matrix grad(f, x.cols());
  if (ns == 0) return grad;

  // The pairwise sum factors as sum_i x(i-u+n0, v) * t(i, v) with
  //   t(i, v) = a_iv r_i - (W a)_iv,  W_ij = c_i c_j K_ij,  r = W 1,
  // which costs O(ns^2 d + ns f d) instead of O(ns^2 f d).
  const Matrix sv = select_rows(filtered, rows);
  const Matrix gram = gaussian_gram(sv, sigma);
  Matrix weights(rows.size(), rows.size());
  std::vector<double> row_sum(rows.size(), 0.0);
  Matrix t(rows.size(), x.cols());
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < ns; ++i) {
    double* wi = weights.data() + i * ns;
    const double* ki = gram.data() + i * ns;
    double r = 0.0;
    for (index_t j = 0; j < ns; ++j) {
      wi[j] = coef[i] * coef[j] * ki[j];
      r += wi[j];
    }
    row_sum[i] = r;
  }
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < ns; ++i) {
    const double* wi = weights.data() + i * ns;
    double* ti = t.data() + i * d;
    for (index_t j = 0; j < ns; ++j) {
      const double* aj = sv.data() + j * d;
      for (index_t v = 0; v < d; ++v) ti[v] -= wi[j] * aj[v];
    }
    const double* ai = sv.data() + i * d;
    for (index_t v = 0; v < d; ++v) ti[v] += ai[v] * row_sum[i];
  }

  const double scale = 1.0 / (sigma * sigma);
  const auto taps = static_cast<index_t>(f);
#pragma omp parallel for schedule(static)
  for (index_t u = 0; u < taps; ++u) {
    double* gu = grad.data() + u * d;
    for (index_t i = 0; i < ns; ++i) {
      const index_t src = static_cast<index_t>(rows[i]) - u + n0;
      if (src < 0 || src >= n) continue;
      const double* xs = x.data() + src * d;
      const double* ti = t.data() + i * d;
      for (index_t v = 0; v < d; ++v) gu[v] += xs[v] * ti[v];
    }
    for (index_t v = 0; v < d; ++v) gu[v] *= scale;
  }
  return grad;
}

void configure_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("MARGIN_FILTER_THREADS")) {
    char* end = nullptr;
    const long threads = std::strtol(env, &end, 10);
    if (end != env && threads > 0) omp_set_num_threads(static_cast<int>(threads));
  }
#endif
}

}  // namespace marginfilter::kernels
