#pragma once

// Numeric hot loops. Every kernel exists twice: an OpenMP-parallel version in
// `marginfilter::kernels` used by the library, and a plainly written serial
// version in `marginfilter::kernels::reference` kept as the test oracle and
// the benchmark baseline. Both must agree to rounding.

#include <cstddef>
#include <span>
#include <vector>

#include "marginfilter/matrix.hpp"

namespace marginfilter::kernels {

// out(i, v) = sum_u coeffs(u, v) * x(i - u + n0, v), reading x as zero outside
// its rows. `coeffs` is f x d, `x` is n x d.
Matrix convolve_channels(const Matrix& x, const Matrix& coeffs, int n0);

// K(i, j) = exp(-|a_i - b_j|^2 / (2 sigma^2)).
Matrix gaussian_gram(const Matrix& a, const Matrix& b, double sigma);

// Symmetric Gram matrix of the rows of `a`; diagonal exactly 1.
Matrix gaussian_gram(const Matrix& a, double sigma);

// out(i) = bias + sum_j coef(j) * exp(-|q_i - c_j|^2 / (2 sigma^2)).
std::vector<double> kernel_expansion(const Matrix& queries, const Matrix& centers,
                                     std::span<const double> coef, double sigma, double bias);

// Gradient with respect to the filter of the dual value
//   sum_i alpha_i - 1/2 sum_ij c_i c_j K(x~_i, x~_j),   c = alpha .* y,
// holding alpha fixed. `rows` are the sample indices (into `x` and
// `filtered`) of the support vectors and `coef` their c values. Returns f x d.
//
//   dJ/dF(u, v) = 1/(2 sigma^2) sum_ij c_i c_j K_ij (x~_iv - x~_jv)
//                                 (x(i - u + n0, v) - x(j - u + n0, v))
Matrix filter_gradient(const Matrix& x, const Matrix& filtered,
                       std::span<const std::size_t> rows, std::span<const double> coef,
                       std::size_t f, int n0, double sigma);

namespace reference {

Matrix convolve_channels(const Matrix& x, const Matrix& coeffs, int n0);
Matrix gaussian_gram(const Matrix& a, const Matrix& b, double sigma);
std::vector<double> kernel_expansion(const Matrix& queries, const Matrix& centers,
                                     std::span<const double> coef, double sigma, double bias);
// Direct pairwise sum, O(ns^2 f d).
Matrix filter_gradient(const Matrix& x, const Matrix& filtered,
                       std::span<const std::size_t> rows, std::span<const double> coef,
                       std::size_t f, int n0, double sigma);

}  // namespace reference

// Caps the OpenMP team size from MARGIN_FILTER_THREADS when set.
void configure_threads_from_env();

}  // namespace marginfilter::kernels
