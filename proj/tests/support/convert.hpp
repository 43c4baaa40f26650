#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "marginfilter/matrix.hpp"

namespace testing_util {

inline Eigen::MatrixXd to_eigen(const marginfilter::Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline marginfilter::Matrix from_eigen(const Eigen::MatrixXd& m) {
  marginfilter::Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline Eigen::VectorXd to_vec(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline marginfilter::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                          double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  marginfilter::Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

// +1 / -1 labels with both classes present.
inline std::vector<double> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution b(0.5);
  std::vector<double> y(n);
  for (auto& v : y) v = b(rng) ? 1.0 : -1.0;
  y[0] = 1.0;
  y[1] = -1.0;
  return y;
}

}  // namespace testing_util
