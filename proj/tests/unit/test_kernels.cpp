#include <doctest.h>

#include <random>

#include "../support/convert.hpp"
#include "../support/oracles.hpp"
#include "marginfilter/kernels.hpp"
#include "marginfilter/svm.hpp"

using namespace marginfilter;
using testing_util::random_matrix;
using testing_util::to_eigen;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
  return m;
}

}  // namespace

TEST_CASE("gram matrix examples") {
  const Matrix a(2, 2, std::vector<double>{0, 0, 1, 1});
  const Matrix K = kernel_matrix(a, {1.0});
  CHECK(K(0, 0) == 1.0);
  CHECK(K(1, 1) == 1.0);
  CHECK(K(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(K(0, 1) == doctest::Approx(0.36788).epsilon(1e-5));

  const Matrix wide = kernel_matrix(a, {1e8});
  for (double v : wide.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(kernel_matrix(a, Matrix(2, 3), {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(kernel_matrix(a, {0.0}), std::invalid_argument);
}

TEST_CASE("gram matrix is symmetric positive semidefinite") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = random_matrix(25, 3, rng);
    const Eigen::MatrixXd K = to_eigen(kernel_matrix(a, {0.5 + trial}));
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("parallel kernels match the serial reference") {
  std::mt19937_64 rng(12);
  const Matrix x = random_matrix(80, 4, rng);
  const Matrix F = random_matrix(7, 4, rng);
  const Matrix xf = kernels::convolve_channels(x, F, 3);
  CHECK(max_abs_diff(xf, kernels::reference::convolve_channels(x, F, 3)) == 0.0);

  const Matrix b = random_matrix(30, 4, rng);
  CHECK(max_abs_diff(kernels::gaussian_gram(xf, b, 1.3), kernels::reference::gaussian_gram(xf, b, 1.3)) < 1e-15);
  CHECK(max_abs_diff(kernels::gaussian_gram(xf, 1.3), kernels::reference::gaussian_gram(xf, xf, 1.3)) < 1e-15);

  std::vector<double> coef(b.rows());
  std::normal_distribution<double> g;
  for (double& c : coef) c = g(rng);
  const auto e1 = kernels::kernel_expansion(xf, b, coef, 0.8, 0.25);
  const auto e2 = kernels::reference::kernel_expansion(xf, b, coef, 0.8, 0.25);
  for (std::size_t i = 0; i < e1.size(); ++i) CHECK(e1[i] == doctest::Approx(e2[i]).epsilon(1e-13));

  std::vector<std::size_t> rows;
  std::vector<double> c;
  for (std::size_t i = 0; i < x.rows(); i += 3) {
    rows.push_back(i);
    c.push_back(g(rng));
  }
  const Matrix g1 = kernels::filter_gradient(x, xf, rows, c, 7, 3, 1.1);
  const Matrix g2 = kernels::reference::filter_gradient(x, xf, rows, c, 7, 3, 1.1);
  double scale = 0.0;
  for (double v : g2.values()) scale = std::max(scale, std::abs(v));
  CHECK(max_abs_diff(g1, g2) < 1e-10 * std::max(1.0, scale));
}

TEST_CASE("thread cap from the environment") {
  setenv("MARGIN_FILTER_THREADS", "1", 1);
  kernels::configure_threads_from_env();
  std::mt19937_64 rng(13);
  const Matrix a = random_matrix(20, 2, rng);
  CHECK(max_abs_diff(kernels::gaussian_gram(a, 1.0), kernels::reference::gaussian_gram(a, a, 1.0)) < 1e-15);
  unsetenv("MARGIN_FILTER_THREADS");
}
