#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "../support/convert.hpp"
#include "../support/oracles.hpp"
#include "marginfilter/signal.hpp"

using namespace marginfilter;

TEST_CASE("delta filter leaves the signal unchanged") {
  std::mt19937_64 rng(3);
  const Matrix x = testing_util::random_matrix(20, 3, rng);
  CHECK(apply_filter(x, make_identity_filter(3)) == x);
  CHECK(apply_filter(x, make_average_filter(1, 0, 3)) == x);
}

TEST_CASE("zero filter annihilates") {
  std::mt19937_64 rng(4);
  const Matrix x = testing_util::random_matrix(10, 2, rng);
  const FilterBank zero(Matrix(5, 2, 0.0), 2);
  const Matrix out = apply_filter(x, zero);
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("hand convolutions") {
  const Matrix x(3, 1, std::vector<double>{1, 2, 3});
  const FilterBank two_tap(Matrix(2, 1, std::vector<double>{0.5, 0.5}), 0);
  const Matrix out = apply_filter(x, two_tap);
  CHECK(out.values() == std::vector<double>{0.5, 1.5, 2.5});

  const Matrix x2(2, 1, std::vector<double>{1, 3});
  CHECK(apply_filter(x2, make_average_filter(2, 0, 1)).values() == std::vector<double>{0.5, 2.0});
}

TEST_CASE("convolution agrees with a direct loop for every delay") {
  std::mt19937_64 rng(5);
  const Matrix x = testing_util::random_matrix(30, 3, rng);
  for (int n0 = 0; n0 < 5; ++n0) {
    const Matrix F = testing_util::random_matrix(5, 3, rng);
    const Matrix got = apply_filter(x, FilterBank(F, n0));
    const Eigen::MatrixXd want = oracle::filter(testing_util::to_eigen(x), testing_util::to_eigen(F), n0);
    CHECK((testing_util::to_eigen(got) - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("filter validation") {
  CHECK_THROWS_AS(FilterBank(Matrix(3, 1, 1.0), 3), std::invalid_argument);
  CHECK_THROWS_AS(FilterBank(Matrix(3, 1, 1.0), -1), std::invalid_argument);
  CHECK_THROWS_AS(FilterBank(Matrix(3, 1, std::nan("")), 0), std::invalid_argument);
  CHECK_THROWS_AS(apply_filter(Matrix(4, 2, 1.0), make_average_filter(2, 0, 3)), std::invalid_argument);
}

TEST_CASE("average filter coefficients") {
  const FilterBank f = make_average_filter(4, 1, 2);
  for (double v : f.coeffs.values()) CHECK(v == 0.25);
  CHECK(f.n0 == 1);
}

TEST_CASE("decimation") {
  const Matrix x(6, 1, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(decimate(x, 2).values() == std::vector<double>{1.5, 3.5, 5.5});
  CHECK(decimate(x, 1) == x);

  const Matrix x4(4, 1, std::vector<double>{1, 2, 3, 4});
  const auto [xd, yd] = decimate(x4, LabelSequence({1, 1, 2, 2}, 2), 2);
  CHECK(yd.labels == std::vector<int>{1, 2});
  CHECK(xd.values() == std::vector<double>{1.5, 3.5});

  const auto [x1, y1] = decimate(x4, LabelSequence({1, 2, 2, 1}, 2), 1);
  CHECK(x1 == x4);
  CHECK(y1.labels == std::vector<int>{1, 2, 2, 1});
}

TEST_CASE("label validation") {
  CHECK_THROWS(LabelSequence({1, 3}, 2));
  CHECK_THROWS(LabelSequence({0, 1}, 2));
  CHECK(LabelSequence::from_values({1, 3, 2}).classes == 3);
}

TEST_CASE("noiseless toy samples sit on their modes") {
  ToyParams p;
  p.sigma_n = 0.0;
  p.lag = 0;
  p.nbtot = 4;
  p.n = 2000;
  const ToySignal s = generate_toy(p);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double a = s.x(i, 0), b = s.x(i, 1);
    CHECK(std::abs(a) == 1.0);
    CHECK(std::abs(b) == 1.0);
    if (s.y[i] == 1) CHECK(a == b);
    else CHECK(a == -b);
    CHECK(s.x(i, 2) == 0.0);
    CHECK(s.x(i, 3) == 0.0);
  }
}

TEST_CASE("toy generation is deterministic") {
  ToyParams p;
  p.sigma_n = 1.0;
  p.lag = 5;
  p.seed = 17;
  const ToySignal a = generate_toy(p), b = generate_toy(p);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.lags == b.lags);
  p.seed = 18;
  CHECK_FALSE(generate_toy(p).x == a.x);
}

TEST_CASE("toy run lengths and lags respect their bounds") {
  ToyParams p;
  p.lag = 5;
  p.nbtot = 6;
  p.n = 3000;
  const ToySignal s = generate_toy(p);
  REQUIRE(s.lags.size() == 6);
  for (int l : s.lags) {
    CHECK(l >= -p.lag);
    CHECK(l <= p.lag);
  }
  for (std::size_t k = 0; k + 1 < s.run_lengths.size(); ++k) {
    CHECK(s.run_lengths[k] >= p.run_min);
    CHECK(s.run_lengths[k] <= p.run_max);
  }
}

TEST_CASE("toy parameter validation") {
  ToyParams p;
  p.nbtot = 1;
  CHECK_THROWS_AS(generate_toy(p), std::invalid_argument);
  p = {};
  p.sigma_n = -1.0;
  CHECK_THROWS_AS(generate_toy(p), std::invalid_argument);
  p = {};
  p.run_min = 5;
  p.run_max = 4;
  CHECK_THROWS_AS(generate_toy(p), std::invalid_argument);
}

TEST_CASE("noisy toy mode means converge") {
  ToyParams p;
  p.sigma_n = 0.5;
  p.lag = 0;
  p.n = 10000;
  p.seed = 2;
  const ToySignal s = generate_toy(p);
  // Runs share one mode; identify it from the run mean of channel 1.
  struct Acc {
    double s1 = 0, s2 = 0;
    int m = 0;
  };
  std::map<std::pair<int, int>, Acc> acc;
  std::size_t start = 0;
  for (int len : s.run_lengths) {
    double m1 = 0;
    for (std::size_t i = start; i < start + len; ++i) m1 += s.x(i, 0);
    const int mode = m1 > 0 ? 1 : -1;
    Acc& a = acc[{s.y[start], mode}];
    for (std::size_t i = start; i < start + len; ++i) {
      a.s1 += s.x(i, 0);
      a.s2 += s.x(i, 1);
      ++a.m;
    }
    start += len;
  }
  CHECK(acc.size() == 4);
  for (const auto& [key, a] : acc) {
    const auto [cls, mode] = key;
    const double want1 = mode, want2 = cls == 1 ? mode : -mode;
    const double bound = 3.0 * p.sigma_n / std::sqrt(static_cast<double>(a.m));
    CHECK(std::abs(a.s1 / a.m - want1) < bound);
    CHECK(std::abs(a.s2 / a.m - want2) < bound);
  }
}

TEST_CASE("splits with a shared lag seed share channel lags") {
  ToyParams a, b;
  a.lag = b.lag = 5;
  a.seed = 1;
  b.seed = 2;
  a.lag_seed = b.lag_seed = 9;
  CHECK(generate_toy(a).lags == generate_toy(b).lags);
}

TEST_CASE("three-class toy uses the outer modes for class 3") {
  ToyParams p;
  p.sigma_n = 0.0;
  p.three_class = true;
  p.n = 3000;
  const ToySignal s = generate_toy(p);
  CHECK(s.y.classes == 3);
  bool seen = false;
  for (std::size_t i = 0; i < p.n; ++i) {
    if (s.y[i] != 3) continue;
    seen = true;
    CHECK(std::abs(s.x(i, 0)) == 2.0);
    CHECK(s.x(i, 0) == s.x(i, 1));
  }
  CHECK(seen);
}
