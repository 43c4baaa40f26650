#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Dense = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// x~(i, v) = sum_u F(u, v) x(i - u + n0, v), zero outside the signal.
inline Dense filter(const Dense& x, const Dense& F, int n0) {
  Dense out = Dense::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index v = 0; v < x.cols(); ++v)
      for (Eigen::Index u = 0; u < F.rows(); ++u) {
        const Eigen::Index src = i - u + n0;
        if (src >= 0 && src < x.rows()) out(i, v) += F(u, v) * x(src, v);
      }
  return out;
}

inline Dense gaussian(const Dense& a, const Dense& b, double sigma) {
  Dense K(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      K(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2.0 * sigma * sigma));
  return K;
}

struct QpResult {
  Vec alpha;
  double objective = 0.0;
  bool exact = false;  // terminated with all optimality conditions verified
};

// max 1'a - 1/2 a'Qa, Q = diag(y) K diag(y), 0 <= a <= box, y'a = 0,
// by a primal active-set method: equality-constrained solves on the free
// variables, blocking steps onto bounds, releases on multiplier sign.
inline QpResult svm_dual_qp(const Dense& K, const Vec& y, double box) {
  const Eigen::Index n = K.rows();
  const Dense Q = y.asDiagonal() * K * y.asDiagonal();
  Vec a(n);
  const double pos = static_cast<double>((y.array() > 0).count());
  const double neg = static_cast<double>(n) - pos;
  const double a_pos = pos >= neg ? box * neg / (2.0 * pos) : box / 2.0;
  const double a_neg = pos >= neg ? box / 2.0 : box * pos / (2.0 * neg);
  for (Eigen::Index i = 0; i < n; ++i) a[i] = y[i] > 0 ? a_pos : a_neg;

  // state: 0 free, -1 at lower bound, +1 at upper bound
  std::vector<int> state(n, 0);
  for (int iter = 0; iter < 100 * static_cast<int>(n) + 100; ++iter) {
    std::vector<Eigen::Index> F;
    for (Eigen::Index i = 0; i < n; ++i)
      if (state[i] == 0) F.push_back(i);
    const auto m = static_cast<Eigen::Index>(F.size());
    Vec target = a;
    double b = 0.0;
    if (m > 0) {
      Dense sys = Dense::Zero(m + 1, m + 1);
      Vec rhs(m + 1);
      Vec fixed = a;
      for (Eigen::Index i : F) fixed[i] = 0.0;
      for (Eigen::Index p = 0; p < m; ++p) {
        for (Eigen::Index q = 0; q < m; ++q) sys(p, q) = Q(F[p], F[q]);
        sys(p, m) = y[F[p]];
        sys(m, p) = y[F[p]];
        rhs[p] = 1.0 - Q.row(F[p]).dot(fixed);
      }
      rhs[m] = -y.dot(fixed);
      const Vec sol = sys.fullPivLu().solve(rhs);
      for (Eigen::Index p = 0; p < m; ++p) target[F[p]] = sol[p];
      b = sol[m];
    } else {
      // No free variable: b ranges over an interval; take the midpoint of
      // the values compatible with the bound multipliers.
      const Vec g0 = Vec::Ones(n) - Q * a;
      double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
      for (Eigen::Index i = 0; i < n; ++i) {
        // need g0_i - b y_i <= 0 at lower, >= 0 at upper
        const double r = g0[i] / y[i];
        const bool lower = state[i] < 0;
        if ((lower && y[i] > 0) || (!lower && y[i] < 0)) lo = std::max(lo, r);
        else hi = std::min(hi, r);
      }
      b = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (std::isfinite(lo) ? lo : hi);
    }
    const Vec dir = target - a;
    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i : F) {
      if (dir[i] < -1e-15 && a[i] + dir[i] < 0.0) {
        const double s = -a[i] / dir[i];
        if (s < step) step = s, blocking = i;
      } else if (dir[i] > 1e-15 && a[i] + dir[i] > box) {
        const double s = (box - a[i]) / dir[i];
        if (s < step) step = s, blocking = i;
      }
    }
    a += step * dir;
    if (blocking >= 0) {
      state[blocking] = a[blocking] < 0.5 * box ? -1 : 1;
      a[blocking] = state[blocking] < 0 ? 0.0 : box;
      continue;
    }
    const Vec grad = Vec::Ones(n) - Q * a - b * y;
    Eigen::Index release = -1;
    double worst = 1e-12;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = state[i] < 0 ? grad[i] : state[i] > 0 ? -grad[i] : 0.0;
      if (v > worst) worst = v, release = i;
    }
    if (release < 0) return {a, a.sum() - 0.5 * a.dot(Q * a), std::abs(y.dot(a)) < 1e-10};
    state[release] = 0;
  }
  return {a, a.sum() - 0.5 * a.dot(Q * a), false};
}

// Best path by enumerating all c^n label sequences. Ties go to the
// lexicographically smallest path.
inline std::vector<int> brute_force_viterbi(const Dense& logem, const Dense& logM, const Vec& logprior) {
  const int n = static_cast<int>(logem.rows());
  const int c = static_cast<int>(logem.cols());
  std::vector<int> path(n, 0), best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= c;
  for (std::int64_t code = 0; code < total; ++code) {
    std::int64_t rest = code;
    for (int i = n - 1; i >= 0; --i) {
      path[i] = static_cast<int>(rest % c);
      rest /= c;
    }
    double s = logprior[path[0]] + logem(0, path[0]);
    for (int i = 1; i < n; ++i) s += logM(path[i - 1], path[i]) + logem(i, path[i]);
    if (s > best_score + 1e-12) {
      best_score = s;
      best = path;
    }
  }
  for (int& s : best) ++s;
  return best;
}

// Regularized-target negative log-likelihood of a Platt sigmoid.
inline double platt_nll(const std::vector<double>& f, const std::vector<double>& y, double A, double B) {
  double np = 0, nn = 0;
  for (double v : y) (v > 0 ? np : nn) += 1;
  const double hi = (np + 1.0) / (np + 2.0), lo = 1.0 / (nn + 2.0);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = y[i] > 0 ? hi : lo;
    const double z = A * f[i] + B;
    // -[t log p + (1-t) log(1-p)], p = 1/(1+e^z)
    const double log1pexp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += t * log1pexp + (1.0 - t) * (log1pexp - z);
  }
  return s;
}

// Minimizer of platt_nll by successively refined grid search.
inline std::pair<double, double> platt_grid(const std::vector<double>& f, const std::vector<double>& y) {
  double cA = 0.0, cB = 0.0, span = 20.0;
  for (int level = 0; level < 40; ++level) {
    double bestA = cA, bestB = cB, best = platt_nll(f, y, cA, cB);
    for (int i = -10; i <= 10; ++i)
      for (int j = -10; j <= 10; ++j) {
        const double A = cA + span * i / 10.0, B = cB + span * j / 10.0;
        const double v = platt_nll(f, y, A, B);
        if (v < best) {
          best = v;
          bestA = A;
          bestB = B;
        }
      }
    cA = bestA;
    cB = bestB;
    span *= 0.3;
  }
  return {cA, cB};
}

// Fixed-multiplier dual value  sum a - 1/2 sum_ij c_i c_j K(x~_i, x~_j)
// as a function of the filter, for finite differencing.
inline double fixed_alpha_dual(const Dense& x, const Dense& F, int n0, const Vec& alpha, const Vec& y, double sigma) {
  const Dense xf = filter(x, F, n0);
  const Dense K = gaussian(xf, xf, sigma);
  const Vec c = alpha.cwiseProduct(y);
  return alpha.sum() - 0.5 * c.dot(K * c);
}

// Exact two-sided signed-rank p-value by enumerating all 2^m sign patterns.
inline double wilcoxon_enumerate(std::vector<double> d) {
  d.erase(std::remove(d.begin(), d.end(), 0.0), d.end());
  const std::size_t m = d.size();
  std::vector<std::size_t> order(m);
  for (std::size_t k = 0; k < m; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(m);
  for (std::size_t k = 0; k < m;) {
    std::size_t e = k;
    while (e + 1 < m && std::abs(d[order[e + 1]]) == std::abs(d[order[k]])) ++e;
    for (std::size_t q = k; q <= e; ++q) rank[order[q]] = (k + e) / 2.0 + 1.0;
    k = e + 1;
  }
  double w = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    if (d[k] > 0) w += rank[k];
  std::size_t le = 0, ge = 0;
  const std::size_t total = std::size_t{1} << m;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      if (mask >> k & 1U) s += rank[k];
    if (s <= w + 1e-9) ++le;
    if (s >= w - 1e-9) ++ge;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

// Unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("mf_" + tag + "_" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
