#include "marginfilter/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace marginfilter {

double error_rate(const LabelSequence& pred, const LabelSequence& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("error_rate: sequences differ in length");
  if (truth.size() == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += pred[i] != truth[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

void validate(const GridSpec& grid) {
  if (grid.C.empty() || grid.lambda.empty() || grid.sigma_k.empty() || grid.f.empty() || grid.n0.empty()) {
    throw std::invalid_argument("grid lists must be non-empty");
  }
  for (double c : grid.C) {
    if (!(c > 0.0)) throw std::invalid_argument("grid C values must be positive");
  }
  for (double l : grid.lambda) {
    if (!(l >= 0.0)) throw std::invalid_argument("grid lambda values must be >= 0");
  }
  for (double s : grid.sigma_k) {
    if (!(s > 0.0)) throw std::invalid_argument("grid sigma_k values must be positive");
  }
  for (std::size_t f : grid.f) {
    if (f == 0) throw std::invalid_argument("grid f values must be >= 1");
  }
}

std::vector<Hyperparams> grid_cells(const GridSpec& grid) {
  validate(grid);
  std::vector<Hyperparams> cells;
  for (double c : grid.C) {
    for (double l : grid.lambda) {
      for (double s : grid.sigma_k) {
        for (std::size_t f : grid.f) {
          for (int n0 : grid.n0) {
            Hyperparams hp{c, l, s, f, n0};
            if (grid.method == Method::svm) {
              hp.f = 1;
              hp.n0 = 0;
            }
            if (grid.method == Method::svm || grid.method == Method::avg_svm) hp.lambda = 0.0;
            if (std::find(cells.begin(), cells.end(), hp) == cells.end()) cells.push_back(hp);
          }
        }
      }
    }
  }
  return cells;
}

namespace {

// True when cell a should be preferred over cell b at equal error.
bool more_regularized(const Hyperparams& a, const Hyperparams& b) {
  if (a.lambda != b.lambda) return a.lambda > b.lambda;
  if (a.C != b.C) return a.C < b.C;
  if (a.sigma_k != b.sigma_k) return a.sigma_k > b.sigma_k;
  return false;
}

}  // namespace

GridSearchResult grid_search(const LabeledSignal& train, const LabeledSignal& validation, const GridSpec& grid,
                             const TrainingOptions& options) {
  const std::vector<Hyperparams> cells = grid_cells(grid);
  std::vector<GridCell> results(cells.size());
  std::vector<SequenceLabeler> models(cells.size());
  const auto count = static_cast<std::ptrdiff_t>(cells.size());
  const auto calibration = std::make_optional(std::make_pair(validation.x, validation.y));

#pragma omp parallel for schedule(dynamic) if (count > 1)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    GridCell& cell = results[idx];
    cell.hp = cells[idx];
    try {
      models[idx] = train_labeler(grid.method, cell.hp, train.x, train.y, options, calibration);
      cell.validation_error = error_rate(predict(models[idx], validation.x, grid.decode), validation.y);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.message = e.what();
    }
  }

  std::size_t best = cells.size();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (!results[k].ok) continue;
    if (best == cells.size() || results[k].validation_error < results[best].validation_error ||
        (results[k].validation_error == results[best].validation_error &&
         more_regularized(results[k].hp, results[best].hp))) {
      best = k;
    }
  }
  if (best == cells.size()) {
    throw std::runtime_error("grid search: every cell failed" +
                             (results.empty() ? std::string() : ": " + results.front().message));
  }
  GridSearchResult out;
  out.best = results[best].hp;
  out.validation_error = results[best].validation_error;
  out.model = std::move(models[best]);
  out.cells = std::move(results);
  return out;
}

namespace {

struct SignedRanks {
  std::vector<long> doubled;  // twice the (average) rank of each |difference|
  std::vector<bool> positive;
  std::vector<long> tie_sizes;
};

SignedRanks rank_differences(const std::vector<double>& differences) {
  std::vector<double> d;
  for (double v : differences) {
    if (v != 0.0) d.push_back(v);
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  SignedRanks r;
  r.doubled.resize(d.size());
  r.positive.resize(d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // ranks i+1 .. j+1 share their mean (i + j + 2) / 2
    const auto doubled = static_cast<long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) r.doubled[order[k]] = doubled;
    r.tie_sizes.push_back(static_cast<long>(j - i + 1));
    i = j + 1;
  }
  for (std::size_t k = 0; k < d.size(); ++k) r.positive[k] = d[k] > 0;
  return r;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double wilcoxon_exact(const std::vector<double>& differences) {
  const SignedRanks r = rank_differences(differences);
  const std::size_t m = r.doubled.size();
  if (m == 0) return 1.0;
  if (m > 24) throw std::invalid_argument("wilcoxon_exact: too many differences to enumerate");
  long observed = 0;
  for (std::size_t k = 0; k < m; ++k) {
    if (r.positive[k]) observed += r.doubled[k];
  }
  std::size_t le = 0;
  std::size_t ge = 0;
  const std::size_t total = std::size_t{1} << m;
  for (std::size_t mask = 0; mask < total; ++mask) {
    long w = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (mask & (std::size_t{1} << k)) w += r.doubled[k];
    }
    if (w <= observed) ++le;
    if (w >= observed) ++ge;
  }
  const double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  return std::min(1.0, p);
}

double wilcoxon_normal(const std::vector<double>& differences) {
  const SignedRanks r = rank_differences(differences);
  const auto m = static_cast<double>(r.doubled.size());
  if (m == 0) return 1.0;
  double w = 0.0;
  for (std::size_t k = 0; k < r.doubled.size(); ++k) {
    if (r.positive[k]) w += 0.5 * static_cast<double>(r.doubled[k]);
  }
  const double mean = m * (m + 1.0) / 4.0;
  double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0;
  for (long t : r.tie_sizes) var -= static_cast<double>(t * t * t - t) / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
}

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  if (a.size() < 5) throw std::invalid_argument("wilcoxon: at least 5 pairs required");
  std::vector<double> d(a.size());
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d[i] = a[i] - b[i];
    nonzero += d[i] != 0.0 ? 1 : 0;
  }
  if (nonzero == 0) return 1.0;
  return nonzero <= 12 ? wilcoxon_exact(d) : wilcoxon_normal(d);
}

std::string_view to_string(SweepAxis a) noexcept {
  switch (a) {
    case SweepAxis::noise: return "noise";
    case SweepAxis::size: return "size";
    case SweepAxis::lag: return "lag";
    case SweepAxis::f: return "f";
    case SweepAxis::sigma_k: return "sigma_k";
  }
  return "?";
}

SweepAxis parse_axis(std::string_view s) {
  if (s == "noise") return SweepAxis::noise;
  if (s == "size") return SweepAxis::size;
  if (s == "lag") return SweepAxis::lag;
  if (s == "f") return SweepAxis::f;
  if (s == "sigma_k" || s == "sigma-k") return SweepAxis::sigma_k;
  throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "' (expected noise, size, lag, f or sigma_k)");
}

std::map<Method, GridSpec> SweepOptions::default_toy_grids() {
  std::map<Method, GridSpec> grids;
  const std::vector<std::size_t> f{11};
  const std::vector<int> n0{6};
  grids[Method::svm] = {{10.0, 100.0, 1000.0, 10000.0}, {0.0}, {0.5, 1.0, 2.0}, {1}, {0}, Method::svm,
                        DecodeMode::online};
  grids[Method::avg_svm] = {{10.0, 100.0, 1000.0, 10000.0}, {0.0}, {0.5, 1.0, 2.0}, f, n0, Method::avg_svm,
                            DecodeMode::online};
  grids[Method::kf_svm] = {{100.0, 1000.0}, {1.0, 10.0, 100.0}, {1.0}, f, n0, Method::kf_svm, DecodeMode::online};
  grids[Method::skf_svm] = {{100.0, 1000.0}, {1.0, 10.0, 100.0}, {1.0}, f, n0, Method::skf_svm, DecodeMode::online};
  return grids;
}

double SweepResult::mean_error(double axis_value, Method method, DecodeMode decode) const {
  const auto e = errors(axis_value, method, decode);
  if (e.empty()) throw std::invalid_argument("no sweep entries for the requested cell");
  return std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

std::vector<double> SweepResult::errors(double axis_value, Method method, DecodeMode decode) const {
  std::vector<double> out;
  for (const auto& e : entries) {
    if (e.axis_value == axis_value && e.method == method && e.decode == decode) out.push_back(e.test_error);
  }
  return out;
}

std::vector<std::uint64_t> default_seeds(std::size_t count) {
  std::vector<std::uint64_t> s(count);
  std::iota(s.begin(), s.end(), std::uint64_t{0});
  return s;
}

ToySplit make_toy_split(const ToyParams& base, std::uint64_t seed, std::size_t n_train, std::size_t n_validation,
                        std::size_t n_test) {
  ToyParams p = base;
  p.lag_seed = seed;
  auto make = [&](std::uint64_t stream, std::size_t n) {
    p.seed = seed * 1000 + stream;
    p.n = n;
    ToySignal s = generate_toy(p);
    return LabeledSignal{std::move(s.x), std::move(s.y)};
  };
  ToySplit out;
  out.train = make(1, n_train);
  out.validation = make(2, n_validation);
  out.test = make(3, n_test);
  return out;
}

std::vector<double> default_axis_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::noise: return {0.25, 0.5, 1.0, 2.0};
    case SweepAxis::size: return {2, 4, 8, 16};
    case SweepAxis::lag: return {0, 2, 5, 10};
    case SweepAxis::f: return {1, 3, 5, 7, 11, 15};
    case SweepAxis::sigma_k: return {0.5, 1, 2, 4, 8};
  }
  return {};
}

SweepResult run_toy_sweep(SweepAxis axis, const std::vector<double>& values, const std::vector<Method>& methods,
                          const std::vector<std::uint64_t>& seeds, const SweepOptions& options) {
  if (values.empty() || methods.empty() || seeds.empty()) throw std::invalid_argument("sweep needs values, methods and seeds");
  SweepResult result;
  result.axis = axis;
  result.seed_count = seeds.size();
  for (double value : values) {
    ToyParams base = options.base;
    switch (axis) {
      case SweepAxis::noise: base.sigma_n = value; break;
      case SweepAxis::size: base.nbtot = static_cast<std::size_t>(value); break;
      case SweepAxis::lag: base.lag = static_cast<int>(value); break;
      default: break;
    }
    std::vector<SweepEntry> block;
    for (std::uint64_t seed : seeds) {
      const ToySplit split = make_toy_split(base, seed, options.n_train, options.n_validation, options.n_test);
      for (Method method : methods) {
        auto it = options.grids.find(method);
        if (it == options.grids.end()) throw std::invalid_argument("no grid configured for method " + std::string(to_string(method)));
        GridSpec grid = it->second;
        if (axis == SweepAxis::f) {
          const auto f = static_cast<std::size_t>(value);
          grid.f = {f};
          grid.n0 = {std::min(static_cast<int>(f) - 1, static_cast<int>(f / 2) + 1)};
        } else if (axis == SweepAxis::sigma_k) {
          grid.sigma_k = {value};
        }
        const GridSearchResult gs = grid_search(split.train, split.validation, grid, options.training);
        std::vector<double> norms(gs.model.filter.channels());
        for (std::size_t v = 0; v < norms.size(); ++v) norms[v] = gs.model.filter.column_norm(v);
        for (DecodeMode mode : {DecodeMode::online, DecodeMode::viterbi}) {
          SweepEntry e;
          e.axis_value = value;
          e.method = method;
          e.decode = mode;
          e.seed = seed;
          e.test_error = error_rate(predict(gs.model, split.test.x, mode), split.test.y);
          e.selected = gs.best;
          e.filter_column_norms = norms;
          block.push_back(std::move(e));
        }
      }
    }
    std::stable_sort(block.begin(), block.end(), [](const SweepEntry& a, const SweepEntry& b) {
      if (a.method != b.method) return a.method < b.method;
      if (a.decode != b.decode) return a.decode < b.decode;
      return a.seed < b.seed;
    });
    result.entries.insert(result.entries.end(), block.begin(), block.end());
  }
  return result;
}

}  // namespace marginfilter
