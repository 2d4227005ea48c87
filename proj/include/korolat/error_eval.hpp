#pragma once

// Test integrands, reference Fourier coefficients, sampled error estimates
// and the computable factors of the error bounds.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "korolat/approx.hpp"
#include "korolat/errors.hpp"
#include "korolat/korobov.hpp"
#include "korolat/math.hpp"
#include "korolat/rng.hpp"

namespace korolat {

// ---------------------------------------------------------------- test functions

struct TestFunction {
  enum class Kind { ExpCosSin, ExpCosSinBernoulli, HatProduct };
  Kind kind = Kind::ExpCosSin;

  int dimension() const noexcept { return kind == Kind::ExpCosSinBernoulli ? 3 : 2; }
};

inline const char* to_string(TestFunction::Kind kind) {
  switch (kind) {
    case TestFunction::Kind::ExpCosSin: return "exp_cos_sin";
    case TestFunction::Kind::ExpCosSinBernoulli: return "exp_cos_sin_bernoulli";
    case TestFunction::Kind::HatProduct: return "hat_product";
  }
  return "?";
}

inline TestFunction::Kind parse_test_function(const std::string& name) {
  if (name == "exp_cos_sin") return TestFunction::Kind::ExpCosSin;
  if (name == "exp_cos_sin_bernoulli") return TestFunction::Kind::ExpCosSinBernoulli;
  if (name == "hat_product") return TestFunction::Kind::HatProduct;
  throw DomainError("unknown test function '" + name + "'");
}

/// 5^{3/2} 15^2 / 48, which normalizes the hat product to unit L2 norm.
inline const double kHatScale = std::pow(5.0, 1.5) * 225.0 / 48.0;

inline double hat_factor(double t) { return std::max(0.0, 0.2 - (t - 0.5) * (t - 0.5)); }

inline double evaluate_test_function(const TestFunction& tf, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(tf.dimension()))
    throw DomainError("evaluate_test_function: dimension mismatch");
  switch (tf.kind) {
    case TestFunction::Kind::ExpCosSin:
      return std::exp(std::cos(kTwoPi * x[0]) + std::sin(kTwoPi * x[1]));
    case TestFunction::Kind::ExpCosSinBernoulli:
      return std::exp(std::cos(kTwoPi * x[0]) + std::sin(kTwoPi * x[1])) * bernoulli2(x[2]);
    case TestFunction::Kind::HatProduct:
      return kHatScale * hat_factor(x[0]) * hat_factor(x[1]);
  }
  return 0.0;
}

inline BlackBoxFunction make_black_box(const TestFunction& tf) {
  return BlackBoxFunction::real(tf.dimension(), [tf](std::span<const double> x) { return evaluate_test_function(tf, x); });
}

// ---------------------------------------------------------------- coefficients

/// Fourier coefficient of exp(cos 2 pi x + sin 2 pi y): I_{k1}(1) I_{k2}(1) (-i)^{k2}.
inline std::complex<double> exp_cos_sin_coefficient(std::int64_t k1, std::int64_t k2) {
  const double a = std::cyl_bessel_i(static_cast<double>(k1 < 0 ? -k1 : k1), 1.0);
  const double b = std::cyl_bessel_i(static_cast<double>(k2 < 0 ? -k2 : k2), 1.0);
  static constexpr std::complex<double> powers[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  return a * b * powers[((k2 % 4) + 4) % 4];
}

/// Fourier coefficient of B_2: 1 / (2 pi^2 k^2) for k != 0, 0 for k = 0.
inline double bernoulli2_coefficient(std::int64_t k) {
  if (k == 0) return 0.0;
  const double kk = static_cast<double>(k);
  return 1.0 / (2.0 * std::numbers::pi * std::numbers::pi * kk * kk);
}

/// Fourier coefficient of max(0, 1/5 - (t - 1/2)^2).
inline double hat_coefficient(std::int64_t k) {
  const double a = 1.0 / std::sqrt(5.0);
  if (k == 0) return 4.0 * a * a * a / 3.0;
  const double w = kTwoPi * static_cast<double>(k);
  const double v = 4.0 * (std::sin(w * a) - w * a * std::cos(w * a)) / (w * w * w);
  return (k % 2 == 0) ? v : -v;
}

/// Closed-form coefficient of a test function.
inline std::complex<double> exact_coefficient(const TestFunction& tf, FrequencyView k) {
  if (k.size() != static_cast<std::size_t>(tf.dimension())) throw DomainError("exact_coefficient: dimension mismatch");
  switch (tf.kind) {
    case TestFunction::Kind::ExpCosSin: return exp_cos_sin_coefficient(k[0], k[1]);
    case TestFunction::Kind::ExpCosSinBernoulli: return exp_cos_sin_coefficient(k[0], k[1]) * bernoulli2_coefficient(k.back());
    case TestFunction::Kind::HatProduct: return kHatScale * hat_coefficient(k[0]) * hat_coefficient(k[1]);
  }
  return 0.0;
}

inline constexpr std::uint64_t kReferenceGridCap = std::uint64_t{1} << 28;

/// Equal-weight periodic trapezoidal rule on a grid^d tensor grid for f^(k).
/// Spectrally accurate for the smooth examples, O(grid^-2) for the hat product.
inline std::complex<double> reference_coefficient(const TestFunction& tf, FrequencyView k, std::int64_t grid,
                                                  unsigned threads = 1) {
  if (grid < 256 || (grid & (grid - 1)) != 0)
    throw DomainError("reference_coefficient: grid must be a power of two >= 256");
  const int d = tf.dimension();
  if (k.size() != static_cast<std::size_t>(d)) throw DomainError("reference_coefficient: dimension mismatch");
  double total = 1.0;
  for (int j = 0; j < d; ++j) total *= static_cast<double>(grid);
  if (total > static_cast<double>(kReferenceGridCap)) throw ResourceError("reference_coefficient: grid^d exceeds the cap");

  // phase tables e^{-2 pi i k_j n / grid}
  std::vector<std::vector<std::complex<double>>> phase(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    phase[j].resize(static_cast<std::size_t>(grid));
    const std::int64_t kj = ((k[j] % grid) + grid) % grid;
    for (std::int64_t n = 0; n < grid; ++n)
      phase[j][n] = std::conj(unit_phase(static_cast<double>((kj * n) % grid) / static_cast<double>(grid)));
  }
  const auto outer = static_cast<std::size_t>(grid);
  std::vector<std::complex<double>> partial(outer);
  const std::int64_t inner = static_cast<std::int64_t>(total) / grid;
  parallel_for(outer, threads, [&](std::size_t n0) {
    std::vector<double> x(static_cast<std::size_t>(d));
    x[0] = static_cast<double>(n0) / static_cast<double>(grid);
    std::complex<double> acc = 0.0;
    for (std::int64_t r = 0; r < inner; ++r) {
      std::int64_t rest = r;
      std::complex<double> ph = phase[0][n0];
      for (int j = d - 1; j >= 1; --j) {
        const std::int64_t n = rest % grid;
        rest /= grid;
        x[j] = static_cast<double>(n) / static_cast<double>(grid);
        ph *= phase[j][n];
      }
      acc += evaluate_test_function(tf, x) * ph;
    }
    partial[n0] = acc;
  });
  std::complex<double> sum = 0.0;
  for (const auto& p : partial) sum += p;
  return sum / total;
}

// ---------------------------------------------------------------- estimators

inline constexpr std::size_t kDefaultLinfSamples = 100'000;
inline constexpr std::size_t kDefaultL2Samples = 10'000;

namespace detail {

inline std::vector<double> draw_points(std::size_t n, int d, Rng& rng) {
  std::vector<double> pts(n * static_cast<std::size_t>(d));
  for (auto& v : pts) v = rng.uniform();
  return pts;
}

}  // namespace detail

/// max over n_samples uniform points of |f(x) - model(x)|. The points are
/// drawn up front, so the result does not depend on the thread count.
inline double estimate_Linf(const BlackBoxFunction& f, const ApproximationModel& model, std::size_t n_samples, Rng& rng,
                            unsigned threads = 1) {
  if (n_samples < 1) throw DomainError("estimate_Linf: n_samples must be >= 1");
  const int d = f.d();
  const auto pts = detail::draw_points(n_samples, d, rng);
  std::vector<double> err(n_samples);
  parallel_for(n_samples, f.thread_safe() ? threads : 1, [&](std::size_t i) {
    const std::span<const double> x(pts.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    err[i] = std::abs(f(x) - evaluate_model(model, x));
  });
  return *std::max_element(err.begin(), err.end());
}

/// Monte Carlo root-mean-square error over n_samples uniform points.
inline double estimate_L2(const BlackBoxFunction& f, const ApproximationModel& model, std::size_t n_samples, Rng& rng,
                          unsigned threads = 1) {
  if (n_samples < 1) throw DomainError("estimate_L2: n_samples must be >= 1");
  const int d = f.d();
  const auto pts = detail::draw_points(n_samples, d, rng);
  std::vector<double> err(n_samples);
  parallel_for(n_samples, f.thread_safe() ? threads : 1, [&](std::size_t i) {
    const std::span<const double> x(pts.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    err[i] = std::norm(f(x) - evaluate_model(model, x));
  });
  CompensatedSum acc;
  for (double e : err) acc.add(e);
  return std::sqrt(acc.value() / static_cast<double>(n_samples));
}

struct RandErrorResult {
  double mean_Linf = 0.0;
  std::vector<double> per_shift;
  double rms_L2 = 0.0;  // RMS over the shifts of the Monte Carlo L2 errors
};

/// Builds n_shifts randomized models and averages their sampled L-infinity
/// errors. Shift i builds with rng.split(3i+1), measures L-infinity with
/// rng.split(3i+2) and L2 with rng.split(3i+3).
inline RandErrorResult estimate_rand_error(const BlackBoxFunction& f,
                                           const std::function<ApproximationModel(Rng&)>& builder,
                                           std::size_t n_shifts, const Rng& rng,
                                           std::size_t n_samples = kDefaultLinfSamples,
                                           std::size_t n_l2_samples = kDefaultL2Samples, unsigned threads = 1) {
  if (n_shifts < 1) throw DomainError("estimate_rand_error: n_shifts must be >= 1");
  RandErrorResult out;
  CompensatedSum l2;
  for (std::size_t i = 0; i < n_shifts; ++i) {
    Rng build_rng = rng.split(3 * i + 1);
    Rng linf_rng = rng.split(3 * i + 2);
    Rng l2_rng = rng.split(3 * i + 3);
    const auto model = builder(build_rng);
    out.per_shift.push_back(estimate_Linf(f, model, n_samples, linf_rng, threads));
    if (n_l2_samples > 0) {
      const double e = estimate_L2(f, model, n_l2_samples, l2_rng, threads);
      l2.add(e * e);
    }
  }
  CompensatedSum mean;
  for (double e : out.per_shift) mean.add(e);
  out.mean_Linf = mean.value() / static_cast<double>(n_shifts);
  out.rms_L2 = std::sqrt(l2.value() / static_cast<double>(n_shifts));
  return out;
}

// ---------------------------------------------------------------- bound diagnostics

enum class BoundKind { Linf, L2rand };

/// Tail sum_{k not in A_M} r(k)^{-2}: the smallest closed-form bound over a q
/// grid for alpha > 1, and the exact remainder of the full series otherwise.
inline double tail_sum_diag(const KorobovParams& params, double M) {
  if (params.alpha() > 1.0 && M >= 1.0) {
    const double lo = 1.0 / (2.0 * params.alpha());
    double best = INFINITY;
    for (int i = 1; i < 200; ++i) {
      const double q = lo + (1.0 - lo) * static_cast<double>(i) / 200.0;
      best = std::min(best, tail_sum_bound(params, M, q));
    }
    return best;
  }
  return exact_tail_sum(params, M);
}

/// Linf: (1 + S sqrt(R)) sqrt(tail sum); multiply by the Korobov norm of f.
/// L2rand: sqrt(1 + S^2 R^3) / M.
inline double theoretical_bound_diag(const KorobovParams& params, std::int64_t N, std::int64_t R, std::int64_t S,
                                     double M, BoundKind which) {
  if (N < 1 || R < 1 || S < 1 || !(M > 0.0)) throw DomainError("theoretical_bound_diag: invalid build parameters");
  const double s = static_cast<double>(S);
  const double r = static_cast<double>(R);
  if (which == BoundKind::L2rand) return std::sqrt(1.0 + s * s * r * r * r) / M;
  return (1.0 + s * std::sqrt(r)) * std::sqrt(tail_sum_diag(params, M));
}

// ---------------------------------------------------------------- experiment output

/// One experiment row: the table columns plus run metadata.
struct ExperimentRow {
  std::int64_t N = 0;
  std::vector<std::int64_t> g;
  std::int64_t S = 0;
  std::int64_t card_A = 0;
  std::int64_t R = 0;
  double error = 0.0;

  double M = 0.0;
  double K = 0.0;
  std::uint64_t seed = 0;
  std::int64_t p = 0;
  std::string mode;
  std::vector<double> per_shift;
  std::size_t shift_attempts = 0;
  double max_offdiag = 0.0;
  double runtime_s = 0.0;
};

/// CSV with header "N,g1,...,gd,S,card_A,R,error".
inline void write_rows_csv(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  const std::size_t d = rows.empty() ? 1 : rows.front().g.size();
  os << "N";
  for (std::size_t j = 1; j <= d; ++j) os << ",g" << j;
  os << ",S,card_A,R,error\n";
  std::ostringstream num;
  num.precision(17);
  for (const auto& r : rows) {
    if (r.g.size() != d) throw DomainError("write_rows_csv: rows disagree on dimension");
    os << r.N;
    for (auto v : r.g) os << ',' << v;
    num.str("");
    num << r.error;
    os << ',' << r.S << ',' << r.card_A << ',' << r.R << ',' << num.str() << '\n';
  }
}

inline std::vector<ExperimentRow> read_rows_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("read_rows_csv: empty input");
  std::size_t cols = 1;
  for (char c : line) cols += c == ',';
  if (cols < 6 || line.rfind("N,g1", 0) != 0) throw Error("read_rows_csv: unexpected header");
  const std::size_t d = cols - 5;
  std::vector<ExperimentRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cell;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cell.push_back(c);
    if (cell.size() != cols) throw Error("read_rows_csv: wrong number of fields");
    ExperimentRow r;
    r.N = std::stoll(cell[0]);
    for (std::size_t j = 0; j < d; ++j) r.g.push_back(std::stoll(cell[1 + j]));
    r.S = std::stoll(cell[1 + d]);
    r.card_A = std::stoll(cell[2 + d]);
    r.R = std::stoll(cell[3 + d]);
    r.error = std::stod(cell[4 + d]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::json to_json(const ExperimentRow& r) {
  nlohmann::json j;
  j["N"] = r.N;
  j["g"] = r.g;
  j["S"] = r.S;
  j["card_A"] = r.card_A;
  j["R"] = r.R;
  j["error"] = r.error;
  j["M"] = r.M;
  j["K"] = r.K;
  j["seed"] = r.seed;
  j["p"] = r.p;
  j["mode"] = r.mode;
  if (!r.per_shift.empty()) j["per_shift"] = r.per_shift;
  j["shift_attempts"] = r.shift_attempts;
  j["max_offdiag"] = r.max_offdiag;
  j["runtime_s"] = r.runtime_s;
  return j;
}

inline void write_rows_json(std::ostream& os, const std::vector<ExperimentRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  os << arr.dump(2) << '\n';
}

}  // namespace korolat
