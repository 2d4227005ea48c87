#pragma once

// Scalar numerics shared by the other headers: Riemann zeta, Bernoulli
// polynomials, compensated summation, a 1-D maximizer and a small
// deterministic parallel_for.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <numbers>
#include <thread>
#include <utility>
#include <vector>

#include "korolat/errors.hpp"

namespace korolat {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Riemann zeta for real s > 1: 32 explicit terms plus an Euler-Maclaurin
/// tail (integral, endpoint and six Bernoulli corrections). Absolute error is
/// below 1e-14 for every s > 1.
inline double riemann_zeta(double s) {
  if (!(s > 1.0)) throw DomainError("riemann_zeta: requires s > 1");
  constexpr int n0 = 32;
  CompensatedSum acc;
  for (int k = n0 - 1; k >= 1; --k) acc.add(std::pow(static_cast<double>(k), -s));
  const double n = n0;
  acc.add(std::pow(n, 1.0 - s) / (s - 1.0));
  acc.add(0.5 * std::pow(n, -s));
  // B_{2j}/(2j)!
  static constexpr std::array<double, 6> coef = {
      1.0 / 12.0,           -1.0 / 720.0,          1.0 / 30240.0,
      -1.0 / 1209600.0,     1.0 / 47900160.0,      -691.0 / 1307674368000.0};
  double rising = s;  // s (s+1) ... (s+2j-2)
  double power = std::pow(n, -s - 1.0);
  for (std::size_t j = 0; j < coef.size(); ++j) {
    acc.add(coef[j] * rising * power);
    rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
    power /= n * n;
  }
  return acc.value();
}

/// Bernoulli polynomial B_2(x) = x^2 - x + 1/6.
constexpr double bernoulli2(double x) noexcept { return x * x - x + 1.0 / 6.0; }

/// Bernoulli polynomial B_4(x) = x^4 - 2x^3 + x^2 - 1/30.
constexpr double bernoulli4(double x) noexcept {
  const double x2 = x * x;
  return x2 * x2 - 2.0 * x2 * x + x2 - 1.0 / 30.0;
}

/// Maximizes a smooth scalar function on [lo, hi]: 64-point grid scan, then
/// golden-section refinement of the bracket around the best grid point to a
/// relative tolerance of 1e-10. Returns (argmax, max).
inline std::pair<double, double> maximize_scalar(const std::function<double(double)>& fn, double lo,
                                                 double hi) {
  constexpr int grid = 64;
  std::array<double, grid> xs{};
  std::array<double, grid> ys{};
  std::size_t best = 0;
  for (int i = 0; i < grid; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / (grid - 1);
    ys[i] = fn(xs[i]);
    if (ys[i] > ys[best]) best = static_cast<std::size_t>(i);
  }
  double a = xs[best == 0 ? 0 : best - 1];
  double b = xs[std::min<std::size_t>(best + 1, grid - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  for (int it = 0; it < 200 && (b - a) > 1e-10 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  double x = 0.5 * (a + b);
  double y = fn(x);
  if (ys[best] > y) {
    x = xs[best];
    y = ys[best];
  }
  return {x, y};
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work is split
/// into contiguous chunks, so callers writing to slot i get results that do
/// not depend on the thread count.
inline void parallel_for(std::size_t count, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, count);
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          const std::size_t end = std::min(count, (w + 1) * chunk);
          for (std::size_t i = w * chunk; i < end; ++i) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace korolat
