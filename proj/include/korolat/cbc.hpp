#pragma once

// Component-by-component construction of a generating vector minimizing the
// worst-case criterion P coordinate by coordinate.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <type_traits>
#include <vector>

#include "korolat/errors.hpp"
#include "korolat/korobov.hpp"
#include "korolat/lattice.hpp"
#include "korolat/math.hpp"

namespace korolat {

namespace detail {

/// FFTW's planner is not thread-safe; every plan creation and destruction
/// in the library takes this lock.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
struct FftwPlanDestroy {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

/// Cyclic cross-correlation c[b] = sum_a x[a] y[(a+b) mod L] of two real sequences.
inline std::vector<double> cyclic_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const int L = static_cast<int>(x.size());
  const int H = L / 2 + 1;
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * L)));
  std::unique_ptr<fftw_complex, FftwFree> X(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * H)));
  std::unique_ptr<fftw_complex, FftwFree> Y(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * H)));
  if (!in || !X || !Y) throw ResourceError("cyclic_correlation: allocation failed");

  FftwPlan forward;
  FftwPlan back;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward.reset(fftw_plan_dft_r2c_1d(L, in.get(), X.get(), FFTW_ESTIMATE));
    back.reset(fftw_plan_dft_c2r_1d(L, X.get(), in.get(), FFTW_ESTIMATE));
  }
  if (!forward || !back) throw Error("cyclic_correlation: could not create FFT plans");
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute_dft_r2c(forward.get(), in.get(), X.get());
  std::copy(y.begin(), y.end(), in.get());
  fftw_execute_dft_r2c(forward.get(), in.get(), Y.get());

  // conj(X) * Y transforms back to the correlation
  for (int h = 0; h < H; ++h) {
    const std::complex<double> a(X.get()[h][0], -X.get()[h][1]);
    const std::complex<double> b(Y.get()[h][0], Y.get()[h][1]);
    const auto p = a * b;
    X.get()[h][0] = p.real();
    X.get()[h][1] = p.imag();
  }
  fftw_execute_dft_c2r(back.get(), X.get(), in.get());
  std::vector<double> out(in.get(), in.get() + L);
  for (auto& v : out) v /= static_cast<double>(L);
  return out;
}

}  // namespace detail

/// Builds g = (1, g_2, ..., g_d) for prime N. Each g_s minimizes P over
/// {1,...,N-1} given the earlier coordinates; ties go to the smallest g.
///
/// fast = false scans all candidates directly (O(N^2) per coordinate).
/// fast = true gets all candidate values at once from a length-(N-1) cyclic
/// correlation indexed through a primitive root, then re-scores every
/// candidate within rounding distance of the FFT minimum with the direct
/// routine. The final choice therefore always comes from the same direct
/// evaluation, which makes both modes return identical vectors.
inline GeneratingVector cbc_construct(std::int64_t N, const KorobovParams& params, bool fast = true) {
  const int alpha = detail::require_cbc_alpha(params);
  if (N < 2 || !is_prime(static_cast<std::uint64_t>(N))) throw DomainError("cbc_construct: N must be prime");
  const int d = params.d();
  std::vector<std::int64_t> g{1};
  if (d == 1 || N == 2) {
    g.resize(static_cast<std::size_t>(d), 1);
    return GeneratingVector(N, std::move(g));
  }

  const auto kernel = detail::bernoulli_kernel_table(N, alpha);
  const auto uN = static_cast<std::size_t>(N);
  std::vector<double> prefix(uN, 1.0);
  auto absorb = [&](int j, std::int64_t gj) {
    const double g2 = params.gamma(j) * params.gamma(j);
    std::int64_t x = 0;
    for (std::size_t n = 0; n < uN; ++n) {
      prefix[n] *= 1.0 + g2 * kernel[static_cast<std::size_t>(x)];
      x += gj;
      if (x >= N) x -= N;
    }
  };
  absorb(0, 1);

  // powers of the primitive root: pw[a] = r^a mod N, a = 0..N-2
  std::vector<std::int64_t> pw;
  if (fast) {
    const auto r = static_cast<std::int64_t>(primitive_root(static_cast<std::uint64_t>(N)));
    pw.resize(uN - 1);
    pw[0] = 1;
    for (std::size_t a = 1; a + 1 < uN; ++a) pw[a] = (pw[a - 1] * r) % N;
  }

  for (int s = 1; s < d; ++s) {
    const double g2 = params.gamma(s) * params.gamma(s);
    auto direct = [&](std::int64_t cand) { return detail::extend_criterion(prefix, kernel, g2, N, cand); };

    std::vector<std::int64_t> candidates;
    if (fast) {
      // P(r^b) = -1 + (1/N) [sum_n prefix[n] + g2 (prefix[0] kernel[0] + sum_a prefix[r^a] kernel[r^{a+b}])]
      const std::size_t L = uN - 1;
      std::vector<double> xs(L);
      std::vector<double> ys(L);
      for (std::size_t a = 0; a < L; ++a) {
        xs[a] = prefix[static_cast<std::size_t>(pw[a])];
        ys[a] = kernel[static_cast<std::size_t>(pw[a])];
      }
      const auto corr = detail::cyclic_correlation(xs, ys);
      CompensatedSum base;
      double scale = 0.0;
      double kmax = 0.0;
      for (double p : prefix) {
        base.add(p);
        scale += std::abs(p);
      }
      for (double k : kernel) kmax = std::max(kmax, std::abs(k));
      const double head = base.value() + g2 * prefix[0] * kernel[0];
      std::vector<double> value(L);
      double best = INFINITY;
      for (std::size_t b = 0; b < L; ++b) {
        value[b] = head + g2 * corr[b];
        best = std::min(best, value[b]);
      }
      // FFT rounding is O(eps log L) relative to |x| |y|; this margin is generous
      const double tol = 1e-9 * (scale + g2 * scale * kmax) + 1e-300;
      for (std::size_t b = 0; b < L; ++b)
        if (value[b] <= best + tol) candidates.push_back(pw[b]);
      std::sort(candidates.begin(), candidates.end());
    } else {
      candidates.resize(uN - 1);
      for (std::int64_t c = 1; c < N; ++c) candidates[static_cast<std::size_t>(c - 1)] = c;
    }

    std::int64_t best_g = candidates.front();
    double best_val = direct(best_g);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const double v = direct(candidates[i]);
      if (v < best_val) {
        best_val = v;
        best_g = candidates[i];
      }
    }
    g.push_back(best_g);
    if (s + 1 < d) absorb(s, best_g);
  }
  return GeneratingVector(N, std::move(g));
}

}  // namespace korolat
