// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "korolat/korolat.hpp"

using namespace korolat;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("criterion %2d: %s  %s  [%s] (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

const KorobovParams kUnit2 = KorobovParams::unweighted(2, 1.0);

// sum over nonzero k with k.g = 0 mod N of r(k)^-2, alpha = 1, d = 2; the inner
// sum over a residue class of k2 is the cosecant series, the outer sum runs to |k1| <= box
double dual_sum_alpha_one(const GeneratingVector& gen, std::int64_t box) {
  const std::int64_t N = gen.N();
  const double pi = std::numbers::pi;
  std::int64_t inv = 1;
  for (std::int64_t t = 1; t < N; ++t)
    if ((gen.g(1) * t) % N == 1) inv = t;
  std::vector<double> inner(static_cast<std::size_t>(N));
  inner[0] = 1.0 + pi * pi / (3.0 * N * N);
  for (std::int64_t c = 1; c < N; ++c) {
    const double s = std::sin(pi * c / N);
    inner[c] = pi * pi / (N * N * s * s);
  }
  double acc = inner[0] - 1.0;
  for (std::int64_t k1 = box; k1 >= 1; --k1) {
    const std::int64_t cp = ((N - k1 % N) * gen.g(0) % N) * inv % N;
    const std::int64_t cm = ((k1 % N) * gen.g(0) % N) * inv % N;
    acc += (inner[cp] + inner[cm]) / (static_cast<double>(k1) * static_cast<double>(k1));
  }
  return acc;
}

FiberPartition table_partition(const ReferenceTable& t, const ReferenceRow& r) {
  const auto p = t.params();
  return partition_into_fibers(enumerate_index_set(p, infimum_card_M(p, static_cast<std::size_t>(r.card_A))),
                               GeneratingVector(r.N, r.g));
}

std::complex<double> random_coefficient(Rng& rng) { return {rng.uniform() - 0.5, rng.uniform() - 0.5}; }

}  // namespace

int main() {
  report(1, "index-set cardinality d=2 M=22580", [] {
    const auto set = enumerate_index_set(kUnit2, 22580.0);
    return Outcome{set.size() == 1'009'757, "|A| = " + std::to_string(set.size()) + ", expected 1009757"};
  });

  report(2, "fiber statistics N=999983 M=22580, 100 draws", [] {
    const std::int64_t N = 999983;
    const auto set = enumerate_index_set(kUnit2, 22580.0);
    const Rng root(1);
    std::vector<std::size_t> R(100);
    std::vector<std::uint32_t> scratch;
    for (std::size_t t = 0; t < R.size(); ++t) {
      Rng rng = root.split(t + 1);
      R[t] = max_fiber_length(set, sample_random_g(N, 2, rng, true), scratch);
    }
    std::sort(R.begin(), R.end());
    const std::size_t median = R[(R.size() - 1) / 2];
    const bool ok = median >= 4 && median <= 6 && R.front() <= 4;
    return Outcome{ok, "median " + std::to_string(median) + ", min " + std::to_string(R.front())};
  });

  report(3, "P criterion against closed and dual-lattice oracles", [] {
    const double p1 = worst_case_P(GeneratingVector(2, {1}), KorobovParams::unweighted(1, 1.0));
    const double e1 = std::abs(p1 - std::numbers::pi * std::numbers::pi / 12.0);
    const GeneratingVector gen(5, {1, 2});
    const double e2 = std::abs(worst_case_P(gen, kUnit2) - dual_sum_alpha_one(gen, 20'000'000));
    return Outcome{e1 <= 1e-12 && e2 <= 1e-6, fmt("|P - pi^2/12| = %.2e, |P - dual sum| = %.2e", e1, e2)};
  });

  report(4, "fast and slow CBC agree", [] {
    int same = 0;
    for (std::int64_t N : {53, 131, 311})
      for (int d : {2, 3}) {
        const auto p = KorobovParams::unweighted(d, 1.0);
        same += cbc_construct(N, p, true) == cbc_construct(N, p, false);
      }
    return Outcome{same == 6, std::to_string(same) + "/6 identical"};
  });

  report(5, "CBC figure-of-merit certificate", [] {
    int ok = 0;
    for (std::int64_t N : {53, 131, 311})
      for (int d : {2, 3}) {
        const auto p = KorobovParams::unweighted(d, 1.0);
        ok += rho_exceeds(cbc_construct(N, p), p, choose_M(p, N, MRule::closed_form_half()));
      }
    return Outcome{ok == 6, std::to_string(ok) + "/6 with rho(g) > M"};
  });

  report(6, "shift certificate soundness on table-1 configurations", [] {
    const auto table = reference_table(1);
    double worst_low = INFINITY;  // min over fibers of lambda_min / v
    double worst_inv = 0.0;       // max over fibers of v ||(B^H B)^-1||
    std::size_t fibers = 0;
    for (const auto& row : table.rows) {
      const auto part = table_partition(table, row);
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto shifts = sample_certified_shifts(part, kDefaultK, Rng(seed));
        if (!shifts.certified()) return Outcome{false, "uncertified shift set returned"};
        for (std::size_t j = 0; j < part.fiber_count(); ++j) {
          const auto members = part.members(j);
          const double v = static_cast<double>(members.size());
          const auto B = build_B(members, shifts);
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(B.adjoint() * B, Eigen::EigenvaluesOnly);
          const double lmin = es.eigenvalues().minCoeff();
          worst_low = std::min(worst_low, lmin / v);
          worst_inv = std::max(worst_inv, v / lmin);
          ++fibers;
        }
      }
    }
    const bool ok = worst_low >= 1.0 - 1e-8 && worst_inv <= 1.0 + 1e-8;
    return Outcome{ok, fmt("min lambda_min/v = %.3f, max v||G^-1|| = %.3f", worst_low, worst_inv) + " over " +
                           std::to_string(fibers) + " fibers"};
  });

  report(7, "exact recovery of 50 trig polynomials, det and rand", [] {
    const std::vector<std::pair<int, std::size_t>> rows{{1, 2}, {1, 3}, {1, 4}, {2, 1}, {2, 2}, {3, 1}};
    Rng rng(7);
    double coef_err = 0.0;
    double linf = 0.0;
    std::size_t longest = 0;
    for (int t = 0; t < 50; ++t) {
      const auto& [tid, ri] = rows[static_cast<std::size_t>(t) % rows.size()];
      const auto table = reference_table(tid);
      const auto& row = table.rows[ri];
      const auto part = table_partition(table, row);
      const auto shifts = sample_certified_shifts(part, kDefaultK, rng.split(static_cast<std::uint64_t>(t)));
      // one whole fiber of maximal length plus random members of A
      std::map<Frequency, std::complex<double>> coef;
      for (std::size_t j = 0; j < part.fiber_count(); ++j)
        if (part.fiber_size(j) == part.max_fiber_length()) {
          for (const auto& k : part.members(j)) coef[k] = random_coefficient(rng);
          break;
        }
      longest = std::max(longest, part.max_fiber_length());
      const auto& set = part.index_set();
      for (int i = 0; i < 20; ++i)
        coef[set.frequency(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(set.size()) - 1)))] =
            random_coefficient(rng);
      const BlackBoxFunction f(table.function.dimension(), [&](std::span<const double> x) {
        std::complex<double> acc = 0.0;
        for (const auto& [k, c] : coef) acc += c * fourier_phase(k, x);
        return acc;
      });
      Rng delta_rng = rng.split(1000 + static_cast<std::uint64_t>(t));
      for (const auto& model : {approximate_det(f, part, shifts), approximate_rand(f, part, shifts, delta_rng)}) {
        for (std::size_t i = 0; i < model.size(); ++i) {
          const auto it = coef.find(set.frequency(i));
          const std::complex<double> truth = it == coef.end() ? 0.0 : it->second;
          coef_err = std::max(coef_err, std::abs(model.coefficient(i) - truth));
        }
        Rng sample = rng.split(2000 + static_cast<std::uint64_t>(t));
        linf = std::max(linf, estimate_Linf(f, model, 2000, sample));
      }
    }
    return Outcome{coef_err <= 1e-10 && linf <= 1e-9,
                   fmt("max coefficient error %.2e, Linf %.2e", coef_err, linf) + ", fibers up to v = " +
                       std::to_string(longest)};
  });

  report(8, "randomized estimator unbiased over 4096 Delta", [] {
    const TestFunction tf{TestFunction::Kind::ExpCosSin};
    const auto f = make_black_box(tf);
    const auto part = partition_into_fibers(enumerate_index_set(kUnit2, infimum_card_M(kUnit2, 33)),
                                            GeneratingVector(53, {1, 27}));
    const auto shifts = sample_certified_shifts(part, kDefaultK, Rng(8));
    const auto& set = part.index_set();
    std::vector<std::size_t> pick;  // the members of the longest fiber first, then others
    for (std::size_t j = 0; j < part.fiber_count() && pick.size() < 10; ++j)
      if (part.fiber_size(j) == part.max_fiber_length())
        for (auto i : part.member_indices(j)) pick.push_back(i);
    for (std::size_t i = 0; i < set.size() && pick.size() < 10; ++i)
      if (std::find(pick.begin(), pick.end(), i) == pick.end()) pick.push_back(i);
    pick.resize(10);
    const int n = 4096;
    std::vector<double> sr(10), si(10), qr(10), qi(10);
    Rng rng(88);
    for (int t = 0; t < n; ++t) {
      const auto model = approximate_rand(f, part, shifts, rng);
      for (std::size_t q = 0; q < 10; ++q) {
        const auto c = model.coefficient(pick[q]);
        sr[q] += c.real();
        si[q] += c.imag();
        qr[q] += c.real() * c.real();
        qi[q] += c.imag() * c.imag();
      }
    }
    double worst = 0.0;  // |mean - reference| in standard errors
    for (std::size_t q = 0; q < 10; ++q) {
      const auto ref = reference_coefficient(tf, set[pick[q]], 512);
      const double mr = sr[q] / n;
      const double mi = si[q] / n;
      const double se_r = std::sqrt(std::max(qr[q] / n - mr * mr, 0.0) / n);
      const double se_i = std::sqrt(std::max(qi[q] / n - mi * mi, 0.0) / n);
      const double floor = 1e-14;
      worst = std::max(worst, std::abs(mr - ref.real()) / std::max(se_r, floor));
      worst = std::max(worst, std::abs(mi - ref.imag()) / std::max(se_i, floor));
    }
    return Outcome{worst <= 4.0, fmt("max deviation %.2f standard errors over 10 frequencies", worst)};
  });

  report(9, "table 1, N=1619: deterministic error <= 5e-13", [] {
    const auto table = reference_table(1);
    RunOptions opt;
    opt.seed = 9;
    const auto run = run_reference_row(table, table.rows.back(), opt);
    return Outcome{run.row.error <= 5e-13, fmt("error %.3e (listed 2.423e-14), S = %.0f", run.row.error,
                                               static_cast<double>(run.row.S))};
  });

  report(10, "table 3 trend: strictly decreasing, N=1619 <= 0.15", [] {
    const auto table = reference_table(3);
    RunOptions opt;
    opt.seed = 10;
    std::string detail;
    double prev = INFINITY;
    bool decreasing = true;
    double last = 0.0;
    for (const auto& row : ladder(table, false)) {
      if (row.N < 131) continue;
      last = run_reference_row(table, row, opt).row.error;
      decreasing = decreasing && last < prev;
      prev = last;
      detail += fmt("%.3e ", last);
    }
    return Outcome{decreasing && last <= 0.15, "errors N=131..1619: " + detail};
  });

  report(11, "tables 4/6, N=1619: randomized means over 10 shifts", [] {
    RunOptions opt;
    opt.seed = 11;
    const auto t4 = reference_table(4);
    const auto t6 = reference_table(6);
    const double e4 = run_reference_row(t4, t4.rows.back(), opt).row.error;
    const double e6 = run_reference_row(t6, t6.rows.back(), opt).row.error;
    return Outcome{e4 <= 5e-13 && e6 <= 3e-2, fmt("example 1 mean %.3e (<= 5e-13), example 3 mean %.3e (<= 3e-2)", e4, e6)};
  });

  report(12, "rate substitute: bound domination on table 1 and table-3 slope", [] {
    const auto t1 = reference_table(1);
    std::map<Frequency, std::complex<double>> coefs;
    for (std::int64_t a = -25; a <= 25; ++a)
      for (std::int64_t b = -25; b <= 25; ++b) coefs[{a, b}] = exp_cos_sin_coefficient(a, b);
    const double norm = korobov_norm(t1.params(), coefs);
    RunOptions opt;
    opt.seed = 12;
    double worst_ratio = 0.0;  // measured / diagnostic
    for (const auto& row : t1.rows) {
      const auto r = run_reference_row(t1, row, opt).row;
      const double diag = norm * theoretical_bound_diag(t1.params(), r.N, r.R, r.S, r.M, BoundKind::Linf);
      worst_ratio = std::max(worst_ratio, r.error / diag);
    }
    const auto t3 = reference_table(3);
    double e311 = 0.0, e8161 = 0.0;
    for (const auto& row : t3.rows) {
      if (row.N == 311) e311 = run_reference_row(t3, row, opt).row.error;
      if (row.N == 8161) e8161 = run_reference_row(t3, row, opt).row.error;
    }
    const double slope = std::log(e8161 / e311) / std::log(8161.0 / 311.0);
    return Outcome{worst_ratio <= 1.0 && slope <= -0.6,
                   fmt("max measured/diagnostic %.2e, example 3 log-log slope N=311..8161 %.2f", worst_ratio, slope)};
  });

  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
