#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "korolat/error_eval.hpp"
#include "korolat/experiments.hpp"

using namespace korolat;

namespace {

const TestFunction kExample1{TestFunction::Kind::ExpCosSin};
const TestFunction kExample2{TestFunction::Kind::ExpCosSinBernoulli};
const TestFunction kExample3{TestFunction::Kind::HatProduct};

ApproximationModel model_from(const IndexSet& set, const std::function<std::complex<double>(FrequencyView)>& coef) {
  std::vector<std::complex<double>> c;
  for (std::size_t i = 0; i < set.size(); ++i) c.push_back(coef(set[i]));
  return ApproximationModel(set.d(), std::vector<std::int64_t>(set.flat().begin(), set.flat().end()), c, {});
}

}  // namespace

TEST(TestFunctions, Values) {
  EXPECT_NEAR(evaluate_test_function(kExample1, std::vector<double>{0.0, 0.0}), std::numbers::e, 1e-15);
  EXPECT_NEAR(evaluate_test_function(kExample2, std::vector<double>{0.0, 0.0, 0.0}), std::numbers::e / 6.0, 1e-15);
  EXPECT_NEAR(evaluate_test_function(kExample3, std::vector<double>{0.5, 0.5}), kHatScale / 25.0, 1e-14);
  EXPECT_EQ(evaluate_test_function(kExample3, std::vector<double>{0.0, 0.5}), 0.0);
  EXPECT_NEAR(evaluate_test_function(kExample1, std::vector<double>{0.5, 0.25}), 1.0, 1e-14);
  EXPECT_THROW(evaluate_test_function(kExample2, std::vector<double>{0.0, 0.0}), DomainError);
  for (auto kind : {TestFunction::Kind::ExpCosSin, TestFunction::Kind::ExpCosSinBernoulli, TestFunction::Kind::HatProduct})
    EXPECT_EQ(parse_test_function(to_string(kind)), kind);
  EXPECT_THROW(parse_test_function("gauss"), DomainError);
  EXPECT_EQ(kExample2.dimension(), 3);
}

TEST(TestFunctions, HatProductHasUnitNorm) {
  // one factor: int_{-a}^{a} (a^2 - t^2)^2 dt = 16 a^5 / 15 with a^2 = 1/5
  const double a = 1.0 / std::sqrt(5.0);
  const double factor = 16.0 * std::pow(a, 5) / 15.0;
  EXPECT_NEAR(kHatScale * kHatScale * factor * factor, 1.0, 1e-14);
}

TEST(Coefficients, ClosedForms) {
  EXPECT_NEAR(std::abs(exp_cos_sin_coefficient(0, 0) - 1.2660658777520082 * 1.2660658777520082), 0.0, 1e-15);
  // I_1(1) = 0.5651591039924851; (-i)^1
  EXPECT_NEAR(std::abs(exp_cos_sin_coefficient(0, 1) - std::complex<double>(0.0, -1.2660658777520082 * 0.5651591039924851)),
              0.0, 1e-15);
  EXPECT_EQ(bernoulli2_coefficient(0), 0.0);
  EXPECT_NEAR(bernoulli2_coefficient(-3), 1.0 / (18.0 * std::numbers::pi * std::numbers::pi), 1e-17);
  EXPECT_NEAR(hat_coefficient(0), 4.0 / (3.0 * std::pow(5.0, 1.5)), 1e-16);
  // small-k limit of the closed form is continuous with the k = 0 value
  EXPECT_GT(hat_coefficient(1), -hat_coefficient(0));
}

TEST(ReferenceCoefficient, SmoothMatchesClosedForm) {
  for (const Frequency& k : {Frequency{0, 0}, Frequency{1, 0}, Frequency{-2, 3}, Frequency{4, -1}}) {
    const auto r512 = reference_coefficient(kExample1, k, 512);
    const auto r1024 = reference_coefficient(kExample1, k, 1024);
    EXPECT_NEAR(std::abs(r512 - r1024), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(r512 - exact_coefficient(kExample1, k)), 0.0, 1e-13);
  }
}

TEST(ReferenceCoefficient, BernoulliMeanZero) {
  // the grid sum of B_2 is sum_{m != 0} hat B_2(256 m) = 1 / (6 * 256^2) instead of 0
  const double alias = 1.0 / (6.0 * 256.0 * 256.0);
  for (const Frequency& k : {Frequency{0, 0, 0}, Frequency{1, 0, 0}, Frequency{0, -2, 0}}) {
    const auto ref = reference_coefficient(kExample2, k, 256);
    EXPECT_NEAR(std::abs(ref), 0.0, 1e-5);
    EXPECT_NEAR(std::abs(ref - exp_cos_sin_coefficient(k[0], k[1]) * alias), 0.0, 1e-13);
  }
  const Frequency k{1, -1, 2};
  // the kink of the periodic B_2 limits the trapezoidal rule to O(grid^-2)
  EXPECT_NEAR(std::abs(reference_coefficient(kExample2, k, 256) - exact_coefficient(kExample2, k)), 0.0, 1e-5);
}

TEST(ReferenceCoefficient, HatSelfConvergence) {
  for (const Frequency& k : {Frequency{0, 0}, Frequency{1, 2}, Frequency{-5, 0}}) {
    const auto r512 = reference_coefficient(kExample3, k, 512);
    const auto r1024 = reference_coefficient(kExample3, k, 1024);
    EXPECT_LT(std::abs(r512 - r1024), 1e-5);
    EXPECT_NEAR(std::abs(r1024 - exact_coefficient(kExample3, k)), 0.0, 1e-5);
  }
}

TEST(ReferenceCoefficient, ConjugateSymmetry) {
  for (const auto& tf : {kExample1, kExample3}) {
    for (const Frequency& k : {Frequency{1, 0}, Frequency{2, -3}, Frequency{0, 5}}) {
      const Frequency neg{-k[0], -k[1]};
      EXPECT_NEAR(std::abs(reference_coefficient(tf, neg, 256) - std::conj(reference_coefficient(tf, k, 256))), 0.0,
                  1e-14);
      EXPECT_NEAR(std::abs(exact_coefficient(tf, neg) - std::conj(exact_coefficient(tf, k))), 0.0, 1e-15);
    }
  }
  const Frequency k{1, 2, -3};
  EXPECT_NEAR(std::abs(exact_coefficient(kExample2, Frequency{-1, -2, 3}) - std::conj(exact_coefficient(kExample2, k))),
              0.0, 1e-15);
}

TEST(ReferenceCoefficient, Errors) {
  EXPECT_THROW(reference_coefficient(kExample1, Frequency{0, 0}, 300), DomainError);
  EXPECT_THROW(reference_coefficient(kExample1, Frequency{0, 0}, 128), DomainError);
  EXPECT_THROW(reference_coefficient(kExample2, Frequency{0, 0, 0}, 1024), ResourceError);
  EXPECT_THROW(reference_coefficient(kExample1, Frequency{0, 0, 0}, 256), DomainError);
}

TEST(EstimateLinf, ExactModelAndSuperset) {
  const auto set = enumerate_index_set(KorobovParams::unweighted(2, 1.0), 30.0);
  Rng rng(1);
  std::vector<std::complex<double>> c(set.size());
  for (auto& v : c) v = {rng.uniform() - 0.5, rng.uniform() - 0.5};
  const ApproximationModel model(2, std::vector<std::int64_t>(set.flat().begin(), set.flat().end()), c, {});
  const auto f = BlackBoxFunction(2, [&](std::span<const double> x) { return evaluate_model(model, x); });
  Rng a(2);
  EXPECT_LE(estimate_Linf(f, model, 5000, a), 1e-10);

  const auto g = make_black_box(kExample1);
  const auto rough = model_from(set, [](FrequencyView k) { return exact_coefficient(kExample1, k); });
  double prev = 0.0;
  for (std::size_t n : {100, 200, 400, 800, 1600}) {
    Rng r(3);
    const double e = estimate_Linf(g, rough, n, r);
    EXPECT_GE(e, prev);
    prev = e;
  }
  Rng r1(4), r4(4);
  EXPECT_EQ(estimate_Linf(g, rough, 3000, r1, 1), estimate_Linf(g, rough, 3000, r4, 4));
  EXPECT_THROW(estimate_Linf(g, rough, 0, r1), DomainError);
}

TEST(EstimateL2, Examples) {
  const auto wave = BlackBoxFunction(2, [](std::span<const double> x) {
    return fourier_phase(Frequency{2, -1}, x);
  });
  Rng rng(5);
  EXPECT_NEAR(estimate_L2(wave, ApproximationModel(), 1000, rng), 1.0, 1e-14);
  // truncation of Example 1 to A: L2 error is the coefficient tail
  const auto set = enumerate_index_set(KorobovParams::unweighted(2, 1.0), 4.0);
  const auto model = model_from(set, [](FrequencyView k) { return exact_coefficient(kExample1, k); });
  double tail = 0.0;
  for (std::int64_t a = -30; a <= 30; ++a)
    for (std::int64_t b = -30; b <= 30; ++b)
      if (!set.contains(Frequency{a, b})) tail += std::norm(exp_cos_sin_coefficient(a, b));
  const double mc = estimate_L2(make_black_box(kExample1), model, 200000, rng);
  EXPECT_NEAR(mc, std::sqrt(tail), 0.02 * std::sqrt(tail));
}

TEST(EstimateRandError, Shape) {
  const auto params = KorobovParams::unweighted(2, 1.0);
  auto part = partition_into_fibers(enumerate_index_set(params, infimum_card_M(params, 113)), GeneratingVector(131, {1, 51}));
  const auto shifts = sample_certified_shifts(part, 1.5, Rng(1));
  const auto f = make_black_box(kExample1);
  auto builder = [&](Rng& rng) { return approximate_rand(f, part, shifts, rng); };
  const auto r3 = estimate_rand_error(f, builder, 3, Rng(7), 2000, 500);
  ASSERT_EQ(r3.per_shift.size(), 3u);
  EXPECT_NEAR(r3.mean_Linf, (r3.per_shift[0] + r3.per_shift[1] + r3.per_shift[2]) / 3.0, 1e-18);
  EXPECT_GT(r3.rms_L2, 0.0);
  const auto again = estimate_rand_error(f, builder, 3, Rng(7), 2000, 500);
  EXPECT_EQ(again.per_shift, r3.per_shift);

  // one shift is one randomized run with the documented streams
  const auto r1 = estimate_rand_error(f, builder, 1, Rng(7), 2000, 0);
  Rng build = Rng(7).split(1);
  Rng sample = Rng(7).split(2);
  const auto model = approximate_rand(f, part, shifts, build);
  EXPECT_EQ(r1.mean_Linf, estimate_Linf(f, model, 2000, sample));
  EXPECT_EQ(r1.per_shift.front(), r3.per_shift.front());
  EXPECT_THROW(estimate_rand_error(f, builder, 0, Rng(7)), DomainError);
}

TEST(BoundDiag, Formulas) {
  const auto p = KorobovParams::unweighted(2, 1.0);
  EXPECT_NEAR(theoretical_bound_diag(p, 1619, 2, 19, 100.0, BoundKind::L2rand), std::sqrt(1.0 + 361.0 * 8.0) / 100.0,
              1e-15);
  const double M = 250.0;
  EXPECT_NEAR(theoretical_bound_diag(p, 1619, 2, 19, M, BoundKind::Linf),
              (1.0 + 19.0 * std::sqrt(2.0)) * std::sqrt(exact_tail_sum(p, M)), 1e-12);
  const auto p2 = KorobovParams::unweighted(2, 2.0);
  EXPECT_GE(tail_sum_diag(p2, 30.0), exact_tail_sum(p2, 30.0));
  for (const auto& q : {p, p2}) {
    for (auto which : {BoundKind::Linf, BoundKind::L2rand}) {
      double prev = INFINITY;
      for (double m : {5.0, 10.0, 40.0, 160.0}) {
        const double b = theoretical_bound_diag(q, 311, 3, 24, m, which);
        EXPECT_GT(b, 0.0);
        EXPECT_LT(b, prev);
        prev = b;
      }
    }
  }
  EXPECT_THROW(theoretical_bound_diag(p, 311, 0, 24, 10.0, BoundKind::Linf), DomainError);
  EXPECT_THROW(theoretical_bound_diag(p, 311, 2, 24, 0.0, BoundKind::L2rand), DomainError);
}

TEST(BoundDiag, L2randDominatesSyntheticRandomCaseError) {
  // f = fiber-supported polynomial plus tail modes with |c_k| <= 1/r(k): unit Korobov-ball scale
  const auto params = KorobovParams::unweighted(2, 1.0);
  const double M = infimum_card_M(params, 113);
  auto part = partition_into_fibers(enumerate_index_set(params, M), GeneratingVector(131, {1, 51}));
  const auto shifts = sample_certified_shifts(part, 1.5, Rng(3));
  Rng rng(4);
  std::vector<std::pair<Frequency, std::complex<double>>> terms;
  for (std::size_t i = 0; i < part.index_set().size(); i += 3)
    terms.push_back({part.index_set().frequency(i), {rng.uniform() - 0.5, 0.0}});
  for (int t = 0; t < 30; ++t) {
    Frequency k{rng.uniform_int(-200, 200), rng.uniform_int(-200, 200)};
    if (r_value(params, k) < M) continue;
    terms.push_back({k, 0.2 / r_value(params, k)});
  }
  double norm2 = 0.0;
  for (const auto& [k, c] : terms) norm2 += r_value(params, k) * r_value(params, k) * std::norm(c);
  const BlackBoxFunction f(2, [&](std::span<const double> x) {
    std::complex<double> acc = 0.0;
    for (const auto& [k, c] : terms) acc += c * fourier_phase(k, x);
    return acc;
  });
  std::map<Frequency, std::complex<double>> truth;
  for (const auto& [k, c] : terms) truth[k] += c;
  double mse = 0.0;
  const int draws = 64;
  for (int t = 0; t < draws; ++t) {
    const auto model = approximate_rand(f, part, shifts, rng);
    double err = 0.0;  // exact L2 error via Parseval
    for (std::size_t i = 0; i < model.size(); ++i) {
      const auto it = truth.find(part.index_set().frequency(i));
      err += std::norm(model.coefficient(i) - (it == truth.end() ? 0.0 : it->second));
    }
    for (const auto& [k, c] : truth)
      if (!part.index_set().contains(k)) err += std::norm(c);
    mse += err;
  }
  const double rms = std::sqrt(mse / draws);
  const double bound = theoretical_bound_diag(params, 131, static_cast<std::int64_t>(part.max_fiber_length()),
                                              shifts.S(), M, BoundKind::L2rand) *
                       std::sqrt(norm2);
  EXPECT_LE(rms, bound);
}

TEST(ExperimentRows, CsvAndJson) {
  std::vector<ExperimentRow> rows(2);
  rows[0].N = 53;
  rows[0].g = {1, 24, 38};
  rows[0].S = 12;
  rows[0].card_A = 27;
  rows[0].R = 2;
  rows[0].error = 0.40261234567891234;
  rows[1] = rows[0];
  rows[1].N = 131;
  rows[1].error = 1.234e-15;
  std::stringstream ss;
  write_rows_csv(ss, rows);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "N,g1,g2,g3,S,card_A,R,error");
  const auto back = read_rows_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].N, rows[i].N);
    EXPECT_EQ(back[i].g, rows[i].g);
    EXPECT_EQ(back[i].S, rows[i].S);
    EXPECT_EQ(back[i].card_A, rows[i].card_A);
    EXPECT_EQ(back[i].R, rows[i].R);
    EXPECT_EQ(back[i].error, rows[i].error);
  }
  const auto j = to_json(rows[0]);
  EXPECT_EQ(j["g"].get<std::vector<std::int64_t>>(), rows[0].g);
  EXPECT_EQ(j["error"].get<double>(), rows[0].error);
  std::stringstream bad("x,y\n1,2\n");
  EXPECT_THROW(read_rows_csv(bad), Error);
}

TEST(Experiments, ExampleOneDeterministicLadderDecreases) {
  const auto table = reference_table(1);
  RunOptions opt;
  opt.seed = 1;
  opt.n_samples = 20000;
  double prev = INFINITY;
  for (const auto& ref : table.rows) {
    if (ref.N < 53) continue;
    const auto run = run_reference_row(table, ref, opt);
    EXPECT_EQ(run.row.card_A, ref.card_A);
    EXPECT_EQ(run.row.R, ref.R);
    EXPECT_LT(run.row.error, prev) << "N=" << ref.N;
    prev = run.row.error;
  }
  EXPECT_LE(prev, 1e-12);
}

TEST(Experiments, LinfDiagnosticDominatesExampleOne) {
  const auto table = reference_table(1);
  const auto params = table.params();
  std::map<Frequency, std::complex<double>> coefs;
  for (std::int64_t a = -25; a <= 25; ++a)
    for (std::int64_t b = -25; b <= 25; ++b) coefs[{a, b}] = exp_cos_sin_coefficient(a, b);
  const double norm = korobov_norm(params, coefs);
  RunOptions opt;
  opt.seed = 2;
  opt.n_samples = 5000;
  for (const auto& ref : table.rows) {
    const auto run = run_reference_row(table, ref, opt);
    const double diag = norm * theoretical_bound_diag(params, run.row.N, run.row.R, run.row.S, run.row.M, BoundKind::Linf);
    EXPECT_GE(diag, run.row.error) << "N=" << ref.N;
  }
}

TEST(Experiments, HatProductSlope) {
  // full ladder of the hat product: decreasing errors and a log-log slope <= -0.6 from N = 311 to 8161
  const auto table = reference_table(3);
  RunOptions opt;
  opt.seed = 3;
  opt.n_samples = 20000;
  double prev = INFINITY;
  double e311 = 0.0, e8161 = 0.0;
  for (const auto& ref : table.rows) {
    if (ref.N < 131) continue;
    const double e = run_reference_row(table, ref, opt).row.error;
    EXPECT_LT(e, prev) << "N=" << ref.N;
    prev = e;
    if (ref.N == 311) e311 = e;
    if (ref.N == 8161) e8161 = e;
  }
  const double slope = std::log(e8161 / e311) / std::log(8161.0 / 311.0);
  EXPECT_LE(slope, -0.6);
}
