#pragma once

// End-to-end pipeline runs and the reference experiment ladders.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "korolat/approx.hpp"
#include "korolat/error_eval.hpp"
#include "korolat/korobov.hpp"
#include "korolat/lattice.hpp"
#include "korolat/rng.hpp"
#include "korolat/shifts.hpp"

namespace korolat {

enum class Mode { Det, Rand };

inline const char* to_string(Mode m) { return m == Mode::Det ? "det" : "rand"; }

/// A published table row: lattice, shift count, index-set size, fiber length, error.
struct ReferenceRow {
  std::int64_t N;
  std::vector<std::int64_t> g;
  std::int64_t S;
  std::int64_t card_A;
  std::int64_t R;
  double error;
};

struct ReferenceTable {
  int id = 0;
  TestFunction function;
  Mode mode = Mode::Det;
  std::vector<ReferenceRow> rows;

  KorobovParams params() const { return KorobovParams::unweighted(function.dimension(), 1.0); }
};

/// Reference ladders 1-6 (alpha = 1, unit weights). Tables 2 and 5 are 3-D.
inline ReferenceTable reference_table(int id) {
  using K = TestFunction::Kind;
  switch (id) {
    case 1:
      return {1, {K::ExpCosSin}, Mode::Det,
              {{19, {1, 11}, 5, 9, 1, 1.550},
               {53, {1, 41}, 6, 33, 1, 1.386e-1},
               {131, {1, 51}, 14, 113, 2, 2.679e-3},
               {311, {1, 158}, 31, 277, 4, 1.037e-5},
               {719, {1, 336}, 26, 705, 3, 5.550e-10},
               {1619, {1, 497}, 19, 1593, 2, 2.423e-14}}};
    case 2:
      return {2, {K::ExpCosSinBernoulli}, Mode::Det,
              {{53, {1, 24, 38}, 12, 27, 2, 4.026e-1},
               {131, {1, 81, 75}, 14, 135, 2, 1.664e-1},
               {311, {1, 24, 165}, 24, 279, 3, 1.187e-1},
               {719, {1, 476, 485}, 52, 683, 6, 7.975e-2},
               {1619, {1, 434, 520}, 38, 1577, 4, 4.994e-2},
               {3671, {1, 3210, 1239}, 41, 3349, 4, 3.159e-2},
               {8161, {1, 4870, 3948}, 67, 6499, 6, 1.783e-2}}};
    case 3:
      return {3, {K::HatProduct}, Mode::Det,
              {{53, {1, 28}, 18, 27, 3, 7.555e-1},
               {131, {1, 103}, 21, 135, 3, 1.121e-1},
               {311, {1, 110}, 16, 279, 2, 1.189e-1},
               {719, {1, 125}, 26, 683, 3, 6.920e-2},
               {1619, {1, 486}, 29, 1577, 3, 4.149e-2},
               {3671, {1, 1249}, 31, 3349, 3, 2.231e-2},
               {8161, {1, 2119}, 45, 6499, 4, 1.245e-2}}};
    case 4:
      return {4, {K::ExpCosSin}, Mode::Rand,
              {{19, {1, 11}, 5, 9, 1, 1.579},
               {53, {1, 27}, 18, 33, 3, 1.232e-1},
               {131, {1, 22}, 21, 113, 3, 2.706e-3},
               {311, {1, 213}, 24, 277, 3, 1.025e-5},
               {719, {1, 432}, 43, 705, 5, 5.587e-10},
               {1619, {1, 1254}, 19, 1593, 2, 2.057e-14}}};
    case 5:
      return {5, {K::ExpCosSinBernoulli}, Mode::Rand,
              {{53, {1, 25, 13}, 12, 27, 2, 5.259e-1},
               {131, {1, 59, 87}, 21, 135, 3, 1.711e-1},
               {311, {1, 269, 133}, 39, 279, 5, 1.434e-1},
               {719, {1, 646, 191}, 35, 683, 4, 7.613e-2},
               {1619, {1, 177, 319}, 38, 1577, 4, 4.141e-2},
               {3671, {1, 1198, 2930}, 31, 3349, 3, 2.680e-2},
               {8161, {1, 1565, 4703}, 45, 6499, 4, 1.838e-2}}};
    case 6:
      return {6, {K::HatProduct}, Mode::Rand,
              {{19, {1, 11}, 5, 9, 1, 3.274e-1},
               {53, {1, 27}, 18, 33, 3, 7.114e-2},
               {131, {1, 22}, 21, 113, 3, 6.189e-2},
               {311, {1, 213}, 24, 277, 3, 2.689e-2},
               {719, {1, 432}, 43, 705, 5, 1.223e-2},
               {1619, {1, 1254}, 19, 1593, 2, 6.133e-3}}};
    default:
      throw DomainError("reference_table: id must be in 1..6");
  }
}

struct RunOptions {
  double K = kDefaultK;
  std::int64_t S = 0;  // > 0 overrides ceil(2 K R ln N)
  std::uint64_t seed = 0;
  std::size_t n_samples = kDefaultLinfSamples;
  std::size_t n_shifts = 10;
  std::size_t max_shift_retries = kDefaultShiftRetries;
  unsigned threads = 1;
};

/// Everything a single pipeline run produces.
struct RunResult {
  ExperimentRow row;
  std::shared_ptr<const FiberPartition> partition;
  std::optional<ShiftSet> shifts;
  ApproximationModel model;  // deterministic model, or the first randomized one
  RandErrorResult rand;
};

/// index set -> partition -> certified shifts -> model(s) -> sampled error.
/// Streams: shifts from Rng(seed).split(1), L-infinity sampling from split(2),
/// randomized builds and their errors from split(3).
inline RunResult run_pipeline(const TestFunction& tf, const KorobovParams& params, double M,
                              const GeneratingVector& gen, Mode mode, const RunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  const Rng root(opt.seed);
  RunResult out;
  auto set = std::make_shared<const IndexSet>(enumerate_index_set(params, M));
  out.partition = std::make_shared<const FiberPartition>(partition_into_fibers(set, gen));
  const FiberPartition& part = *out.partition;
  out.shifts.emplace(
      sample_certified_shifts(part, opt.K, root.split(1), opt.max_shift_retries, opt.S, opt.threads));
  const ShiftSet& shifts = *out.shifts;
  const BlackBoxFunction f = make_black_box(tf);

  ExperimentRow& row = out.row;
  row.N = gen.N();
  row.g = gen.g();
  row.S = shifts.S();
  row.card_A = static_cast<std::int64_t>(set->size());
  row.R = static_cast<std::int64_t>(part.max_fiber_length());
  row.M = M;
  row.K = opt.K;
  row.seed = opt.seed;
  row.p = count_total_points(row.N, std::max<std::int64_t>(row.R, 1), row.S);
  row.mode = to_string(mode);
  row.shift_attempts = shifts.attempts();
  row.max_offdiag = shifts.max_offdiag();

  if (mode == Mode::Det) {
    out.model = approximate_det(f, part, shifts, opt.threads);
    Rng sample_rng = root.split(2);
    row.error = estimate_Linf(f, out.model, opt.n_samples, sample_rng, opt.threads);
  } else {
    bool first = true;
    auto builder = [&](Rng& rng) {
      auto model = approximate_rand(f, part, shifts, rng, opt.threads);
      if (first) {
        out.model = model;
        first = false;
      }
      return model;
    };
    out.rand = estimate_rand_error(f, builder, opt.n_shifts, root.split(3), opt.n_samples, kDefaultL2Samples,
                                   opt.threads);
    row.error = out.rand.mean_Linf;
    row.per_shift = out.rand.per_shift;
  }
  row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Runs one reference row: the listed g, M chosen as the largest threshold
/// with |A_M| <= the listed |A|, fresh shifts.
inline RunResult run_reference_row(const ReferenceTable& table, const ReferenceRow& ref, const RunOptions& opt) {
  const auto params = table.params();
  const double M = infimum_card_M(params, static_cast<std::size_t>(ref.card_A));
  return run_pipeline(table.function, params, M, GeneratingVector(ref.N, ref.g), table.mode, opt);
}

/// Desk scale keeps rows with N <= 1619.
inline std::vector<ReferenceRow> ladder(const ReferenceTable& table, bool full) {
  std::vector<ReferenceRow> rows;
  for (const auto& r : table.rows)
    if (full || r.N <= 1619) rows.push_back(r);
  return rows;
}

}  // namespace korolat
