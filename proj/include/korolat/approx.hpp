#pragma once

// Deterministic and randomized lattice approximation: shifted lattice sums,
// per-fiber least squares, and the resulting trigonometric model.

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "korolat/cbc.hpp"
#include "korolat/errors.hpp"
#include "korolat/korobov.hpp"
#include "korolat/lattice.hpp"
#include "korolat/math.hpp"
#include "korolat/rng.hpp"
#include "korolat/shifts.hpp"

namespace korolat {

using Point = std::vector<double>;

/// A function on [0,1)^d that is only accessible through point evaluations.
/// Copies share the evaluation counter.
class BlackBoxFunction {
 public:
  using Evaluator = std::function<std::complex<double>(std::span<const double>)>;

  BlackBoxFunction(int d, Evaluator evaluator, bool thread_safe = true)
      : d_(d), evaluator_(std::move(evaluator)), thread_safe_(thread_safe),
        count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    if (d_ < 1) throw DomainError("BlackBoxFunction: d must be >= 1");
  }

  /// Wraps a real-valued function.
  static BlackBoxFunction real(int d, std::function<double(std::span<const double>)> fn, bool thread_safe = true) {
    return BlackBoxFunction(
        d, [fn = std::move(fn)](std::span<const double> x) { return std::complex<double>(fn(x), 0.0); }, thread_safe);
  }

  int d() const noexcept { return d_; }
  bool thread_safe() const noexcept { return thread_safe_; }

  std::complex<double> operator()(std::span<const double> x) const {
    count_->fetch_add(1, std::memory_order_relaxed);
    return evaluator_(x);
  }

  std::uint64_t evaluation_count() const noexcept { return count_->load(); }
  void reset_count() const noexcept { count_->store(0); }

 private:
  int d_;
  Evaluator evaluator_;
  bool thread_safe_;
  std::shared_ptr<std::atomic<std::uint64_t>> count_;
};

/// (1/N) sum_n f({n g/N + y}) e^{-2 pi i l.(n g/N)}, by direct summation.
inline std::complex<double> lattice_fourier_sum(const BlackBoxFunction& f, FrequencyView ell, std::span<const double> y,
                                                const GeneratingVector& gen) {
  const std::int64_t N = gen.N();
  const std::int64_t step = gen.residue(ell);
  std::vector<double> x(static_cast<std::size_t>(gen.d()));
  std::complex<double> acc = 0.0;
  std::int64_t t = 0;  // n (l.g) mod N
  for (std::int64_t n = 0; n < N; ++n) {
    gen.point(n, y, x);
    acc += f(x) * std::conj(unit_phase(static_cast<double>(t) / static_cast<double>(N)));
    t += step;
    if (t >= N) t -= N;
  }
  return acc / static_cast<double>(N);
}

/// (1/N) sum_n f({n g/N + y + Delta}) e^{-2 pi i l.(n g/N + y + Delta)}, by direct summation.
inline std::complex<double> lattice_fourier_sum_rand(const BlackBoxFunction& f, FrequencyView ell,
                                                     std::span<const double> y, std::span<const double> delta,
                                                     const GeneratingVector& gen) {
  std::vector<double> yd(y.begin(), y.end());
  for (std::size_t j = 0; j < yd.size(); ++j) {
    yd[j] += delta[j];
    yd[j] -= std::floor(yd[j]);
    if (yd[j] >= 1.0) yd[j] = 0.0;
  }
  // e^{-2 pi i l.(y + Delta)} with the unreduced sum, computed as two exact-phase factors
  const auto phase = std::conj(fourier_phase(ell, y) * fourier_phase(ell, delta));
  return lattice_fourier_sum(f, ell, yd, gen) * phase;
}

namespace detail {

/// Least squares via the normal equations; Cholesky first, pivoted QR on B if
/// a pivot drops below 1e-10 v S.
inline Eigen::VectorXcd solve_fiber(const Eigen::MatrixXcd& B, const Eigen::VectorXcd& rhs, std::int64_t S,
                                    std::size_t fiber) {
  const auto v = B.cols();
  const Eigen::MatrixXcd G = B.adjoint() * B;
  Eigen::LLT<Eigen::MatrixXcd> llt(G);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const double floor = 1e-10 * static_cast<double>(v * S);
    for (Eigen::Index i = 0; i < v; ++i) {
      const double piv = std::norm(llt.matrixLLT()(i, i));
      if (!(piv >= floor)) {
        ok = false;
        break;
      }
    }
  }
  if (ok) return llt.solve(B.adjoint() * rhs);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(B);
  qr.setThreshold(1e-12);
  if (qr.rank() < v) throw SolverError("least-squares system is rank deficient", fiber);
  return qr.solve(rhs);
}

/// Forward DFT / N of N values, with a plan created once per size. Execution
/// on separate buffers is thread-safe; plan creation is serialized.
class LatticeDft {
 public:
  explicit LatticeDft(std::int64_t N) : N_(static_cast<int>(N)) {
    std::lock_guard lock(fftw_planner_mutex());
    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(N_)));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(N_)));
    plan_ = fftw_plan_dft_1d(N_, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    if (!plan_) throw Error("LatticeDft: could not create FFT plan");
  }
  ~LatticeDft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  LatticeDft(const LatticeDft&) = delete;
  LatticeDft& operator=(const LatticeDft&) = delete;

  struct Buffers {
    explicit Buffers(int N)
        : in(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(N)))),
          out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(N)))) {}
    ~Buffers() {
      fftw_free(in);
      fftw_free(out);
    }
    Buffers(const Buffers&) = delete;
    Buffers& operator=(const Buffers&) = delete;
    fftw_complex* in;
    fftw_complex* out;
  };

  /// out[t] = (1/N) sum_n in[n] e^{-2 pi i t n / N}
  void run(Buffers& b) const {
    fftw_execute_dft(plan_, b.in, b.out);
    const double inv = 1.0 / static_cast<double>(N_);
    for (int t = 0; t < N_; ++t) {
      b.out[t][0] *= inv;
      b.out[t][1] *= inv;
    }
  }

 private:
  int N_;
  fftw_plan plan_;
};

}  // namespace detail

struct ModelMeta {
  std::int64_t N = 0;
  std::vector<std::int64_t> g;
  std::int64_t R = 0;
  std::int64_t S = 0;
  double K = 0.0;
  std::uint64_t seed = 0;
  std::int64_t p = 0;                 // N R S
  std::uint64_t evaluations = 0;      // function evaluations used by the build
  std::optional<std::vector<double>> delta;  // set for randomized models
};

/// Trigonometric polynomial sum_k c_k e^{2 pi i k.x} over the index set of the build.
class ApproximationModel {
 public:
  ApproximationModel() = default;
  ApproximationModel(int d, std::vector<std::int64_t> flat, std::vector<std::complex<double>> coefficients,
                     ModelMeta meta)
      : d_(d), flat_(std::move(flat)), coefficients_(std::move(coefficients)), meta_(std::move(meta)) {
    if (d_ < 1 || flat_.size() != coefficients_.size() * static_cast<std::size_t>(d_))
      throw DomainError("ApproximationModel: support and coefficients disagree");
  }

  int d() const noexcept { return d_; }
  std::size_t size() const noexcept { return coefficients_.size(); }
  bool empty() const noexcept { return coefficients_.empty(); }
  FrequencyView frequency(std::size_t i) const {
    return FrequencyView(flat_.data() + i * static_cast<std::size_t>(d_), static_cast<std::size_t>(d_));
  }
  std::complex<double> coefficient(std::size_t i) const { return coefficients_[i]; }
  std::span<const std::complex<double>> coefficients() const noexcept { return coefficients_; }
  const ModelMeta& meta() const noexcept { return meta_; }

  /// Coefficient at k, 0 outside the support. The support is in canonical order.
  std::complex<double> coefficient_at(FrequencyView k) const {
    std::size_t lo = 0;
    std::size_t hi = size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto v = frequency(mid);
      if (std::lexicographical_compare(v.begin(), v.end(), k.begin(), k.end())) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo < size()) {
      const auto v = frequency(lo);
      if (std::equal(v.begin(), v.end(), k.begin(), k.end())) return coefficients_[lo];
    }
    return 0.0;
  }
  std::complex<double> coefficient_at(const Frequency& k) const { return coefficient_at(FrequencyView(k)); }

 private:
  int d_ = 1;
  std::vector<std::int64_t> flat_;
  std::vector<std::complex<double>> coefficients_;
  ModelMeta meta_;
};

/// Evaluates the model at x with one phase table per coordinate.
inline std::complex<double> evaluate_model(const ApproximationModel& model, std::span<const double> x) {
  if (model.empty()) return 0.0;
  const int d = model.d();
  std::vector<std::int64_t> kmax(static_cast<std::size_t>(d), 0);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto k = model.frequency(i);
    for (int j = 0; j < d; ++j) kmax[j] = std::max(kmax[j], k[j] < 0 ? -k[j] : k[j]);
  }
  std::vector<std::vector<std::complex<double>>> table(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    auto& t = table[j];
    t.resize(static_cast<std::size_t>(2 * kmax[j] + 1));
    for (std::int64_t k = -kmax[j]; k <= kmax[j]; ++k) {
      const std::int64_t kk[1] = {k};
      t[static_cast<std::size_t>(k + kmax[j])] = fourier_phase(FrequencyView(kk, 1), x.subspan(j, 1));
    }
  }
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto k = model.frequency(i);
    std::complex<double> term = model.coefficient(i);
    for (int j = 0; j < d; ++j) term *= table[j][static_cast<std::size_t>(k[j] + kmax[j])];
    acc += term;
  }
  return acc;
}

namespace detail {

/// Shared driver for both algorithms. With delta set, every lattice is
/// additionally shifted by delta and the solution is multiplied by
/// e^{-2 pi i l.delta}. The right-hand side entry for slot (m, s) is
/// e^{2 pi i l_m.(y+delta)} F_N^rand(f, l_m, y+delta), which equals the
/// deterministic sum F_N(f, l_m, y+delta); both are read off one DFT per slot.
inline ApproximationModel approximate(const BlackBoxFunction& f, const FiberPartition& partition,
                                      const ShiftSet& shifts, const std::vector<double>* delta, unsigned threads) {
  const GeneratingVector& gen = partition.gen();
  const int d = gen.d();
  if (f.d() != d || shifts.d() != d) throw DomainError("approximate: dimension mismatch");
  const auto R = static_cast<std::int64_t>(partition.max_fiber_length());
  if (R > shifts.R()) throw DomainError("approximate: shift set has fewer slots than the longest fiber");
  if (delta && delta->size() != static_cast<std::size_t>(d)) throw DomainError("approximate: Delta has wrong dimension");
  const std::int64_t N = gen.N();
  const std::int64_t S = shifts.S();
  const std::size_t fibers = partition.fiber_count();

  // rhs[j] holds v_j S entries ordered (m, s)
  std::vector<std::vector<std::complex<double>>> rhs(fibers);
  for (std::size_t j = 0; j < fibers; ++j) rhs[j].resize(partition.fiber_size(j) * static_cast<std::size_t>(S));
  // fibers_by_slot[m]: fibers with more than m members
  std::vector<std::vector<std::size_t>> fibers_by_slot(static_cast<std::size_t>(R));
  for (std::size_t j = 0; j < fibers; ++j)
    for (std::size_t m = 0; m < partition.fiber_size(j); ++m) fibers_by_slot[m].push_back(j);

  const auto before = f.evaluation_count();
  LatticeDft dft(N);
  const unsigned eval_threads = f.thread_safe() ? threads : 1;
  const auto slots = static_cast<std::size_t>(R * S);
  parallel_for(slots, eval_threads, [&](std::size_t slot) {
    const auto m = static_cast<std::int64_t>(slot) / S;
    const auto s = static_cast<std::int64_t>(slot) % S;
    std::vector<double> y(shifts.shift(m, s).begin(), shifts.shift(m, s).end());
    if (delta) {
      for (int j = 0; j < d; ++j) {
        y[j] += (*delta)[j];
        y[j] -= std::floor(y[j]);
        if (y[j] >= 1.0) y[j] = 0.0;
      }
    }
    LatticeDft::Buffers buf(static_cast<int>(N));
    std::vector<double> x(static_cast<std::size_t>(d));
    for (std::int64_t n = 0; n < N; ++n) {
      gen.point(n, y, x);
      const auto v = f(x);
      buf.in[n][0] = v.real();
      buf.in[n][1] = v.imag();
    }
    dft.run(buf);
    for (std::size_t j : fibers_by_slot[static_cast<std::size_t>(m)]) {
      const auto t = static_cast<std::size_t>(partition.residue(j));
      rhs[j][static_cast<std::size_t>(m * S + s)] = {buf.out[t][0], buf.out[t][1]};
    }
  });
  const auto evaluations = f.evaluation_count() - before;

  const IndexSet& set = partition.index_set();
  std::vector<std::complex<double>> coefficients(set.size());
  parallel_for(fibers, threads, [&](std::size_t j) {
    const auto members = partition.members(j);
    const Eigen::MatrixXcd B = build_B(members, shifts);
    const Eigen::VectorXcd b = Eigen::Map<const Eigen::VectorXcd>(rhs[j].data(), static_cast<Eigen::Index>(rhs[j].size()));
    const Eigen::VectorXcd c = solve_fiber(B, b, S, j);
    const auto idx = partition.member_indices(j);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::complex<double> value = c(static_cast<Eigen::Index>(i));
      if (delta) value *= std::conj(fourier_phase(members[i], *delta));
      coefficients[idx[i]] = value;
    }
  });

  ModelMeta meta;
  meta.N = N;
  meta.g = gen.g();
  meta.R = R;
  meta.S = S;
  meta.K = shifts.config().K;
  meta.seed = shifts.seed();
  meta.p = count_total_points(N, R, S);
  meta.evaluations = evaluations;
  if (delta) meta.delta = *delta;
  std::vector<std::int64_t> flat(set.flat().begin(), set.flat().end());
  return ApproximationModel(d, std::move(flat), std::move(coefficients), std::move(meta));
}

}  // namespace detail

/// Deterministic algorithm: coefficient at every k of the partition's index set.
inline ApproximationModel approximate_det(const BlackBoxFunction& f, const FiberPartition& partition,
                                          const ShiftSet& shifts, unsigned threads = 1) {
  return detail::approximate(f, partition, shifts, nullptr, threads);
}

/// Randomized algorithm with a given global shift Delta in [0,1)^d.
inline ApproximationModel approximate_rand(const BlackBoxFunction& f, const FiberPartition& partition,
                                           const ShiftSet& shifts, const std::vector<double>& delta,
                                           unsigned threads = 1) {
  for (double v : delta)
    if (!(v >= 0.0 && v < 1.0)) throw DomainError("approximate_rand: Delta must lie in [0,1)^d");
  return detail::approximate(f, partition, shifts, &delta, threads);
}

/// Randomized algorithm with Delta drawn uniformly from rng.
inline ApproximationModel approximate_rand(const BlackBoxFunction& f, const FiberPartition& partition,
                                           const ShiftSet& shifts, Rng& rng, unsigned threads = 1) {
  std::vector<double> delta(static_cast<std::size_t>(partition.gen().d()));
  for (auto& v : delta) v = rng.uniform();
  auto model = detail::approximate(f, partition, shifts, &delta, threads);
  return model;
}

/// Recovers the coefficients of one fiber (members in slot order) with the
/// deterministic algorithm, computing every lattice sum directly.
inline std::vector<std::complex<double>> recover_fiber_det(const BlackBoxFunction& f, std::span<const Frequency> members,
                                                           const ShiftSet& shifts, const GeneratingVector& gen) {
  const auto v = static_cast<std::int64_t>(members.size());
  const std::int64_t S = shifts.S();
  Eigen::VectorXcd b(v * S);
  for (std::int64_t m = 0; m < v; ++m)
    for (std::int64_t s = 0; s < S; ++s) b(m * S + s) = lattice_fourier_sum(f, members[m], shifts.shift(m, s), gen);
  const Eigen::VectorXcd c = detail::solve_fiber(build_B(members, shifts), b, S, 0);
  return std::vector<std::complex<double>>(c.data(), c.data() + c.size());
}

/// Randomized counterpart: right-hand side e^{2 pi i l_m.(y+Delta)} F_N^rand(f, l_m, y+Delta),
/// solution multiplied by D(Delta)^{-1}.
inline std::vector<std::complex<double>> recover_fiber_rand(const BlackBoxFunction& f,
                                                            std::span<const Frequency> members, const ShiftSet& shifts,
                                                            const GeneratingVector& gen,
                                                            std::span<const double> delta) {
  const auto v = static_cast<std::int64_t>(members.size());
  const std::int64_t S = shifts.S();
  Eigen::VectorXcd b(v * S);
  for (std::int64_t m = 0; m < v; ++m) {
    for (std::int64_t s = 0; s < S; ++s) {
      const auto y = shifts.shift(m, s);
      const auto phase = fourier_phase(members[m], y) * fourier_phase(members[m], delta);
      b(m * S + s) = phase * lattice_fourier_sum_rand(f, members[m], y, delta, gen);
    }
  }
  const Eigen::VectorXcd c = detail::solve_fiber(build_B(members, shifts), b, S, 0);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(v));
  for (std::int64_t i = 0; i < v; ++i) out[i] = c(i) * std::conj(fourier_phase(members[i], delta));
  return out;
}

// Text format: header "d N R S K seed", optional "g ..." and "Delta ..." lines,
// then one "k1 ... kd re im" line per coefficient.

inline void write_model(std::ostream& os, const ApproximationModel& model) {
  const auto& m = model.meta();
  os << std::setprecision(17);
  os << model.d() << ' ' << m.N << ' ' << m.R << ' ' << m.S << ' ' << m.K << ' ' << m.seed << '\n';
  if (!m.g.empty()) {
    os << "g";
    for (auto v : m.g) os << ' ' << v;
    os << '\n';
  }
  if (m.delta) {
    os << "Delta";
    for (double v : *m.delta) os << ' ' << v;
    os << '\n';
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto k = model.frequency(i);
    for (std::size_t j = 0; j < k.size(); ++j) os << k[j] << ' ';
    os << model.coefficient(i).real() << ' ' << model.coefficient(i).imag() << '\n';
  }
}

inline ApproximationModel read_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("read_model: missing header");
  std::istringstream header(line);
  int d = 0;
  ModelMeta meta;
  if (!(header >> d >> meta.N >> meta.R >> meta.S >> meta.K >> meta.seed) || d < 1)
    throw Error("read_model: malformed header");
  meta.p = count_total_points(meta.N, meta.R, meta.S);
  std::vector<std::int64_t> flat;
  std::vector<std::complex<double>> coefficients;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    if (line.rfind("g ", 0) == 0 || line.rfind("Delta", 0) == 0) {
      std::string key;
      row >> key;
      if (key == "g") {
        std::int64_t v;
        while (row >> v) meta.g.push_back(v);
      } else {
        std::vector<double> delta;
        double v;
        while (row >> v) delta.push_back(v);
        meta.delta = std::move(delta);
      }
      continue;
    }
    for (int j = 0; j < d; ++j) {
      std::int64_t k;
      if (!(row >> k)) throw Error("read_model: malformed coefficient line");
      flat.push_back(k);
    }
    double re, im;
    if (!(row >> re >> im)) throw Error("read_model: malformed coefficient line");
    coefficients.emplace_back(re, im);
  }
  return ApproximationModel(d, std::move(flat), std::move(coefficients), std::move(meta));
}

}  // namespace korolat
