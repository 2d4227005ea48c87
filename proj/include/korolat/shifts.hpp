#pragma once

// Shift families {y_m^(s)} for the per-fiber least-squares systems, the Gram
// off-diagonal certificate and certified sampling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "korolat/errors.hpp"
#include "korolat/korobov.hpp"
#include "korolat/lattice.hpp"
#include "korolat/math.hpp"
#include "korolat/rng.hpp"

namespace korolat {

inline constexpr double kDefaultK = 1.5;
inline constexpr std::size_t kDefaultShiftRetries = 16;

/// S = ceil(2 K R ln N).
inline std::int64_t required_S(double K, std::int64_t R, std::int64_t N) {
  if (!(K > 1.0)) throw DomainError("required_S: K must be > 1");
  if (R < 1) throw DomainError("required_S: R must be >= 1");
  if (N < 3) throw DomainError("required_S: N must be >= 3");
  return static_cast<std::int64_t>(std::ceil(2.0 * K * static_cast<double>(R) * std::log(static_cast<double>(N))));
}

struct ShiftConfig {
  double K = kDefaultK;
  std::int64_t R = 1;
  std::int64_t N = 3;
  std::int64_t S = 1;

  static ShiftConfig from_formula(double K, std::int64_t R, std::int64_t N) { return {K, R, N, required_S(K, R, N)}; }
  friend bool operator==(const ShiftConfig&, const ShiftConfig&) = default;
};

/// R x S points in [0,1)^d, stored slot-major: point (m, s) is at (m S + s) d.
/// Slot m (0-based) serves the m-th member of every fiber.
class ShiftSet {
 public:
  ShiftSet(ShiftConfig config, int d, std::vector<double> flat, std::uint64_t seed = 0)
      : config_(config), d_(d), flat_(std::move(flat)), seed_(seed) {
    if (d_ < 1) throw DomainError("ShiftSet: d must be >= 1");
    if (flat_.size() != static_cast<std::size_t>(config_.R * config_.S * d_))
      throw DomainError("ShiftSet: expected R*S*d coordinates");
    for (double v : flat_)
      if (!(v >= 0.0 && v < 1.0)) throw DomainError("ShiftSet: coordinates must lie in [0,1)");
  }

  const ShiftConfig& config() const noexcept { return config_; }
  int d() const noexcept { return d_; }
  std::int64_t R() const noexcept { return config_.R; }
  std::int64_t S() const noexcept { return config_.S; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const double> flat() const noexcept { return flat_; }

  std::span<const double> shift(std::int64_t m, std::int64_t s) const {
    return std::span<const double>(flat_.data() + static_cast<std::size_t>((m * config_.S + s) * d_),
                                   static_cast<std::size_t>(d_));
  }

  bool certified() const noexcept { return certified_; }
  double max_offdiag() const noexcept { return max_offdiag_; }
  std::size_t attempts() const noexcept { return attempts_; }

  void set_certificate(bool certified, double max_offdiag, std::size_t attempts = 1) {
    certified_ = certified;
    max_offdiag_ = max_offdiag;
    attempts_ = attempts;
  }

 private:
  ShiftConfig config_;
  int d_;
  std::vector<double> flat_;
  std::uint64_t seed_;
  bool certified_ = false;
  double max_offdiag_ = 0.0;
  std::size_t attempts_ = 0;
};

/// B with rows (m, s), m < v, and columns i: B[(m S + s), i] = e^{2 pi i l_i . y_m^(s)}.
inline Eigen::MatrixXcd build_B(std::span<const Frequency> members, const ShiftSet& shifts) {
  const auto v = static_cast<std::int64_t>(members.size());
  if (v > shifts.R()) throw DomainError("build_B: fiber longer than the number of shift slots");
  const std::int64_t S = shifts.S();
  Eigen::MatrixXcd B(v * S, v);
  for (std::int64_t m = 0; m < v; ++m)
    for (std::int64_t s = 0; s < S; ++s)
      for (std::int64_t i = 0; i < v; ++i)
        B(m * S + s, i) = fourier_phase(members[static_cast<std::size_t>(i)], shifts.shift(m, s));
  return B;
}

/// max_{i != i'} |sum_{m < v} sum_s e^{-2 pi i (l_i - l_i') . y_m^(s)}|; 0 for v = 1.
inline double gram_offdiag(std::span<const Frequency> members, const ShiftSet& shifts) {
  const std::size_t v = members.size();
  if (static_cast<std::int64_t>(v) > shifts.R()) throw DomainError("gram_offdiag: fiber longer than the number of shift slots");
  double worst = 0.0;
  Frequency h(members.empty() ? 0 : members[0].size());
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t ip = i + 1; ip < v; ++ip) {
      for (std::size_t j = 0; j < h.size(); ++j) h[j] = members[ip][j] - members[i][j];
      std::complex<double> acc = 0.0;
      for (std::size_t m = 0; m < v; ++m)
        for (std::int64_t s = 0; s < shifts.S(); ++s)
          acc += fourier_phase(h, shifts.shift(static_cast<std::int64_t>(m), s));
      // |sum e^{-2 pi i h.y}| = |sum e^{2 pi i h.y}|, and the (i', i) entry is the conjugate
      worst = std::max(worst, std::abs(acc));
    }
  }
  return worst;
}

/// (true, max off-diagonal) iff every fiber with v >= 2 has gram_offdiag < S.
inline std::pair<bool, double> certify(const FiberPartition& partition, const ShiftSet& shifts, unsigned threads = 1) {
  if (static_cast<std::int64_t>(partition.max_fiber_length()) > shifts.R())
    throw DomainError("certify: shift set has fewer slots than the longest fiber");
  std::vector<std::size_t> multi;
  for (std::size_t j = 0; j < partition.fiber_count(); ++j)
    if (partition.fiber_size(j) >= 2) multi.push_back(j);
  std::vector<double> value(multi.size(), 0.0);
  parallel_for(multi.size(), threads, [&](std::size_t t) {
    const auto members = partition.members(multi[t]);
    value[t] = gram_offdiag(members, shifts);
  });
  double worst = 0.0;
  for (double v : value) worst = std::max(worst, v);
  return {worst < static_cast<double>(shifts.S()), worst};
}

/// Draws R x S i.i.d. uniform shifts, R the partition's maximal fiber length,
/// and redraws the whole family until it certifies. Attempt a (1-based) draws
/// from rng.split(a). An explicit S overrides the formula value.
inline ShiftSet sample_certified_shifts(const FiberPartition& partition, double K, const Rng& rng,
                                        std::size_t max_retries = kDefaultShiftRetries, std::int64_t S_override = 0,
                                        unsigned threads = 1) {
  const auto R = static_cast<std::int64_t>(std::max<std::size_t>(1, partition.max_fiber_length()));
  const std::int64_t N = partition.gen().N();
  ShiftConfig config = ShiftConfig::from_formula(K, R, N);
  if (S_override > 0) config.S = S_override;
  const int d = partition.gen().d();
  const auto count = static_cast<std::size_t>(config.R * config.S * d);
  for (std::size_t attempt = 1; attempt <= max_retries; ++attempt) {
    Rng stream = rng.split(attempt);
    std::vector<double> flat(count);
    for (auto& v : flat) v = stream.uniform();
    ShiftSet set(config, d, std::move(flat), rng.seed());
    const auto [ok, worst] = certify(partition, set, threads);
    if (ok) {
      set.set_certificate(true, worst, attempt);
      return set;
    }
  }
  throw RetryExhaustedError("sample_certified_shifts: no certified shift family", max_retries);
}

// Text format: header "d R S K seed", then R*S lines of d coordinates.

inline void write_shift_set(std::ostream& os, const ShiftSet& shifts) {
  os << shifts.d() << ' ' << shifts.R() << ' ' << shifts.S() << ' ' << std::setprecision(17) << shifts.config().K << ' '
     << shifts.seed() << '\n';
  for (std::int64_t m = 0; m < shifts.R(); ++m) {
    for (std::int64_t s = 0; s < shifts.S(); ++s) {
      const auto y = shifts.shift(m, s);
      for (std::size_t j = 0; j < y.size(); ++j) os << (j ? " " : "") << y[j];
      os << '\n';
    }
  }
}

/// Reads a shift set. N is not part of the format and is left at 3 unless given;
/// the certificate has to be re-established with certify().
inline ShiftSet read_shift_set(std::istream& is, std::int64_t N = 3) {
  int d = 0;
  ShiftConfig config;
  std::uint64_t seed = 0;
  if (!(is >> d >> config.R >> config.S >> config.K >> seed)) throw Error("read_shift_set: malformed header");
  config.N = N;
  if (d < 1 || config.R < 1 || config.S < 1) throw Error("read_shift_set: invalid header");
  std::vector<double> flat(static_cast<std::size_t>(config.R * config.S * d));
  for (auto& v : flat)
    if (!(is >> v)) throw Error("read_shift_set: truncated body");
  return ShiftSet(config, d, std::move(flat), seed);
}

}  // namespace korolat
