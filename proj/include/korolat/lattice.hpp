#pragma once

// Rank-1 lattices: generating vectors, point sets, dual-lattice residues,
// fiber partitions of an index set, the figure-of-merit predicate and the
// closed-form worst-case integration criterion P_{alpha,gamma,N}.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "korolat/errors.hpp"
#include "korolat/korobov.hpp"
#include "korolat/math.hpp"
#include "korolat/rng.hpp"

namespace korolat {

// ---------------------------------------------------------------- primes

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

inline std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

}  // namespace detail

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = detail::powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = detail::mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

/// Smallest prime >= n.
inline std::uint64_t next_prime(std::uint64_t n) {
  if (n <= 2) return 2;
  if (n % 2 == 0) ++n;
  while (!is_prime(n)) n += 2;
  return n;
}

/// Largest prime <= n (n >= 2).
inline std::uint64_t prev_prime(std::uint64_t n) {
  if (n < 2) throw DomainError("prev_prime: no prime below 2");
  while (!is_prime(n)) --n;
  return n;
}

/// Smallest primitive root modulo the prime p.
inline std::uint64_t primitive_root(std::uint64_t p) {
  if (!is_prime(p)) throw DomainError("primitive_root: modulus is not prime");
  if (p == 2) return 1;
  std::vector<std::uint64_t> factors;
  std::uint64_t m = p - 1;
  for (std::uint64_t f = 2; f * f <= m; ++f) {
    if (m % f == 0) {
      factors.push_back(f);
      while (m % f == 0) m /= f;
    }
  }
  if (m > 1) factors.push_back(m);
  for (std::uint64_t g = 2; g < p; ++g) {
    bool ok = true;
    for (auto f : factors) {
      if (detail::powmod(g, (p - 1) / f, p) == 1) {
        ok = false;
        break;
      }
    }
    if (ok) return g;
  }
  throw Error("primitive_root: none found");
}

// ---------------------------------------------------------------- phases

/// Fractional part of k . y in [0,1). Each product is split into its rounded
/// value and exact error term, so large |k_j| do not cost phase accuracy.
inline double frac_dot(FrequencyView k, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    const double kj = static_cast<double>(k[j]);
    const double p = kj * y[j];
    const double err = std::fma(kj, y[j], -p);
    acc += (p - std::floor(p)) + err;
  }
  acc -= std::floor(acc);
  return acc >= 1.0 ? 0.0 : acc;
}

/// e^{2 pi i t}.
inline std::complex<double> unit_phase(double t) {
  t -= std::floor(t);
  return std::polar(1.0, kTwoPi * t);
}

/// e^{2 pi i k.y}.
inline std::complex<double> fourier_phase(FrequencyView k, std::span<const double> y) {
  return unit_phase(frac_dot(k, y));
}

// ---------------------------------------------------------------- lattices

/// Prime lattice size N and generating vector g in {1,...,N-1}^d. The
/// approximation pipeline needs N >= 3; N = 2 is allowed for small checks.
class GeneratingVector {
 public:
  GeneratingVector(std::int64_t N, std::vector<std::int64_t> g) : N_(N), g_(std::move(g)) {
    if (!is_prime(static_cast<std::uint64_t>(std::max<std::int64_t>(N_, 0))))
      throw DomainError("GeneratingVector: N must be prime");
    if (g_.empty()) throw DomainError("GeneratingVector: empty generating vector");
    for (auto v : g_)
      if (v < 1 || v > N_ - 1) throw DomainError("GeneratingVector: entries must lie in {1,...,N-1}");
  }

  std::int64_t N() const noexcept { return N_; }
  const std::vector<std::int64_t>& g() const noexcept { return g_; }
  std::int64_t g(std::size_t j) const { return g_[j]; }
  int d() const noexcept { return static_cast<int>(g_.size()); }

  /// k . g mod N in [0, N); each k_j is reduced mod N before multiplying.
  std::int64_t residue(FrequencyView k) const {
    std::int64_t acc = 0;
    for (std::size_t j = 0; j < g_.size(); ++j) {
      std::int64_t kj = k[j] % N_;
      if (kj < 0) kj += N_;
      acc = (acc + static_cast<std::int64_t>(detail::mulmod(static_cast<std::uint64_t>(kj),
                                                            static_cast<std::uint64_t>(g_[j]),
                                                            static_cast<std::uint64_t>(N_)))) %
            N_;
    }
    return acc;
  }

  /// Writes the point {n g / N + shift} into out. An empty shift means zero.
  void point(std::int64_t n, std::span<const double> shift, std::span<double> out) const {
    const double inv = 1.0 / static_cast<double>(N_);
    for (std::size_t j = 0; j < g_.size(); ++j) {
      const auto num = static_cast<std::int64_t>(
          detail::mulmod(static_cast<std::uint64_t>(n % N_), static_cast<std::uint64_t>(g_[j]),
                         static_cast<std::uint64_t>(N_)));
      double x = static_cast<double>(num) * inv;
      if (!shift.empty()) {
        x += shift[j];
        x -= std::floor(x);
        if (x >= 1.0) x = 0.0;
      }
      out[j] = x;
    }
  }

  friend bool operator==(const GeneratingVector&, const GeneratingVector&) = default;

 private:
  std::int64_t N_;
  std::vector<std::int64_t> g_;
};

/// The N points {n g / N}, n = 0..N-1.
inline std::vector<std::vector<double>> lattice_points(const GeneratingVector& gen) {
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(gen.N()),
                                       std::vector<double>(static_cast<std::size_t>(gen.d())));
  for (std::int64_t n = 0; n < gen.N(); ++n) gen.point(n, {}, pts[static_cast<std::size_t>(n)]);
  return pts;
}

/// (1/N) sum over the shifted lattice of e^{2 pi i k.x}, by direct summation.
/// Equals e^{2 pi i k.y} if k.g = 0 mod N and 0 otherwise. The phase of each
/// point is split as n (k.g mod N) / N plus k.y, so large |k| stays accurate.
inline std::complex<double> character_sum(const GeneratingVector& gen, FrequencyView k, std::span<const double> shift) {
  const std::int64_t N = gen.N();
  const std::int64_t step = gen.residue(k);
  std::complex<double> acc = 0.0;
  std::int64_t t = 0;
  for (std::int64_t n = 0; n < N; ++n) {
    acc += unit_phase(static_cast<double>(t) / static_cast<double>(N));
    t += step;
    if (t >= N) t -= N;
  }
  const auto base = shift.empty() ? std::complex<double>(1.0) : fourier_phase(k, shift);
  return acc * base / static_cast<double>(N);
}

inline std::string format_generating_vector(const GeneratingVector& gen) {
  std::string s = std::to_string(gen.N());
  for (auto v : gen.g()) s += ' ' + std::to_string(v);
  return s;
}

/// Parses "N g1 ... gd".
inline GeneratingVector parse_generating_vector(std::istream& is) {
  std::int64_t N = 0;
  if (!(is >> N)) throw Error("parse_generating_vector: missing N");
  std::vector<std::int64_t> g;
  std::int64_t v;
  while (is >> v) g.push_back(v);
  return GeneratingVector(N, std::move(g));
}

// ---------------------------------------------------------------- fibers

/// Partition of an index set into fibers: classes of frequencies with equal
/// residue k.g mod N. Fibers are ordered by their representative (the
/// canonically smallest member) and members are kept in canonical order.
class FiberPartition {
 public:
  FiberPartition(std::shared_ptr<const IndexSet> index_set, GeneratingVector gen, std::vector<std::size_t> offsets,
                 std::vector<std::size_t> members, std::vector<std::int64_t> residues)
      : index_set_(std::move(index_set)),
        gen_(std::move(gen)),
        offsets_(std::move(offsets)),
        members_(std::move(members)),
        residues_(std::move(residues)) {
    for (std::size_t j = 0; j + 1 < offsets_.size(); ++j) R_ = std::max(R_, offsets_[j + 1] - offsets_[j]);
  }

  const IndexSet& index_set() const noexcept { return *index_set_; }
  const std::shared_ptr<const IndexSet>& index_set_ptr() const noexcept { return index_set_; }
  const GeneratingVector& gen() const noexcept { return gen_; }

  std::size_t fiber_count() const noexcept { return offsets_.size() - 1; }
  std::size_t fiber_size(std::size_t j) const { return offsets_[j + 1] - offsets_[j]; }
  std::int64_t residue(std::size_t j) const { return residues_[j]; }

  /// Indices into index_set() of the members of fiber j.
  std::span<const std::size_t> member_indices(std::size_t j) const {
    return std::span<const std::size_t>(members_.data() + offsets_[j], fiber_size(j));
  }
  std::vector<Frequency> members(std::size_t j) const {
    std::vector<Frequency> out;
    for (auto i : member_indices(j)) out.push_back(index_set_->frequency(i));
    return out;
  }
  Frequency representative(std::size_t j) const { return index_set_->frequency(members_[offsets_[j]]); }

  /// Maximal fiber length R.
  std::size_t max_fiber_length() const noexcept { return R_; }

 private:
  std::shared_ptr<const IndexSet> index_set_;
  GeneratingVector gen_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> members_;
  std::vector<std::int64_t> residues_;
  std::size_t R_ = 0;
};

namespace detail {

/// Dense residue table when N is moderate, hash map otherwise.
class ResidueTable {
 public:
  explicit ResidueTable(std::int64_t N) : dense_(N <= 50'000'000) {
    if (dense_) table_.assign(static_cast<std::size_t>(N), kNone);
  }
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t& operator[](std::int64_t r) {
    if (dense_) return table_[static_cast<std::size_t>(r)];
    auto [it, inserted] = map_.try_emplace(r, kNone);
    return it->second;
  }

 private:
  bool dense_;
  std::vector<std::size_t> table_;
  std::unordered_map<std::int64_t, std::size_t> map_;
};

}  // namespace detail

/// Groups the index set by residue k.g mod N.
inline FiberPartition partition_into_fibers(std::shared_ptr<const IndexSet> index_set, const GeneratingVector& gen) {
  if (index_set->d() != gen.d()) throw DomainError("partition_into_fibers: dimension mismatch");
  const std::size_t n = index_set->size();
  std::vector<std::size_t> fiber_of(n);
  std::vector<std::int64_t> residues;
  std::vector<std::size_t> counts;
  detail::ResidueTable lookup(gen.N());
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t r = gen.residue((*index_set)[i]);
    std::size_t& slot = lookup[r];
    if (slot == detail::ResidueTable::kNone) {
      slot = residues.size();
      residues.push_back(r);
      counts.push_back(0);
    }
    fiber_of[i] = slot;
    ++counts[slot];
  }
  std::vector<std::size_t> offsets(residues.size() + 1, 0);
  for (std::size_t j = 0; j < residues.size(); ++j) offsets[j + 1] = offsets[j] + counts[j];
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  std::vector<std::size_t> members(n);
  for (std::size_t i = 0; i < n; ++i) members[cursor[fiber_of[i]]++] = i;
  return FiberPartition(std::move(index_set), gen, std::move(offsets), std::move(members), std::move(residues));
}

inline FiberPartition partition_into_fibers(IndexSet index_set, const GeneratingVector& gen) {
  return partition_into_fibers(std::make_shared<const IndexSet>(std::move(index_set)), gen);
}

/// Maximal fiber length R_{alpha,gamma,N}(g).
inline std::size_t max_fiber_length(const FiberPartition& partition) { return partition.max_fiber_length(); }

/// R without materializing the partition: counts per residue only. `scratch`
/// may be reused across calls with the same N.
inline std::size_t max_fiber_length(const IndexSet& index_set, const GeneratingVector& gen,
                                    std::vector<std::uint32_t>& scratch) {
  scratch.assign(static_cast<std::size_t>(gen.N()), 0);
  std::uint32_t best = 0;
  for (std::size_t i = 0; i < index_set.size(); ++i) {
    best = std::max(best, ++scratch[static_cast<std::size_t>(gen.residue(index_set[i]))]);
  }
  return best;
}

/// Fiber length -> number of fibers of that length.
inline std::map<std::size_t, std::size_t> fiber_length_histogram(const FiberPartition& partition) {
  std::map<std::size_t, std::size_t> h;
  for (std::size_t j = 0; j < partition.fiber_count(); ++j) ++h[partition.fiber_size(j)];
  return h;
}

/// CSV "fiber_length,count".
inline void write_histogram_csv(std::ostream& os, const std::map<std::size_t, std::size_t>& histogram) {
  os << "fiber_length,count\n";
  for (const auto& [len, count] : histogram) os << len << ',' << count << '\n';
}

// ---------------------------------------------------------------- figure of merit

/// True iff no nonzero k in the given index set lies in the dual lattice,
/// i.e. rho(g) > M for the set's threshold M.
inline bool rho_exceeds(const GeneratingVector& gen, const IndexSet& index_set) {
  for (std::size_t i = 0; i < index_set.size(); ++i) {
    const auto k = index_set[i];
    if (std::all_of(k.begin(), k.end(), [](std::int64_t v) { return v == 0; })) continue;
    if (gen.residue(k) == 0) return false;
  }
  return true;
}

/// rho(g) > M, decided by scanning A_{alpha,gamma,M} for a nonzero dual vector.
inline bool rho_exceeds(const GeneratingVector& gen, const KorobovParams& params, double M,
                        std::size_t cap = kDefaultEnumerationCap) {
  if (!(M > 0.0)) throw DomainError("rho_exceeds: M must be positive");
  bool found = false;
  std::size_t count = 0;
  struct Stop {};
  try {
    detail::visit_hyperbolic_cross(params, M, [&](FrequencyView k, double) {
      if (++count > cap) throw ResourceError("rho_exceeds: enumeration cap exceeded");
      if (std::all_of(k.begin(), k.end(), [](std::int64_t v) { return v == 0; })) return;
      if (gen.residue(k) == 0) {
        found = true;
        throw Stop{};
      }
    });
  } catch (const Stop&) {
  }
  return !found;
}

// ---------------------------------------------------------------- P criterion

namespace detail {

/// (-1)^{alpha+1} (2 pi)^{2 alpha} / (2 alpha)! * B_{2 alpha}(x/N) for x = 0..N-1.
/// Uses min(x, N-x) so that values for x and N-x are bitwise equal.
inline std::vector<double> bernoulli_kernel_table(std::int64_t N, int alpha) {
  if (alpha != 1 && alpha != 2) throw UnsupportedAlphaError("worst_case_P: alpha must be 1 or 2");
  const double two_pi_sq = kTwoPi * kTwoPi;
  const double scale = alpha == 1 ? two_pi_sq / 2.0 : -(two_pi_sq * two_pi_sq) / 24.0;
  std::vector<double> table(static_cast<std::size_t>(N));
  for (std::int64_t x = 0; x < N; ++x) {
    const double t = static_cast<double>(std::min(x, N - x)) / static_cast<double>(N);
    table[static_cast<std::size_t>(x)] = scale * (alpha == 1 ? bernoulli2(t) : bernoulli4(t));
  }
  return table;
}

inline int require_cbc_alpha(const KorobovParams& params) {
  const int a = params.integer_alpha();
  if (a != 1 && a != 2) throw UnsupportedAlphaError("worst_case_P: alpha must be 1 or 2");
  return a;
}

/// -1 + (1/N) sum_n prefix[n] * (1 + gamma2 * kernel[n g mod N]), compensated, n ascending.
inline double extend_criterion(std::span<const double> prefix, std::span<const double> kernel, double gamma2,
                               std::int64_t N, std::int64_t g) {
  CompensatedSum acc;
  std::int64_t x = 0;
  for (std::int64_t n = 0; n < N; ++n) {
    acc.add(prefix[static_cast<std::size_t>(n)] * (1.0 + gamma2 * kernel[static_cast<std::size_t>(x)]));
    x += g;
    if (x >= N) x -= N;
  }
  return acc.value() / static_cast<double>(N) - 1.0;
}

}  // namespace detail

/// Squared worst-case integration error P_{alpha,gamma,N}(g) of the lattice
/// rule, through the Bernoulli-polynomial closed form (alpha in {1,2}). O(dN).
inline double worst_case_P(const GeneratingVector& gen, const KorobovParams& params) {
  const int alpha = detail::require_cbc_alpha(params);
  if (gen.d() != params.d()) throw DomainError("worst_case_P: dimension mismatch");
  const std::int64_t N = gen.N();
  const auto kernel = detail::bernoulli_kernel_table(N, alpha);
  std::vector<double> prefix(static_cast<std::size_t>(N), 1.0);
  for (int j = 0; j + 1 < gen.d(); ++j) {
    const double g2 = params.gamma(j) * params.gamma(j);
    std::int64_t x = 0;
    for (std::int64_t n = 0; n < N; ++n) {
      prefix[static_cast<std::size_t>(n)] *= 1.0 + g2 * kernel[static_cast<std::size_t>(x)];
      x += gen.g(static_cast<std::size_t>(j));
      if (x >= N) x -= N;
    }
  }
  const int last = gen.d() - 1;
  return detail::extend_criterion(prefix, kernel, params.gamma(last) * params.gamma(last), N,
                                  gen.g(static_cast<std::size_t>(last)));
}

// ---------------------------------------------------------------- random g

inline constexpr std::size_t kDefaultGRetries = 64;

/// Draws g with i.i.d. uniform coordinates in {1,...,N-1}. With fix_first the
/// first coordinate is pinned to 1 (the (1, g_2, ...) family used in experiments).
inline GeneratingVector sample_random_g(std::int64_t N, int d, Rng& rng, bool fix_first = false) {
  if (N < 3 || !is_prime(static_cast<std::uint64_t>(N))) throw DomainError("sample_random_g: N must be a prime >= 3");
  if (d < 1) throw DomainError("sample_random_g: d must be >= 1");
  std::vector<std::int64_t> g(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) g[static_cast<std::size_t>(j)] = (fix_first && j == 0) ? 1 : rng.uniform_int(1, N - 1);
  return GeneratingVector(N, std::move(g));
}

/// Redraws until rho(g) > M holds, at most max_retries draws.
inline GeneratingVector sample_random_g(std::int64_t N, const KorobovParams& params, Rng& rng, double accept_M,
                                        std::size_t max_retries = kDefaultGRetries, bool fix_first = false) {
  const IndexSet set = enumerate_index_set(params, accept_M);
  for (std::size_t attempt = 1; attempt <= max_retries; ++attempt) {
    auto gen = sample_random_g(N, params.d(), rng, fix_first);
    if (rho_exceeds(gen, set)) return gen;
  }
  throw RetryExhaustedError("sample_random_g: no draw with rho(g) > M", max_retries);
}

/// Total number of function evaluations p = N R S.
constexpr std::int64_t count_total_points(std::int64_t N, std::int64_t R, std::int64_t S) { return N * R * S; }

}  // namespace korolat
