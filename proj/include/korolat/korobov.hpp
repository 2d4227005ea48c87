#pragma once

// Weighted Korobov space machinery: the decay function r_{alpha,gamma},
// hyperbolic-cross index sets A = {k : r(k) < M}, their size bounds and the
// rules for picking the truncation threshold M.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "korolat/errors.hpp"
#include "korolat/math.hpp"

namespace korolat {

/// Integer frequency vector k in Z^d. std::vector gives the lexicographic
/// total order used for canonical index sets.
using Frequency = std::vector<std::int64_t>;
using FrequencyView = std::span<const std::int64_t>;

struct FrequencyHash {
  std::size_t operator()(FrequencyView k) const noexcept {
    std::uint64_t h = 0x84222325CBF29CE4ULL;
    for (auto v : k) h = splitmix_mix(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
  std::size_t operator()(const Frequency& k) const noexcept { return (*this)(FrequencyView(k)); }

 private:
  static std::uint64_t splitmix_mix(std::uint64_t x) noexcept {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }
};

/// Dimension, smoothness and product weights of a weighted Korobov space.
class KorobovParams {
 public:
  KorobovParams(int d, double alpha, std::vector<double> gamma)
      : d_(d), alpha_(alpha), gamma_(std::move(gamma)) {
    if (d_ < 1) throw DomainError("KorobovParams: d must be >= 1");
    if (!(alpha_ > 0.5)) throw DomainError("KorobovParams: alpha must be > 1/2");
    if (gamma_.size() != static_cast<std::size_t>(d_))
      throw DomainError("KorobovParams: gamma must have d entries");
    for (double g : gamma_)
      if (!(g > 0.0) || !std::isfinite(g)) throw DomainError("KorobovParams: weights must be positive");
    const double rounded = std::round(alpha_);
    integer_alpha_ = (rounded == alpha_ && alpha_ <= 16.0) ? static_cast<int>(rounded) : 0;
  }

  /// All weights equal to one.
  static KorobovParams unweighted(int d, double alpha) {
    return KorobovParams(d, alpha, std::vector<double>(static_cast<std::size_t>(std::max(d, 0)), 1.0));
  }

  int d() const noexcept { return d_; }
  double alpha() const noexcept { return alpha_; }
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  double gamma(int j) const { return gamma_[static_cast<std::size_t>(j)]; }

  /// Positive integer value of alpha, or 0 if alpha is not an integer.
  int integer_alpha() const noexcept { return integer_alpha_; }

  /// True iff every weight lies in (0, 1]; the fiber-length bounds need it.
  bool weights_le_one() const noexcept {
    return std::all_of(gamma_.begin(), gamma_.end(), [](double g) { return g <= 1.0; });
  }

  /// One-dimensional factor |k|^alpha / gamma_j for k != 0.
  double axis_factor(int j, std::uint64_t abs_k) const noexcept {
    double p;
    if (integer_alpha_ > 0) {
      // repeated multiplication is exact while |k|^alpha < 2^53
      const double b = static_cast<double>(abs_k);
      p = b;
      for (int i = 1; i < integer_alpha_; ++i) p *= b;
    } else {
      p = std::pow(static_cast<double>(abs_k), alpha_);
    }
    const double g = gamma_[static_cast<std::size_t>(j)];
    return g == 1.0 ? p : p / g;
  }

  friend bool operator==(const KorobovParams&, const KorobovParams&) = default;

 private:
  int d_;
  double alpha_;
  std::vector<double> gamma_;
  int integer_alpha_ = 0;
};

/// r_{alpha,gamma}(k) = prod_{j : k_j != 0} |k_j|^alpha / gamma_j (1 for k = 0).
/// Factors are multiplied in coordinate order; enumeration uses the same order,
/// so membership r(k) < M is decided identically everywhere.
inline double r_value(const KorobovParams& params, FrequencyView k) {
  double r = 1.0;
  for (int j = 0; j < params.d(); ++j) {
    const std::int64_t kj = k[static_cast<std::size_t>(j)];
    if (kj != 0) r *= params.axis_factor(j, static_cast<std::uint64_t>(kj < 0 ? -kj : kj));
  }
  return r;
}

inline double r_value(const KorobovParams& params, const Frequency& k) {
  return r_value(params, FrequencyView(k));
}

inline constexpr std::size_t kDefaultEnumerationCap = 20'000'000;

/// Hyperbolic cross A_{alpha,gamma,M}, stored flat in lexicographic order.
class IndexSet {
 public:
  IndexSet(KorobovParams params, double M, std::vector<std::int64_t> flat)
      : params_(std::move(params)), M_(M), flat_(std::move(flat)) {
    if (flat_.size() % static_cast<std::size_t>(params_.d()) != 0)
      throw DomainError("IndexSet: flat storage is not a multiple of d");
  }

  const KorobovParams& params() const noexcept { return params_; }
  int d() const noexcept { return params_.d(); }
  double M() const noexcept { return M_; }
  std::size_t size() const noexcept { return flat_.size() / static_cast<std::size_t>(params_.d()); }
  bool empty() const noexcept { return flat_.empty(); }

  FrequencyView operator[](std::size_t i) const {
    const auto d = static_cast<std::size_t>(params_.d());
    return FrequencyView(flat_.data() + i * d, d);
  }
  Frequency frequency(std::size_t i) const {
    auto v = (*this)[i];
    return Frequency(v.begin(), v.end());
  }
  std::span<const std::int64_t> flat() const noexcept { return flat_; }

  /// Position of k in the canonical order, or size() if absent.
  std::size_t find(FrequencyView k) const {
    std::size_t lo = 0;
    std::size_t hi = size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto v = (*this)[mid];
      if (std::lexicographical_compare(v.begin(), v.end(), k.begin(), k.end())) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo < size()) {
      const auto v = (*this)[lo];
      if (std::equal(v.begin(), v.end(), k.begin(), k.end())) return lo;
    }
    return size();
  }
  bool contains(FrequencyView k) const { return find(k) != size(); }
  bool contains(const Frequency& k) const { return contains(FrequencyView(k)); }

 private:
  KorobovParams params_;
  double M_;
  std::vector<std::int64_t> flat_;
};

namespace detail {

/// Visits every k with r(k) < M in lexicographic order as visit(k, r(k)).
/// Coordinate j may take value k_j only if prefix * factor(k_j) * suffix_floor_j < M,
/// where suffix_floor_j is the smallest possible product of the later factors.
template <class Visitor>
void visit_hyperbolic_cross(const KorobovParams& params, double M, Visitor&& visit) {
  const int d = params.d();
  std::vector<double> suffix_floor(static_cast<std::size_t>(d) + 1, 1.0);
  for (int j = d - 1; j >= 0; --j) {
    const double smallest = std::min(1.0, params.axis_factor(j, 1));
    suffix_floor[static_cast<std::size_t>(j)] = suffix_floor[static_cast<std::size_t>(j) + 1] * smallest;
  }
  // pruning is a superset test; slack keeps it from ever excluding a member
  const double prune = M * (1.0 + 1e-12);
  Frequency k(static_cast<std::size_t>(d), 0);

  std::function<void(int, double)> rec = [&](int j, double prefix) {
    const auto uj = static_cast<std::size_t>(j);
    const double floor_rest = suffix_floor[uj + 1];
    if (!(prefix * floor_rest < prune)) return;
    std::uint64_t kmax = 0;
    while (prefix * params.axis_factor(j, kmax + 1) * floor_rest < prune) ++kmax;
    for (std::int64_t v = -static_cast<std::int64_t>(kmax); v <= static_cast<std::int64_t>(kmax); ++v) {
      k[uj] = v;
      const double next = v == 0 ? prefix : prefix * params.axis_factor(j, static_cast<std::uint64_t>(v < 0 ? -v : v));
      if (j + 1 == d) {
        if (next < M) visit(FrequencyView(k), next);
      } else {
        rec(j + 1, next);
      }
    }
    k[uj] = 0;
  };
  rec(0, 1.0);
}

}  // namespace detail

/// Enumerates A_{alpha,gamma,M} = {k : r(k) < M} (strict) in lexicographic order.
/// Throws ResourceError when the set would exceed `cap` entries.
inline IndexSet enumerate_index_set(const KorobovParams& params, double M,
                                    std::size_t cap = kDefaultEnumerationCap) {
  if (!(M > 0.0)) throw DomainError("enumerate_index_set: M must be positive");
  std::vector<std::int64_t> flat;
  std::size_t count = 0;
  detail::visit_hyperbolic_cross(params, M, [&](FrequencyView k, double) {
    if (++count > cap)
      throw ResourceError("enumerate_index_set: more than " + std::to_string(cap) + " frequencies");
    flat.insert(flat.end(), k.begin(), k.end());
  });
  return IndexSet(params, M, std::move(flat));
}

/// M^lambda * prod_j (1 + 2 gamma_j^lambda zeta(alpha lambda)), an upper bound
/// on |A_{alpha,gamma,M}| valid for every lambda > 1/alpha.
inline double cardinality_bound(const KorobovParams& params, double M, double lambda) {
  const double s = params.alpha() * lambda;
  if (!(s > 1.0)) throw DomainError("cardinality_bound: requires alpha * lambda > 1");
  const double z = riemann_zeta(s);
  double prod = 1.0;
  for (double g : params.gamma()) prod *= 1.0 + 2.0 * std::pow(g, lambda) * z;
  return std::pow(M, lambda) * prod;
}

/// Rule for choosing the truncation threshold M from the lattice size N.
struct MRule {
  enum class Kind { InfimumCard, ClosedFormDelta, ClosedFormHalf };
  Kind kind = Kind::InfimumCard;
  double delta = 0.5;

  static MRule infimum_card() { return {Kind::InfimumCard, 0.0}; }
  static MRule closed_form_delta(double delta) { return {Kind::ClosedFormDelta, delta}; }
  static MRule closed_form_half() { return {Kind::ClosedFormHalf, 0.0}; }
};

/// Upper end of the lambda range searched by the closed-form rules. The
/// lower end is 1/alpha (open). The range (1/alpha, 2] keeps both the
/// cardinality bound (any lambda > 1/alpha) and the CBC figure-of-merit bound
/// (lambda <= 2) valid, and is non-empty for alpha = 1.
inline constexpr double kClosedFormLambdaMax = 2.0;

/// (budget * prod_j (1 + 2 gamma_j^lambda zeta(alpha lambda))^{-1})^{1/lambda}.
inline double closed_form_objective(const KorobovParams& params, double budget, double lambda) {
  const double s = params.alpha() * lambda;
  if (!(s > 1.0)) return 0.0;
  const double z = riemann_zeta(s);
  double log_prod = 0.0;
  for (double g : params.gamma()) log_prod += std::log1p(2.0 * std::pow(g, lambda) * z);
  return std::exp((std::log(budget) - log_prod) / lambda);
}

/// Largest M with |A_{alpha,gamma,M}| <= target. This is the smallest r-value
/// v such that #{k : r(k) <= v} > target, so that |A_v| <= target < |A_{v+eps}|.
inline double infimum_card_M(const KorobovParams& params, std::size_t target,
                             std::size_t cap = kDefaultEnumerationCap) {
  if (target >= cap) throw ResourceError("choose_M: target cardinality exceeds enumeration cap");
  double probe = 2.0;
  for (;;) {
    std::vector<double> rs;
    std::size_t count = 0;
    bool overflow = false;
    try {
      detail::visit_hyperbolic_cross(params, probe, [&](FrequencyView, double r) {
        if (++count > cap) throw ResourceError("cap");
        rs.push_back(r);
      });
    } catch (const ResourceError&) {
      overflow = true;
    }
    if (overflow) throw ResourceError("choose_M: enumeration cap exceeded while bracketing M");
    if (rs.size() > target) {
      std::nth_element(rs.begin(), rs.begin() + static_cast<std::ptrdiff_t>(target), rs.end());
      return rs[target];
    }
    probe *= 2.0;
  }
}

/// Chooses M from the lattice size N.
///  - InfimumCard: largest M with |A_M| <= N.
///  - ClosedFormDelta: sup_lambda of the objective with budget (N-1)(1-delta).
///  - ClosedFormHalf: sup_lambda of the objective with budget N/2.
inline double choose_M(const KorobovParams& params, std::int64_t N, MRule rule,
                       std::size_t cap = kDefaultEnumerationCap) {
  if (N < 1) throw DomainError("choose_M: N must be positive");
  double M = 0.0;
  switch (rule.kind) {
    case MRule::Kind::InfimumCard:
      M = infimum_card_M(params, static_cast<std::size_t>(N), cap);
      break;
    case MRule::Kind::ClosedFormDelta:
    case MRule::Kind::ClosedFormHalf: {
      if (N < 3) throw DomainError("choose_M: closed forms need N >= 3");
      double budget;
      if (rule.kind == MRule::Kind::ClosedFormDelta) {
        if (!(rule.delta > 0.0 && rule.delta < 1.0)) throw DomainError("choose_M: delta must lie in (0,1)");
        budget = static_cast<double>(N - 1) * (1.0 - rule.delta);
      } else {
        budget = static_cast<double>(N) / 2.0;
      }
      const double lo = 1.0 / params.alpha();
      const double start = lo + 1e-6 * (kClosedFormLambdaMax - lo);
      M = maximize_scalar([&](double lam) { return closed_form_objective(params, budget, lam); }, start,
                          kClosedFormLambdaMax)
              .second;
      break;
    }
  }
  if (!(M > 0.0)) throw DomainError("choose_M: resulting M is not positive");
  return M;
}

/// Bound on sum_{k not in A} r(k)^{-2}:
/// (gamma_1 M)^{-(1/q - 1)/alpha} * q/(1-q) * prod_j (1 + 2 gamma_j^q zeta(2 alpha q))^{1/q}.
/// Valid for alpha > 1, q in (1/(2 alpha), 1), M >= 1.
inline double tail_sum_bound(const KorobovParams& params, double M, double q) {
  const double alpha = params.alpha();
  if (!(alpha > 1.0)) throw DomainError("tail_sum_bound: requires alpha > 1");
  if (!(q > 1.0 / (2.0 * alpha) && q < 1.0)) throw DomainError("tail_sum_bound: q outside (1/(2 alpha), 1)");
  if (!(M >= 1.0)) throw DomainError("tail_sum_bound: requires M >= 1");
  const double z = riemann_zeta(2.0 * alpha * q);
  double log_prod = 0.0;
  for (double g : params.gamma()) log_prod += std::log1p(2.0 * std::pow(g, q) * z);
  const double lead = -(1.0 / q - 1.0) / alpha * std::log(params.gamma(0) * M);
  return std::exp(lead + log_prod / q) * q / (1.0 - q);
}

/// Exact sum_{k not in A_M} r(k)^{-2}, from the closed-form total
/// prod_j (1 + 2 gamma_j^2 zeta(2 alpha)) minus the enumerated part.
inline double exact_tail_sum(const KorobovParams& params, double M, std::size_t cap = kDefaultEnumerationCap) {
  const double z = riemann_zeta(2.0 * params.alpha());
  double total = 1.0;
  for (double g : params.gamma()) total *= 1.0 + 2.0 * g * g * z;
  CompensatedSum inside;
  std::size_t count = 0;
  detail::visit_hyperbolic_cross(params, M, [&](FrequencyView, double r) {
    if (++count > cap) throw ResourceError("exact_tail_sum: enumeration cap exceeded");
    inside.add(1.0 / (r * r));
  });
  return std::max(0.0, total - inside.value());
}

/// Korobov norm (sum_k |c_k|^2 r(k)^2)^{1/2} of a finitely supported coefficient map.
inline double korobov_norm(const KorobovParams& params, const std::map<Frequency, std::complex<double>>& coefficients) {
  CompensatedSum acc;
  for (const auto& [k, c] : coefficients) {
    const double r = r_value(params, k);
    acc.add(std::norm(c) * r * r);
  }
  return std::sqrt(acc.value());
}

inline double korobov_norm(const IndexSet& support, std::span<const std::complex<double>> coefficients) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double r = r_value(support.params(), support[i]);
    acc.add(std::norm(coefficients[i]) * r * r);
  }
  return std::sqrt(acc.value());
}

// Text format: header "d alpha M count", then one frequency per line.

inline void write_index_set(std::ostream& os, const IndexSet& set) {
  os << set.d() << ' ' << std::setprecision(17) << set.params().alpha() << ' ' << set.M() << ' ' << set.size()
     << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto k = set[i];
    for (std::size_t j = 0; j < k.size(); ++j) os << (j ? " " : "") << k[j];
    os << '\n';
  }
}

/// Reads an index set written by write_index_set. The weights are not part
/// of the format, so the caller supplies the parameters; d and alpha must match.
inline IndexSet read_index_set(std::istream& is, const KorobovParams& params) {
  int d = 0;
  double alpha = 0.0;
  double M = 0.0;
  std::size_t count = 0;
  if (!(is >> d >> alpha >> M >> count)) throw Error("read_index_set: malformed header");
  if (d != params.d() || alpha != params.alpha()) throw Error("read_index_set: header does not match parameters");
  std::vector<std::int64_t> flat(count * static_cast<std::size_t>(d));
  for (auto& v : flat)
    if (!(is >> v)) throw Error("read_index_set: truncated body");
  return IndexSet(params, M, std::move(flat));
}

}  // namespace korolat
