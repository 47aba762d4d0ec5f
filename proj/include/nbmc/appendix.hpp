#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "nbmc/errors.hpp"
#include "nbmc/specfun.hpp"

// Numerical certification of the appendix results behind the mu1 condition:
// the integral-vs-sum inequality (checked over its full stated range) and the
// nonnegativity of the series coefficients x_j and x'_j on their intervals.
namespace nbmc::appendix {

// Margins are measured relative to the scale of the quantities involved;
// anything above -1e-12 counts as holding (the slack absorbs rounding only,
// the true margins are nonnegative).
inline constexpr double kVerifyTolerance = 1e-12;

// A lemma range larger than this many points is spot-checked instead of
// swept point by point; see lemma1_check for the (deterministic) policy.
inline constexpr long long kLemmaExhaustiveLimit = 100'000;

struct LemmaReport {
  long long N = 0;
  double p = 0.0;
  long long n_star_max = 0;
  long long points_checked = 0;
  double worst_relative_margin = std::numeric_limits<double>::infinity();
  bool all_hold = true;
  bool subsampled = false;
  std::string policy = "exhaustive";
};

enum class CoefficientFamily { x, x_prime };

struct SweepWorstPoint {
  CoefficientFamily family = CoefficientFamily::x;
  long long N = 0;
  long long j = 0;
  double nu = 0.0;
  double value = 0.0;
};

struct SweepReport {
  long long points_checked = 0;
  double worst_normalized_margin = std::numeric_limits<double>::infinity();
  bool all_nonnegative = true;
  SweepWorstPoint worst;
};

namespace detail {

// Fixed-width 512-bit unsigned integer: just enough exact arithmetic for the
// power sums sum t^(j+1) with t < 2000 and j+1 <= 40 (< 2^450).
struct U512 {
  std::array<std::uint64_t, 8> w{};

  void add(const U512& o) {
    unsigned __int128 carry = 0;
    for (int i = 0; i < 8; ++i) {
      carry += static_cast<unsigned __int128>(w[i]) + o.w[i];
      w[i] = static_cast<std::uint64_t>(carry);
      carry >>= 64;
    }
  }
  void mul_small(std::uint64_t m) {
    unsigned __int128 carry = 0;
    for (int i = 0; i < 8; ++i) {
      carry += static_cast<unsigned __int128>(w[i]) * m;
      w[i] = static_cast<std::uint64_t>(carry);
      carry >>= 64;
    }
  }
  long double to_long_double() const {
    long double v = 0.0L;
    for (int i = 7; i >= 0; --i) v = std::ldexp(v, 64) + static_cast<long double>(w[i]);
    return v;
  }
};

inline U512 upow(std::uint64_t base, int exp) {
  U512 r;
  r.w[0] = 1;
  for (int e = 0; e < exp; ++e) r.mul_small(base);
  return r;
}

// sum_{i=1}^{N-1} (i-1)^(j+1), exactly.
inline long double power_sum_int(long long N, int j_plus_1) {
  U512 acc;
  for (long long t = 1; t <= N - 2; ++t)
    acc.add(upow(static_cast<std::uint64_t>(t), j_plus_1));
  return acc.to_long_double();
}

// sum_{i=1}^{N-1} (i-1/2)^(j+1): the half-integers are scaled by 2 so the
// accumulation stays in exact integers, then the 2^(j+1) comes back off.
inline long double power_sum_half(long long N, int j_plus_1) {
  U512 acc;
  for (long long i = 1; i <= N - 1; ++i)
    acc.add(upow(static_cast<std::uint64_t>(2 * i - 1), j_plus_1));
  return std::ldexp(acc.to_long_double(), -j_plus_1);
}

inline void require_coefficient_args(long long N, double nu, long long j) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(nu > 0.0)) throw std::invalid_argument("nu must be > 0");
  if (j < 0) throw std::invalid_argument("j must be >= 0");
  if (j + 1 > 40)
    throw std::invalid_argument("j+1 > 40 exceeds the exact power-sum range");
}

// x_j = S / ((j+1) nu^(j+1)) + nu/(j+2) - M/(j+1), with the power sum S and
// the shift M supplied by the two families.
inline long double coefficient_from_power_sum(long double power_sum, long double big_m,
                                              long double nu, long long j) {
  const long double jp1 = static_cast<long double>(j + 1);
  const long double first = power_sum / (jp1 * std::pow(nu, jp1));
  return first + nu / static_cast<long double>(j + 2) - big_m / jp1;
}

// Magnitude of the dominant term, used to normalize sweep margins.
inline long double coefficient_scale(long double power_sum, long double big_m, long double nu,
                                     long long j) {
  const long double jp1 = static_cast<long double>(j + 1);
  const long double first = power_sum / (jp1 * std::pow(nu, jp1));
  return std::max({first, nu / static_cast<long double>(j + 2), big_m / jp1, 1e-30L});
}

}  // namespace detail

// Series coefficient x_j at nu = (n-1)p, with M = N-1.
inline double coefficient_x(long long N, double nu, long long j) {
  detail::require_coefficient_args(N, nu, j);
  const long double s = detail::power_sum_int(N, static_cast<int>(j + 1));
  return static_cast<double>(detail::coefficient_from_power_sum(
      s, static_cast<long double>(N - 1), static_cast<long double>(nu), j));
}

// Series coefficient x'_j at nu' = (n-1/2)p, with M' = N-1/2.
inline double coefficient_x_prime(long long N, double nu_prime, long long j) {
  detail::require_coefficient_args(N, nu_prime, j);
  const long double s = detail::power_sum_half(N, static_cast<int>(j + 1));
  return static_cast<double>(detail::coefficient_from_power_sum(
      s, static_cast<long double>(N) - 0.5L, static_cast<long double>(nu_prime), j));
}

// Exact log-ratio definition of x (the quantity the x_j series expands):
//   x = -(1/p) sum_{i=1}^{N-1} ln(1 - (i-1)p/nu) - (1/p)(nu/p - M) ln(1-p) - nu/p
// with nu = (n-1)p and M = N-1.
inline double direct_x(long long N, double p, long long n) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  if (n < N) throw std::invalid_argument("direct_x: n must be >= N");
  const long double pl = static_cast<long double>(p);
  const long double nu = static_cast<long double>(n - 1) * pl;
  const long double big_m = static_cast<long double>(N - 1);
  specfun::detail::KahanAcc logs;
  for (long long i = 1; i <= N - 1; ++i) {
    const long double arg = static_cast<long double>(i - 1) * pl / nu;
    if (!(arg < 1.0L)) throw std::invalid_argument("direct_x: nonpositive log argument");
    logs.add(-std::log1p(-arg));
  }
  const long double x = logs.value() / pl -
                        (nu / pl - big_m) * std::log1p(-pl) / pl - nu / pl;
  return static_cast<double>(x);
}

// Left side of the appendix inequality in closed form,
//   integral_{N-1}^{n*} t^(N-1) e^{-pt} dt
//     = (N-1)!/p^N * [gamma(N, p n*) - gamma(N, p(N-1))].
// n* = N-1 gives the empty integral.
inline double lemma1_lhs(long long N, double p, long long n_star) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  if (n_star < N - 1) throw std::invalid_argument("lemma1_lhs: n_star must be >= N-1");
  if (n_star == N - 1) return 0.0;
  const long double pl = static_cast<long double>(p);
  const long double hi = specfun::detail::reg_lower_gamma_ld(N, pl * static_cast<long double>(n_star));
  const long double lo = specfun::detail::reg_lower_gamma_ld(N, pl * static_cast<long double>(N - 1));
  const long double lpref =
      specfun::detail::log_factorial_ld(N - 1) - static_cast<long double>(N) * std::log(pl);
  return static_cast<double>(std::exp(lpref) * (hi - lo));
}

// Right side: sum_{n=N}^{n*} (n-1)^(N-1 falling) (1-p)^(n-N), i.e. the
// c1-style sum without its p^N/(N-1)! prefactor. Empty (0) for n* < N.
inline double lemma1_rhs(long long N, double p, long long n_star) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  if (n_star < N) return 0.0;
  if (n_star - N + 1 > specfun::kMaxSumTerms)
    throw term_cap_error("lemma1_rhs: sum exceeds the term cap");
  const long double q = 1.0L - static_cast<long double>(p);
  specfun::detail::KahanAcc acc;
  // First term is (N-1)^(N-1 falling) = (N-1)!, then the usual ratio.
  long double term = std::exp(specfun::detail::log_factorial_ld(N - 1));
  for (long long n = N; n <= n_star; ++n) {
    acc.add(term);
    term *= q * static_cast<long double>(n) / static_cast<long double>(n - N + 1);
  }
  return static_cast<double>(acc.value());
}

// Checks lhs >= rhs for every admissible n*, i.e. all n* in [N, n_star_max]
// with n_star_max = floor((N - 1/2 - sqrt(N - 1/2))/p + 1/2). The comparison
// runs on the normalized scale (both sides times p^N/(N-1)!, so values lie
// in [0,1]); the margin is relative to the left side. For ranges beyond
// kLemmaExhaustiveLimit points the comparison set is subsampled
// deterministically: every n* up to N+1000, then geometric spacing (ratio
// 257/256), always including n_star_max.
inline LemmaReport lemma1_check(long long N, double p) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  const double nd = static_cast<double>(N);
  const double raw = (nd - 0.5 - std::sqrt(nd - 0.5)) / p + 0.5;

  LemmaReport rep;
  rep.N = N;
  rep.p = p;
  if (raw > 9.0e18) throw term_cap_error("lemma1_check: range exceeds the term cap");
  rep.n_star_max = static_cast<long long>(std::floor(raw));
  if (rep.n_star_max < N) return rep;  // vacuous: no admissible n*
  if (rep.n_star_max - N + 1 > specfun::kMaxSumTerms)
    throw term_cap_error("lemma1_check: range exceeds the term cap");

  const bool exhaustive = rep.n_star_max - N + 1 <= kLemmaExhaustiveLimit;
  if (!exhaustive) {
    rep.subsampled = true;
    rep.policy = "subsampled: all n* <= N+1000, then geometric ratio 257/256, endpoint included";
  }
  long long next_check = N;

  const long double pl = static_cast<long double>(p);
  const long double gamma_lo =
      specfun::detail::reg_lower_gamma_ld(N, pl * static_cast<long double>(N - 1));
  const long double q = 1.0L - pl;
  long double rhs_norm = 0.0L;  // running sum of pmf terms = rhs * p^N/(N-1)!
  long double term = std::exp(static_cast<long double>(N) * std::log(pl));
  specfun::detail::KahanAcc acc;
  for (long long n = N; n <= rep.n_star_max; ++n) {
    acc.add(term);
    rhs_norm = acc.value();
    if (n == rep.n_star_max || n == next_check) {
      const long double lhs_norm =
          specfun::detail::reg_lower_gamma_ld(N, pl * static_cast<long double>(n)) - gamma_lo;
      const long double margin =
          (lhs_norm - rhs_norm) / std::max(lhs_norm, 1e-300L);
      rep.worst_relative_margin =
          std::min(rep.worst_relative_margin, static_cast<double>(margin));
      ++rep.points_checked;
      if (n == next_check) {
        if (exhaustive || next_check < N + 1000)
          ++next_check;
        else
          next_check += std::max<long long>(1, next_check / 256);
        next_check = std::min(next_check, rep.n_star_max);
      }
    }
    term *= q * static_cast<long double>(n) / static_cast<long double>(n - N + 1);
  }
  rep.all_hold = rep.worst_relative_margin >= -kVerifyTolerance;
  return rep;
}

// Sweeps x_j (over (0, M - sqrt(M)]) and x'_j (over (0, M' - sqrt(M')]) for
// nonnegativity on uniform nu grids. Margins are normalized by the largest
// term of the formula so the tolerance means the same thing at every point.
inline SweepReport coefficients_nonnegative_sweep(long long N_min, long long N_max,
                                                  long long j_max, long long grid_density) {
  if (N_min < 3 || N_max > 1000 || N_min > N_max)
    throw std::invalid_argument("N range must lie within [3, 1000]");
  if (j_max < 0 || j_max > 39) throw std::invalid_argument("j_max must be in [0, 39]");
  if (grid_density < 1) throw std::invalid_argument("grid_density must be >= 1");

  SweepReport rep;
  for (long long N = N_min; N <= N_max; ++N) {
    for (const auto family : {CoefficientFamily::x, CoefficientFamily::x_prime}) {
      const long double big_m = (family == CoefficientFamily::x)
                                    ? static_cast<long double>(N - 1)
                                    : static_cast<long double>(N) - 0.5L;
      const long double nu_hi = big_m - std::sqrt(big_m);
      for (long long j = 0; j <= j_max; ++j) {
        const long double s = (family == CoefficientFamily::x)
                                  ? detail::power_sum_int(N, static_cast<int>(j + 1))
                                  : detail::power_sum_half(N, static_cast<int>(j + 1));
        for (long long g = 1; g <= grid_density; ++g) {
          const long double nu =
              nu_hi * static_cast<long double>(g) / static_cast<long double>(grid_density);
          const long double value = detail::coefficient_from_power_sum(s, big_m, nu, j);
          const long double scale = detail::coefficient_scale(s, big_m, nu, j);
          const double margin = static_cast<double>(value / scale);
          ++rep.points_checked;
          if (margin < rep.worst_normalized_margin) {
            rep.worst_normalized_margin = margin;
            rep.worst = SweepWorstPoint{family, N, j, static_cast<double>(nu),
                                        static_cast<double>(value)};
          }
        }
      }
    }
  }
  rep.all_nonnegative = rep.worst_normalized_margin >= -kVerifyTolerance;
  return rep;
}

}  // namespace nbmc::appendix
