#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "nbmc/errors.hpp"

// Special functions backing the confidence computations: integer-order
// regularized lower incomplete gamma, log-factorial, falling factorials and
// the negative-binomial pmf/cdf. All public entry points take and return
// double; internals run in long double (64-bit mantissa on x86-64) so the
// documented tolerances hold with margin to spare.
namespace nbmc::specfun {

// Hard cap on the number of summed terms in any cdf-style accumulation.
inline constexpr long long kMaxSumTerms = 100'000'000;

namespace detail {

// Compensated (Kahan) accumulation of nonnegative terms.
struct KahanAcc {
  long double sum = 0.0L;
  long double carry = 0.0L;
  void add(long double v) {
    const long double y = v - carry;
    const long double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  long double value() const { return sum; }
};

inline long double log_factorial_ld(long long k) {
  // k <= 20 from the exact integer factorials; lgammal above that.
  static const std::array<long double, 21> table = [] {
    std::array<long double, 21> t{};
    unsigned long long f = 1;
    t[0] = 0.0L;
    for (int i = 1; i <= 20; ++i) {
      f *= static_cast<unsigned long long>(i);
      t[static_cast<std::size_t>(i)] = std::log(static_cast<long double>(f));
    }
    return t;
  }();
  if (k <= 20) return table[static_cast<std::size_t>(k)];
  return std::lgamma(static_cast<long double>(k) + 1.0L);
}

// Regularized lower incomplete gamma for integer order, long double result.
//
// Two regimes around x ~ r:
//   x <  r+1: ascending series  P = x^r e^-x / r! * sum_{n>=0} x^n / prod(r+k)
//             (all terms positive; converges geometrically).
//   x >= r+1: the finite complement identity  Q = e^-x sum_{k<r} x^k / k!,
//             P = 1 - Q. Here Q <= ~0.6 so the subtraction is benign.
inline long double reg_lower_gamma_ld(long long r, long double x) {
  if (x <= 0.0L) return 0.0L;
  const long double rl = static_cast<long double>(r);
  if (x < rl + 1.0L) {
    long double term = 1.0L, series = 1.0L;
    for (long long n = 1; n < 1'000'000; ++n) {
      term *= x / (rl + static_cast<long double>(n));
      series += term;
      if (term < series * 1e-22L) break;
    }
    const long double lp = rl * std::log(x) - x - log_factorial_ld(r);
    const long double p = std::exp(lp) * series;
    return std::clamp(p, 0.0L, 1.0L);
  }
  long double q;
  if (x <= 700.0L) {
    // e^-x is exactly representable here; plain ascending recurrence.
    KahanAcc acc;
    long double term = std::exp(-x);
    for (long long k = 0; k < r; ++k) {
      acc.add(term);
      term *= x / static_cast<long double>(k + 1);
    }
    q = acc.value();
  } else {
    // Large x: start from the biggest term (k = r-1 since x > r) and walk
    // down until the remainder is negligible.
    const long double lt = (rl - 1.0L) * std::log(x) - x - log_factorial_ld(r - 1);
    if (lt < -11300.0L) return 1.0L;  // Q underflows even in long double
    KahanAcc acc;
    long double term = std::exp(lt);
    for (long long k = r - 1; k >= 0; --k) {
      acc.add(term);
      if (term < acc.value() * 1e-22L) break;
      term *= static_cast<long double>(k) / x;
    }
    q = acc.value();
  }
  return std::clamp(1.0L - q, 0.0L, 1.0L);
}

}  // namespace detail

// ln(k!), exact table for k <= 20.
inline double log_factorial(long long k) {
  if (k < 0) throw std::invalid_argument("log_factorial: k must be >= 0");
  return static_cast<double>(detail::log_factorial_ld(k));
}

// Regularized lower incomplete gamma gamma(r, x) for integer order r >= 1.
inline double reg_lower_incomplete_gamma(long long r, double x) {
  if (r < 1) throw std::invalid_argument("reg_lower_incomplete_gamma: r must be >= 1");
  if (!(x >= 0.0) || !std::isfinite(x))
    throw std::invalid_argument("reg_lower_incomplete_gamma: x must be finite and >= 0");
  return static_cast<double>(detail::reg_lower_gamma_ld(r, static_cast<long double>(x)));
}

// ln(k^(i)) = ln(k (k-1) ... (k-i+1)); k^(0) = 1.
inline double falling_factorial_log(double k, long long i) {
  if (i < 0) throw std::invalid_argument("falling_factorial_log: i must be >= 0");
  if (k < 0.0) throw std::invalid_argument("falling_factorial_log: k must be >= 0");
  if (i == 0) return 0.0;
  if (!(k - static_cast<double>(i) + 1.0 > 0.0))
    throw std::invalid_argument("falling_factorial_log: nonpositive factor (need k - i + 1 > 0)");
  detail::KahanAcc acc;
  const long double kl = static_cast<long double>(k);
  for (long long t = 0; t < i; ++t)
    acc.add(std::log(kl - static_cast<long double>(t)));
  return static_cast<double>(acc.value());
}

// ln Pr[n trials to reach the N-th success], success probability p:
//   N ln p + (n-N) ln(1-p) + ln((n-1)^(N-1)) - ln((N-1)!)
inline double negbin_log_pmf(long long n, long long N, double p) {
  if (N < 1) throw std::invalid_argument("negbin_log_pmf: N must be >= 1");
  if (n < N) throw std::invalid_argument("negbin_log_pmf: n must be >= N");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("negbin_log_pmf: p must be in (0,1)");
  const long double lp = std::log(static_cast<long double>(p));
  const long double l1p = std::log1p(static_cast<long double>(-p));
  const long double ff =
      (N == 1) ? 0.0L
               : static_cast<long double>(falling_factorial_log(static_cast<double>(n - 1), N - 1));
  return static_cast<double>(static_cast<long double>(N) * lp +
                             static_cast<long double>(n - N) * l1p + ff -
                             detail::log_factorial_ld(N - 1));
}

namespace detail {

// Ascending walk over negative-binomial pmf terms from n = N to n = end,
// splitting the accumulated mass at n = split. Terms are tracked against a
// power-of-two scale exponent so a deeply subnormal prefix (tiny p^N) and a
// later O(1) mode coexist; a geometric tail bound cuts the walk short far
// past the mode.
struct NegbinSplitSums {
  long double below = 0.0L;  // sum of Pr[n] for N <= n < split
  long double at_or_above = 0.0L;  // sum for split <= n <= end
};

inline NegbinSplitSums negbin_split_sums(long long N, double p, long long split, long long end) {
  const long double q = 1.0L - static_cast<long double>(p);
  const long double lstart = static_cast<long double>(N) * std::log(static_cast<long double>(p));
  int scale = 0;  // true value = accumulator * 2^scale
  long double term;
  if (lstart < -11000.0L) {
    const int drop = static_cast<int>(-lstart / 0.6931471805599453L) - 64;
    scale = -drop;
    term = std::exp(lstart + static_cast<long double>(drop) * 0.6931471805599453L);
  } else {
    term = std::exp(lstart);
  }
  KahanAcc lo, hi;
  for (long long n = N; n <= end; ++n) {
    (n < split ? lo : hi).add(term);
    if (n == end) break;
    const long double ratio =
        q * static_cast<long double>(n) / static_cast<long double>(n - N + 1);
    term *= ratio;
    const long double total = lo.value() + hi.value();
    if (ratio < 1.0L && term / (1.0L - ratio) < total * 1e-22L) break;
    if (term < 1e-2400L && total < 1e-2400L) {
      for (long double* v : {&term, &lo.sum, &lo.carry, &hi.sum, &hi.carry})
        *v = std::ldexp(*v, 8192);
      scale -= 8192;
    } else if (term > 1e2400L) {
      for (long double* v : {&term, &lo.sum, &lo.carry, &hi.sum, &hi.carry})
        *v = std::ldexp(*v, -8192);
      scale += 8192;
    }
  }
  NegbinSplitSums out;
  out.below = std::clamp(std::ldexp(lo.value(), scale), 0.0L, 1.0L);
  out.at_or_above = std::clamp(std::ldexp(hi.value(), scale), 0.0L, 1.0L);
  return out;
}

}  // namespace detail

// Pr[n <= k] for the trial count above; compensated ascending summation.
inline double negbin_cdf(long long k, long long N, double p) {
  if (N < 1) throw std::invalid_argument("negbin_cdf: N must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("negbin_cdf: p must be in (0,1)");
  if (k < N) return 0.0;
  if (k - N + 1 > kMaxSumTerms)
    throw term_cap_error("negbin_cdf: sum of " + std::to_string(k - N + 1) +
                         " terms exceeds the " + std::to_string(kMaxSumTerms) + "-term cap");
  const auto sums = detail::negbin_split_sums(N, p, k + 1, k);
  return static_cast<double>(std::clamp(sums.below, 0.0L, 1.0L));
}

}  // namespace nbmc::specfun
