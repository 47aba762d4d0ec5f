#pragma once

// Test-only oracles, kept independent of the library code paths they check:
//  - adaptive Simpson quadrature for the incomplete-gamma integral and the
//    appendix integrand (with a log offset so large magnitudes stay finite),
//  - exact rational negative-binomial mass/cdf/window sums built on GMP,
//  - chi-square critical values for the goodness-of-fit test.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

// ---- quadrature ----

// Composite Simpson refined by panel doubling until two consecutive
// refinements agree to rel_tol. The integrands here (gamma-type densities)
// are smooth and unimodal, so the h^4 convergence makes the plain composite
// rule a simple and reliable oracle.
inline double composite_simpson(const std::function<double(double)>& f, double a, double b,
                                long long panels) {
  const double h = (b - a) / static_cast<double>(panels);
  long double odd = 0.0L, even = 0.0L;
  for (long long i = 1; i < panels; i += 2) odd += f(a + h * static_cast<double>(i));
  for (long long i = 2; i < panels; i += 2) even += f(a + h * static_cast<double>(i));
  const long double total = f(a) + f(b) + 4.0L * odd + 2.0L * even;
  return static_cast<double>(total * h / 3.0L);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double rel_tol) {
  if (b <= a) return 0.0;
  double prev = composite_simpson(f, a, b, 64);
  for (long long panels = 128; panels <= (1LL << 24); panels *= 2) {
    const double cur = composite_simpson(f, a, b, panels);
    if (std::fabs(cur - prev) <= rel_tol * std::max(std::fabs(cur), 1e-300)) return cur;
    prev = cur;
  }
  return prev;
}

// Regularized lower incomplete gamma by direct quadrature of the defining
// integral, scaled by exp(peak) to dodge overflow: integrand
// t^{r-1} e^{-t} / Gamma(r) written as exp((r-1) ln t - t - lgamma(r)).
inline double reg_lower_gamma_quadrature(long long r, double x, double rel_tol = 1e-13) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(static_cast<double>(r));
  auto f = [&](double t) {
    if (t <= 0.0) return r == 1 ? std::exp(-lg) : 0.0;
    return std::exp((static_cast<double>(r) - 1.0) * std::log(t) - t - lg);
  };
  return adaptive_simpson(f, 0.0, x, rel_tol);
}

// log of integral_{a}^{b} t^{N-1} e^{-pt} dt, computed with the integrand
// rescaled by its maximum so huge values (N large) stay in range.
inline double lemma_integral_log(long long N, double p, double a, double b) {
  const double nm1 = static_cast<double>(N - 1);
  auto logf = [&](double t) { return t <= 0.0 ? -1e308 : nm1 * std::log(t) - p * t; };
  // integrand increases up to t* = (N-1)/p; max over [a,b]:
  const double tstar = nm1 / p;
  const double peak = logf(std::clamp(tstar, a, b));
  auto f = [&](double t) { return std::exp(logf(t) - peak); };
  const double scaled = adaptive_simpson(f, a, b, 1e-12);
  return peak + std::log(scaled);
}

// ---- exact rational negative binomial ----

inline mpz_class binom(long long n, long long k) {
  mpz_class r;
  mpz_bin_uiui(r.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
  return r;
}

// Pr[trial count = n] for N-th success at success probability p (exact).
inline mpq_class negbin_pmf_q(long long n, long long N, const mpq_class& p) {
  if (n < N) return mpq_class(0);
  mpq_class one_minus_p = mpq_class(1) - p;
  mpq_class r(binom(n - 1, N - 1));
  for (long long i = 0; i < N; ++i) r *= p;
  for (long long i = 0; i < n - N; ++i) r *= one_minus_p;
  return r;
}

inline mpq_class negbin_cdf_q(long long k, long long N, const mpq_class& p) {
  mpq_class acc(0);
  if (k < N) return acc;
  mpq_class term = negbin_pmf_q(N, N, p);
  mpq_class one_minus_p = mpq_class(1) - p;
  for (long long n = N; n <= k; ++n) {
    acc += term;
    term *= one_minus_p * static_cast<long>(n);
    term /= static_cast<long>(n - N + 1);
  }
  return acc;
}

// Exact interval bounds: n1 = ceil((N-1)/(p mu1)), n2 = floor((N-1) mu2 / p).
inline long long ceil_q(const mpq_class& q) {
  mpz_class quot;
  mpz_cdiv_q(quot.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return static_cast<long long>(quot.get_si());
}

inline long long floor_q(const mpq_class& q) {
  mpz_class quot;
  mpz_fdiv_q(quot.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return static_cast<long long>(quot.get_si());
}

struct ExactWindowQ {
  long long n1 = 0;
  long long n2 = 0;
  mpq_class c1, c2, c;
};

// Brute-force evaluation of c1, c2, c in exact rational arithmetic.
inline ExactWindowQ exact_confidence_q(long long N, const mpq_class& p, const mpq_class& mu1,
                                       const mpq_class& mu2) {
  ExactWindowQ w;
  w.n1 = ceil_q(mpq_class(static_cast<long>(N - 1)) / (p * mu1));
  w.n2 = floor_q(mpq_class(static_cast<long>(N - 1)) * mu2 / p);
  if (w.n2 < N) {
    w.c1 = 0;
    w.c = 0;
    w.c2 = 1;
    return w;
  }
  w.c1 = negbin_cdf_q(w.n1 - 1, N, p);
  mpq_class cdf2 = negbin_cdf_q(w.n2, N, p);
  w.c = cdf2 - w.c1;
  w.c2 = mpq_class(1) - cdf2;
  return w;
}

// ---- chi-square upper critical values ----

// chi2 inverse cdf at 0.999 for the df range the goodness-of-fit test can
// produce after pooling (values from standard tables).
inline double chi2_crit_999(int df) {
  static const std::pair<int, double> table[] = {
      {5, 20.515005652432873},  {6, 22.457744484825323},  {7, 24.321886347856854},
      {8, 26.12448155837614},   {9, 27.877164871256568},  {10, 29.58829844507442},
      {11, 31.264133620239985}, {12, 32.90949040736021},  {13, 34.52817897487089},
      {14, 36.12327368039813},  {15, 37.69729821835383},  {16, 39.252354790768464},
      {17, 40.79021670690253},  {18, 42.31239633167996},  {19, 43.82019596451753},
      {20, 45.31474661812586},  {21, 46.797038041561315}, {22, 48.26794229083518},
      {23, 49.7282324664315},   {24, 51.17859777737739},  {25, 52.619655776172834},
      {26, 54.05196238857664},  {27, 55.47602020574521},  {28, 56.892285393353625},
      {29, 58.301173489794905}, {30, 59.70306430442994}};
  for (const auto& [d, v] : table)
    if (d == df) return v;
  throw std::runtime_error("chi2_crit_999: df " + std::to_string(df) +
                           " outside the frozen table; extend it");
}

}  // namespace oracle
