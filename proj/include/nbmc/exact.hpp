#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "nbmc/core.hpp"
#include "nbmc/errors.hpp"
#include "nbmc/specfun.hpp"

// Exact (non-asymptotic) confidence for a concrete p: the trial count n is
// negative-binomial, the estimate lands inside the relative interval exactly
// when n1 <= n <= n2 with
//
//   n1 = ceil((N-1)/(p mu1)),   n2 = floor((N-1) mu2 / p),
//
// and the exact confidence is c = Pr[n1 <= n <= n2] = 1 - c1 - c2.
namespace nbmc::exact {

// Real-valued bound arguments within this many ulp of an integer are snapped
// to it before ceil/floor, so rational inputs (p = 1/2, mu = 2, ...) land on
// the intended integers despite binary rounding.
inline constexpr int kIntegerSnapUlps = 4;

struct ExactConfidence {
  long long N = 0;
  double p = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  long long n1 = 0;
  long long n2 = 0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c = 0.0;
  double c_bar = 0.0;
  double c1_bar = 0.0;
  double c2_bar = 0.0;
  bool interval_below_support = false;  // n2 < N: the interval misses all outcomes
};

struct PropositionCheck {
  bool holds = false;
  double margin = 0.0;  // c - c_bar
};

namespace detail {

inline long long checked_round(double v, bool ceil_mode, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(what) + ": bound is not finite");
  if (v >= 9.0e18)
    throw std::invalid_argument(std::string(what) + ": bound overflows the integer range");
  const double nearest = std::nearbyint(v);
  const double ulp = std::nextafter(v, std::numeric_limits<double>::infinity()) - v;
  if (std::fabs(v - nearest) <= kIntegerSnapUlps * ulp)
    return static_cast<long long>(nearest);
  return static_cast<long long>(ceil_mode ? std::ceil(v) : std::floor(v));
}

}  // namespace detail

// (n1, n2) with ceiling/floor semantics and the snap policy above.
inline std::pair<long long, long long> interval_bounds(long long N, double p, double mu1,
                                                       double mu2) {
  core::detail::require_plan_args(N, mu1, mu2);
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  const double a = static_cast<double>(N - 1) / (p * mu1);
  const double b = static_cast<double>(N - 1) * mu2 / p;
  return {detail::checked_round(a, true, "interval_bounds n1"),
          detail::checked_round(b, false, "interval_bounds n2")};
}

// Full evaluation of c1, c2, c together with the asymptotic values. The
// window probability c is accumulated directly (a cdf difference in one
// pass) instead of 1 - c1 - c2, so tiny c never suffers cancellation.
inline ExactConfidence exact_confidence(long long N, double p, double mu1, double mu2) {
  const auto [n1, n2] = interval_bounds(N, p, mu1, mu2);

  ExactConfidence out;
  out.N = N;
  out.p = p;
  out.mu1 = mu1;
  out.mu2 = mu2;
  out.n1 = n1;
  out.n2 = n2;
  out.c_bar = core::asymptotic_confidence(N, mu1, mu2);
  out.c1_bar = specfun::reg_lower_incomplete_gamma(N, static_cast<double>(N - 1) / mu1);
  out.c2_bar = 1.0 - specfun::reg_lower_incomplete_gamma(N, static_cast<double>(N - 1) * mu2);

  if (n2 < N) {
    out.interval_below_support = true;
    out.c1 = 0.0;
    out.c = 0.0;
    out.c2 = 1.0;
    return out;
  }
  if (n2 - N + 1 > specfun::kMaxSumTerms)
    throw term_cap_error("exact_confidence: n2 - N + 1 = " + std::to_string(n2 - N + 1) +
                         " terms exceeds the " + std::to_string(specfun::kMaxSumTerms) +
                         "-term cap");

  // One ascending pass over n in [N, n2], splitting mass below n1 from the
  // window [n1, n2].
  const auto sums = specfun::detail::negbin_split_sums(N, p, n1, n2);
  out.c1 = static_cast<double>(std::clamp(sums.below, 0.0L, 1.0L));
  out.c = static_cast<double>(std::clamp(sums.at_or_above, 0.0L, 1.0L));
  out.c2 = static_cast<double>(std::clamp(1.0L - sums.below - sums.at_or_above, 0.0L, 1.0L));
  return out;
}

// Numerical check of the guarantee c > c_bar. Requires the sufficient
// conditions to hold; otherwise the comparison is uninformative.
inline PropositionCheck proposition_holds(long long N, double p, double mu1, double mu2) {
  const auto cond = core::check_conditions_improved(N, mu1, mu2);
  if (!cond.all_ok())
    throw std::invalid_argument(
        "proposition_holds: (mu1, mu2) do not satisfy the sufficient conditions at N=" +
        std::to_string(N));
  const auto ec = exact_confidence(N, p, mu1, mu2);
  return PropositionCheck{ec.c > ec.c_bar, ec.c - ec.c_bar};
}

}  // namespace nbmc::exact
