#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "nbmc/errors.hpp"
#include "nbmc/specfun.hpp"

// The stopping rule itself: run trials until N occurrences of the target
// event, estimate p_hat = (N-1)/n, and certify the relative interval
// [p_hat/mu1, p_hat*mu2] at the asymptotic confidence level
//
//   c_bar = gamma(N, (N-1) mu2) - gamma(N, (N-1)/mu1)
//
// which the improved sufficient conditions turn into a guaranteed lower
// bound on the true confidence for every p in (0,1).
namespace nbmc::core {

enum class RuleVersion { improved, legacy };

// Rule parameters together with the asymptotic confidence they guarantee.
struct StoppingPlan {
  long long N = 0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double c_bar = 0.0;
};

struct ConditionReport {
  bool mu2_ok = false;
  bool mu1_ok = false;
  std::optional<bool> p_ok;  // empty for the improved rule (p-free)
  RuleVersion rule = RuleVersion::improved;
  bool all_ok() const { return mu2_ok && mu1_ok && p_ok.value_or(true); }
};

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  bool upper_clamped = false;  // true when p_hat*mu2 exceeded 1
};

struct EstimationResult {
  long long n = 0;
  long long N = 0;
  double p_hat = 0.0;
  ConfidenceInterval ci;
  StoppingPlan plan;
};

namespace detail {
inline void require_plan_args(long long N, double mu1, double mu2) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(mu1 > 1.0) || !std::isfinite(mu1)) throw std::invalid_argument("mu1 must be > 1");
  if (!(mu2 > 1.0) || !std::isfinite(mu2)) throw std::invalid_argument("mu2 must be > 1");
}
}  // namespace detail

// c_bar as a function of the rule parameters; strictly increasing in both mu.
inline double asymptotic_confidence(long long N, double mu1, double mu2) {
  detail::require_plan_args(N, mu1, mu2);
  const double upper = specfun::reg_lower_incomplete_gamma(N, static_cast<double>(N - 1) * mu2);
  const double lower = specfun::reg_lower_incomplete_gamma(N, static_cast<double>(N - 1) / mu1);
  return upper - lower;
}

inline StoppingPlan make_plan(long long N, double mu1, double mu2) {
  return StoppingPlan{N, mu1, mu2, asymptotic_confidence(N, mu1, mu2)};
}

// Threshold values of the sufficient conditions.
inline double mu2_lower_bound(long long N) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  const double Nd = static_cast<double>(N);
  return (Nd + std::sqrt(Nd)) / (Nd - 1.0);
}

inline double mu1_lower_bound_improved(long long N) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  const double Nd = static_cast<double>(N);
  return (Nd - 1.0) / (Nd - 0.5 - std::sqrt(Nd - 0.5));
}

inline double mu1_lower_bound_legacy(long long N) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  const double Nd = static_cast<double>(N);
  return (Nd - 1.0) / (Nd - std::sqrt(1.5 * Nd));
}

// The legacy rule additionally restricts p to p < (N-1) / (ceil(7N/2 - 1) mu1).
inline double legacy_p_limit(long long N, double mu1) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(mu1 > 1.0)) throw std::invalid_argument("mu1 must be > 1");
  const long long ceil_term = (7 * N - 1) / 2;  // ceil((7N-2)/2) in integers
  return static_cast<double>(N - 1) / (static_cast<double>(ceil_term) * mu1);
}

// Improved sufficient conditions: hold for every p, so p_ok stays empty.
// Boundary comparisons are plain floating-point >= (the conditions are
// inclusive); callers wanting slack must add it themselves.
inline ConditionReport check_conditions_improved(long long N, double mu1, double mu2) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  ConditionReport r;
  r.rule = RuleVersion::improved;
  r.mu2_ok = mu2 >= mu2_lower_bound(N);
  r.mu1_ok = mu1 >= mu1_lower_bound_improved(N);
  return r;
}

inline ConditionReport check_conditions_legacy(long long N, double mu1, double mu2, double p) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  ConditionReport r;
  r.rule = RuleVersion::legacy;
  r.mu2_ok = mu2 >= mu2_lower_bound(N);
  r.mu1_ok = mu1 >= mu1_lower_bound_legacy(N);
  r.p_ok = p < legacy_p_limit(N, mu1);
  return r;
}

// Smallest symmetric margin m (mu1 = mu2 = 1 + m) allowed by the improved
// conditions; the mu2 condition is the binding one, giving (sqrt(N)+1)/(N-1).
inline double min_margin(long long N) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  const double Nd = static_cast<double>(N);
  return (std::sqrt(Nd) + 1.0) / (Nd - 1.0);
}

// Smallest admissible m with asymptotic confidence above c_target, by
// bisection on [min_margin(N), 1e3] to 1e-6 absolute.
inline double min_margin_for_confidence(long long N, double c_target) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (!(c_target > 0.0 && c_target < 1.0))
    throw std::invalid_argument("confidence target must be in (0,1)");
  const double m_floor = min_margin(N);
  const auto conf = [N](double m) { return asymptotic_confidence(N, 1.0 + m, 1.0 + m); };
  if (conf(m_floor) > c_target) return m_floor;
  double lo = m_floor, hi = 1e3;
  if (!(conf(hi) > c_target))
    throw unachievable_error("min_margin_for_confidence: target " + std::to_string(c_target) +
                             " not reachable at N=" + std::to_string(N));
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    (conf(mid) > c_target ? hi : lo) = mid;
  }
  return hi;
}

// Smallest N >= 3 whose margin condition admits m and whose asymptotic
// confidence beats c_target. Linear scan (feasibility in N is not assumed
// contiguous); throws when no N up to the cap qualifies.
inline long long min_N_for(double m, double c_target, long long cap = 1'000'000) {
  if (!(m > 0.0)) throw std::invalid_argument("margin must be > 0");
  if (!(c_target > 0.0 && c_target < 1.0))
    throw std::invalid_argument("confidence target must be in (0,1)");
  if (cap < 3) throw std::invalid_argument("cap must be >= 3");
  for (long long N = 3; N <= cap; ++N) {
    if (m < min_margin(N)) continue;
    if (asymptotic_confidence(N, 1.0 + m, 1.0 + m) > c_target) return N;
  }
  throw unachievable_error("min_N_for: no N <= " + std::to_string(cap) +
                           " certifies margin " + std::to_string(m) + " at confidence " +
                           std::to_string(c_target));
}

// p_hat = (N-1)/n.
inline double estimate(long long n, long long N) {
  if (N < 3) throw std::invalid_argument("N must be >= 3");
  if (n < N) throw std::invalid_argument("estimate: n must be >= N");
  return static_cast<double>(N - 1) / static_cast<double>(n);
}

// Interval for p implied by p/mu2 <= p_hat <= p mu1, i.e. [p_hat/mu1, p_hat mu2].
inline ConfidenceInterval confidence_interval(double p_hat, const StoppingPlan& plan) {
  if (!(p_hat > 0.0 && p_hat < 1.0))
    throw std::invalid_argument("confidence_interval: p_hat must be in (0,1)");
  ConfidenceInterval ci;
  ci.low = p_hat / plan.mu1;
  ci.high = p_hat * plan.mu2;
  if (ci.high > 1.0) {
    ci.high = 1.0;
    ci.upper_clamped = true;
  }
  return ci;
}

}  // namespace nbmc::core
