#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "nbmc/core.hpp"
#include "nbmc/errors.hpp"
#include "nbmc/exact.hpp"

// Drives the stopping rule against a stream of trial outcomes and runs
// coverage experiments. Sources are pull-based so the same loop serves the
// in-process generator, replay files and pipes.
namespace nbmc::engine {

enum class Outcome { occurred, not_occurred, exhausted };
enum class SourceKind { synthetic, stream, replay };
enum class SessionStatus { running, stopped, exhausted, capped };

class TrialSource {
 public:
  virtual ~TrialSource() = default;
  virtual Outcome next() = 0;
  virtual SourceKind kind() const { return SourceKind::stream; }
  virtual std::optional<std::uint64_t> seed() const { return std::nullopt; }
};

// Seeded Bernoulli(p) stream. The generator is pinned — mt19937_64 drawn down
// to 53 uniform bits, outcome = (u < p) — and named so recorded sessions stay
// reproducible across builds; bump the version string if the scheme changes.
inline constexpr const char* kGeneratorName = "mt19937_64-u53/1";

class SyntheticSource final : public TrialSource {
 public:
  SyntheticSource(double p, std::uint64_t seed) : p_(p), seed_(seed), rng_(seed) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("Bernoulli p must be in (0,1)");
  }
  Outcome next() override {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return u < p_ ? Outcome::occurred : Outcome::not_occurred;
  }
  SourceKind kind() const override { return SourceKind::synthetic; }
  std::optional<std::uint64_t> seed() const override { return seed_; }

 private:
  double p_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
};

inline std::unique_ptr<TrialSource> make_synthetic_source(double p, std::uint64_t seed) {
  return std::make_unique<SyntheticSource>(p, seed);
}

// Newline-delimited replay: each line is `0` or `1`; blank lines and lines
// starting with '#' are skipped; anything else raises stream_format_error
// with the 1-based line number.
class ReplaySource final : public TrialSource {
 public:
  explicit ReplaySource(std::istream& in) : in_(in) {}
  Outcome next() override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      std::size_t b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      std::size_t e = line.find_last_not_of(" \t\r");
      const std::string tok = line.substr(b, e - b + 1);
      if (tok[0] == '#') continue;
      if (tok == "0") return Outcome::not_occurred;
      if (tok == "1") return Outcome::occurred;
      throw stream_format_error(line_no_, "line " + std::to_string(line_no_) +
                                              ": expected 0 or 1, got \"" + tok + "\"");
    }
    return Outcome::exhausted;
  }
  SourceKind kind() const override { return SourceKind::replay; }

 private:
  std::istream& in_;
  long long line_no_ = 0;
};

struct SessionRecord {
  core::StoppingPlan plan;
  long long trials = 0;
  long long successes = 0;
  SessionStatus status = SessionStatus::running;
  std::optional<std::uint64_t> seed;
  SourceKind source_kind = SourceKind::stream;
  std::string generator = kGeneratorName;
};

struct RunOutcome {
  SessionRecord session;
  std::optional<core::EstimationResult> result;  // present iff status == stopped
};

// Pulls outcomes until the N-th occurrence, the source runs dry, or the
// optional trial cap is hit. Consumes exactly the outcomes it counts.
inline RunOutcome run_until_stop(const core::StoppingPlan& plan, TrialSource& source,
                                 std::optional<long long> max_trials = std::nullopt) {
  if (plan.N < 3) throw std::invalid_argument("plan.N must be >= 3");
  if (max_trials && *max_trials < plan.N)
    throw std::invalid_argument("max_trials must be >= plan.N");

  RunOutcome out;
  out.session.plan = plan;
  out.session.seed = source.seed();
  out.session.source_kind = source.kind();
  while (true) {
    if (max_trials && out.session.trials >= *max_trials) {
      out.session.status = SessionStatus::capped;
      return out;
    }
    const Outcome o = source.next();
    if (o == Outcome::exhausted) {
      out.session.status = SessionStatus::exhausted;
      return out;
    }
    ++out.session.trials;
    if (o == Outcome::occurred && ++out.session.successes == plan.N) {
      out.session.status = SessionStatus::stopped;
      core::EstimationResult r;
      r.n = out.session.trials;
      r.N = plan.N;
      r.p_hat = core::estimate(r.n, plan.N);
      r.ci = core::confidence_interval(r.p_hat, plan);
      r.plan = plan;
      out.result = r;
      return out;
    }
  }
}

struct CoverageReport {
  long long runs = 0;
  long long hits = 0;
  double empirical = 0.0;
  double exact_c = 0.0;
  double c_bar = 0.0;
  double std_error = 0.0;
  bool conditions_ok = true;  // whether the sufficient conditions held (warn-only)
};

namespace detail {
// splitmix64 finalizer; per-run seeds are mix(master + (index+1) * golden),
// so parallel and serial execution see identical streams.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Repeats independent sessions at a known p_true and counts how often the
// estimate lands in the relative interval, against the exact confidence.
inline CoverageReport coverage_experiment(long long N, double mu1, double mu2, double p_true,
                                          long long runs, std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (!(p_true > 0.0 && p_true < 1.0)) throw std::invalid_argument("p_true must be in (0,1)");
  const auto plan = core::make_plan(N, mu1, mu2);
  const auto ec = exact::exact_confidence(N, p_true, mu1, mu2);

  CoverageReport rep;
  rep.runs = runs;
  rep.conditions_ok = core::check_conditions_improved(N, mu1, mu2).all_ok();
  for (long long i = 0; i < runs; ++i) {
    SyntheticSource src(p_true, detail::mix_seed(seed, static_cast<std::uint64_t>(i)));
    const auto run = run_until_stop(plan, src);
    const double p_hat = run.result->p_hat;
    if (p_true / mu2 <= p_hat && p_hat <= p_true * mu1) ++rep.hits;
  }
  rep.empirical = static_cast<double>(rep.hits) / static_cast<double>(runs);
  rep.exact_c = ec.c;
  rep.c_bar = ec.c_bar;
  rep.std_error = std::sqrt(ec.c * (1.0 - ec.c) / static_cast<double>(runs));
  return rep;
}

}  // namespace nbmc::engine
