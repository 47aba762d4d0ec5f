#include "nbmc/specfun.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace nbmc;

TEST_CASE("log_factorial: exact small values and asymptotic range") {
  CHECK(specfun::log_factorial(0) == 0.0);
  CHECK(specfun::log_factorial(1) == 0.0);
  CHECK(specfun::log_factorial(10) == doctest::Approx(std::log(3628800.0)).epsilon(1e-14));
  // 20! = 2432902008176640000 is the last factorial exactly representable here
  CHECK(specfun::log_factorial(20) ==
        doctest::Approx(std::log(2432902008176640000.0)).epsilon(1e-14));
  // consistency across the table/lgamma seam: ln(21!) = ln(21) + ln(20!)
  CHECK(specfun::log_factorial(21) ==
        doctest::Approx(std::log(21.0) + specfun::log_factorial(20)).epsilon(1e-14));
  CHECK_THROWS_AS(specfun::log_factorial(-1), std::invalid_argument);
}

TEST_CASE("incomplete gamma: closed forms and rejection") {
  CHECK(specfun::reg_lower_incomplete_gamma(1, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  for (long long N : {1, 5, 30, 1000}) CHECK(specfun::reg_lower_incomplete_gamma(N, 0.0) == 0.0);
  CHECK_THROWS_AS(specfun::reg_lower_incomplete_gamma(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(specfun::reg_lower_incomplete_gamma(5, -0.1), std::invalid_argument);

  // gamma(1, x) = 1 - e^-x across the whole branch structure
  for (double x : {1e-6, 0.5, 2.0, 20.0, 300.0, 699.0, 701.0}) {
    CHECK(specfun::reg_lower_incomplete_gamma(1, x) ==
          doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-14));
  }
}

TEST_CASE("incomplete gamma vs quadrature of the defining integral") {
  // 35.873 = 29 * 1.237, the upper argument of the worked example
  const double v = specfun::reg_lower_incomplete_gamma(30, 35.873);
  CHECK(v == doctest::Approx(oracle::reg_lower_gamma_quadrature(30, 35.873)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.8575332675434229).epsilon(1e-12));  // frozen from the oracle

  std::mt19937 gen(20240901);
  std::uniform_int_distribution<long long> rdist(1, 400);
  std::uniform_real_distribution<double> scale(0.2, 3.0);
  for (int i = 0; i < 40; ++i) {
    const long long r = rdist(gen);
    const double x = scale(gen) * static_cast<double>(r);
    const double impl = specfun::reg_lower_incomplete_gamma(r, x);
    const double quad = oracle::reg_lower_gamma_quadrature(r, x);
    CHECK(impl == doctest::Approx(quad).epsilon(1e-11));
  }
}

TEST_CASE("incomplete gamma: monotonicity and range properties") {
  std::mt19937 gen(7);
  std::uniform_int_distribution<long long> rdist(1, 2000);
  std::uniform_real_distribution<double> xdist(0.0, 4000.0);
  for (int i = 0; i < 300; ++i) {
    const long long r = rdist(gen);
    double x1 = xdist(gen), x2 = xdist(gen);
    if (x1 > x2) std::swap(x1, x2);
    const double g1 = specfun::reg_lower_incomplete_gamma(r, x1);
    const double g2 = specfun::reg_lower_incomplete_gamma(r, x2);
    CHECK(g1 >= 0.0);
    CHECK(g2 <= 1.0);
    CHECK(g2 >= g1 - 1e-14);                                        // nondecreasing in x
    const double gr = specfun::reg_lower_incomplete_gamma(r + 1, x2);
    CHECK(gr <= g2 + 1e-14);                                        // nonincreasing in r
  }
  // extreme corners of the contract box
  CHECK(specfun::reg_lower_incomplete_gamma(10000, 1e6) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(specfun::reg_lower_incomplete_gamma(10000, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  const double mid = specfun::reg_lower_incomplete_gamma(10000, 10000.0);
  CHECK(mid == doctest::Approx(oracle::reg_lower_gamma_quadrature(10000, 10000.0)).epsilon(1e-11));
}

TEST_CASE("falling factorial log") {
  CHECK(specfun::falling_factorial_log(5.0, 0) == 0.0);
  CHECK(specfun::falling_factorial_log(5.0, 3) == doctest::Approx(std::log(60.0)).epsilon(1e-14));
  CHECK(specfun::falling_factorial_log(29.0, 29) ==
        doctest::Approx(specfun::log_factorial(29)).epsilon(1e-14));
  CHECK_THROWS_AS(specfun::falling_factorial_log(3.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(specfun::falling_factorial_log(-1.0, 0), std::invalid_argument);
}

TEST_CASE("negbin pmf: closed forms, normalization") {
  // all-successes run: Pr = p^N
  for (long long N : {3, 10, 30})
    CHECK(specfun::negbin_log_pmf(N, N, 0.3) == doctest::Approx(N * std::log(0.3)).epsilon(1e-13));
  // n=4, N=3, p=1/2: 3 * (1/2)^4
  CHECK(specfun::negbin_log_pmf(4, 3, 0.5) ==
        doctest::Approx(std::log(3.0 * std::pow(0.5, 4))).epsilon(1e-13));
  CHECK_THROWS_AS(specfun::negbin_log_pmf(2, 3, 0.5), std::invalid_argument);

  // sum over n of exp(log pmf) -> 1, and partial sums match the cdf
  for (double p : {0.5, 0.1}) {
    for (long long N : {3, 5}) {
      double acc = 0.0;
      for (long long n = N; n <= 400; ++n) {
        acc += std::exp(specfun::negbin_log_pmf(n, N, p));
        if (n % 7 == 0)
          CHECK(specfun::negbin_cdf(n, N, p) == doctest::Approx(acc).epsilon(1e-13));
      }
      CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("negbin cdf: degenerate arguments, limits, term cap") {
  CHECK(specfun::negbin_cdf(2, 3, 0.5) == 0.0);
  CHECK(specfun::negbin_cdf(-5, 3, 0.5) == 0.0);
  CHECK(specfun::negbin_cdf(5000, 3, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(specfun::negbin_cdf(5, 3, 0.5) == doctest::Approx(0.5).epsilon(1e-14));  // exactly 1/2
  CHECK_THROWS_AS(specfun::negbin_cdf(300'000'000, 3, 0.5), nbmc::term_cap_error);
}

TEST_CASE("negbin cdf vs exact rational oracle") {
  for (long long N : {3, 5}) {
    for (const auto& pq : {mpq_class(1, 2), mpq_class(1, 10)}) {
      const double p = mpq_get_d(pq.get_mpq_t());
      for (long long k = N - 1; k <= 200; k += 3) {
        const double exact = mpq_get_d(oracle::negbin_cdf_q(k, N, pq).get_mpq_t());
        CHECK(specfun::negbin_cdf(k, N, p) == doctest::Approx(exact).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("negbin cdf: monotone in k, deep-underflow prefix stays finite") {
  double prev = 0.0;
  for (long long k = 10; k <= 400; k += 10) {
    const double v = specfun::negbin_cdf(k, 10, 0.05);
    CHECK(v >= prev);
    prev = v;
  }
  // p^N far below double range: cdf over the bulk must still come out ~1
  const double v = specfun::negbin_cdf(30'000'000, 300, 1e-4);
  CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  // p^N below even long double range (exercises the power-of-two rescale)
  const double w = specfun::negbin_cdf(20'000'000, 1200, 1e-4);
  CHECK(w == doctest::Approx(1.0).epsilon(1e-9));
}
