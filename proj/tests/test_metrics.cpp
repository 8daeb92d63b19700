#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "invuq/metrics.hpp"

using namespace invuq;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("error norms") {
  const std::vector<double> r = {1.0, 2.0, 2.0};
  CHECK(error_norms(r, r).l2_rel == 0.0);
  CHECK(error_norms(r, r).linf == 0.0);

  const std::vector<double> shifted = {1.5, 2.5, 2.5};
  CHECK(error_norms(shifted, r).linf == doctest::Approx(0.5));

  // hand case: m = (1,2,4), r = (1,2,2) -> l2 = 2/3, linf = 2
  const std::vector<double> m = {1.0, 2.0, 4.0};
  const ErrorNorms e = error_norms(m, r);
  CHECK(e.l2_rel == doctest::Approx(2.0 / 3.0));
  CHECK(e.linf == doctest::Approx(2.0));

  const std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS_AS(error_norms(zero, zero), std::invalid_argument);
}

TEST_CASE("normal quantile pins the spec value") {
  CHECK(normal_quantile_two_sided(0.95) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(normal_quantile_two_sided(0.5) == doctest::Approx(0.674490).epsilon(1e-5));
}

TEST_CASE("coverage") {
  const std::vector<double> ref = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> zero_var(4, 0.0);

  // reference equals mean: full coverage even at zero variance
  const CoverageResult all = coverage(ref, zero_var, ref, 0.95);
  CHECK(all.fraction == 1.0);

  // zero variance, k mismatches -> 1 - k/total
  std::vector<double> off = ref;
  off[1] += 0.1;
  off[3] -= 0.2;
  const CoverageResult some = coverage(off, zero_var, ref, 0.95);
  CHECK(some.fraction == doctest::Approx(0.5));
  CHECK(some.map[0] == 1);
  CHECK(some.map[1] == 0);

  // wide variance covers everything
  const std::vector<double> wide(4, 100.0);
  CHECK(coverage(off, wide, ref, 0.95).fraction == 1.0);

  std::vector<double> bad = zero_var;
  bad[0] = -1.0;
  CHECK_THROWS_AS(coverage(off, bad, ref, 0.95), std::invalid_argument);
}

TEST_CASE("coverage is monotone in the level") {
  const std::vector<double> ref = {0.0, 0.0, 0.0, 0.0, 0.0};
  const std::vector<double> mean = {0.1, 0.5, 1.0, 1.8, 2.5};
  const std::vector<double> var(5, 1.0);
  double prev = 0.0;
  for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    const double f = coverage(mean, var, ref, level).fraction;
    CHECK(f >= prev);
    prev = f;
  }
}

TEST_CASE("lpp hand cases") {
  // single point, mean == ref, s2 = 1/(2 pi): the log term vanishes
  const std::vector<double> m = {1.0};
  const std::vector<double> v = {1.0 / (2.0 * std::numbers::pi)};
  CHECK(lpp(m, v, m) == doctest::Approx(0.0).epsilon(1e-14));

  // two points, residuals (1, 0), unit variance
  const std::vector<double> m2 = {1.0, 0.0};
  const std::vector<double> r2 = {0.0, 0.0};
  const std::vector<double> v2 = {1.0, 1.0};
  CHECK(lpp(m2, v2, r2) ==
        doctest::Approx(-(0.5 + std::log(2.0 * std::numbers::pi))).epsilon(1e-12));

  // shrinking variance with a residual diverges to -inf (floored)
  const std::vector<double> m3 = {1.0};
  const std::vector<double> r3 = {0.0};
  double prev = lpp(m3, std::vector<double>{1.0}, r3);
  for (double s2 : {1e-2, 1e-4, 1e-8, 1e-12}) {
    const double cur = lpp(m3, std::vector<double>{s2}, r3);
    CHECK(cur < prev);
    prev = cur;
  }
  // the floor keeps the value finite even at zero variance
  CHECK(std::isfinite(lpp(m3, std::vector<double>{0.0}, r3)));
}

TEST_CASE("lpp decomposes additively over points") {
  const std::vector<double> mean = {0.3, -1.0, 2.0, 0.7};
  const std::vector<double> var = {0.5, 1.5, 0.1, 2.0};
  const std::vector<double> ref = {0.0, -1.2, 2.5, 0.7};
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    total += lpp(std::vector<double>{mean[i]}, std::vector<double>{var[i]},
                 std::vector<double>{ref[i]});
  CHECK(std::fabs(total - lpp(mean, var, ref)) <= 1e-12);
}

TEST_CASE("summarize bundles the pieces") {
  const std::vector<double> ref = {1.0, 2.0, 3.0};
  const std::vector<double> var(3, 1.0);
  const PosteriorSummary s = summarize(ref, var, ref, 0.95);
  CHECK(s.l2_rel == 0.0);
  CHECK(s.linf == 0.0);
  CHECK(s.coverage_fraction == 1.0);
  CHECK(s.lpp == doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(s.covered == 3);
  CHECK(s.total == 3);

  const PosteriorSummary again = summarize(ref, var, ref, 0.95);
  CHECK(again.lpp == s.lpp);  // deterministic

  const std::string row = summary_csv_row("ri", 1e-2, s);
  CHECK(row.substr(0, 3) == "ri,");
  CHECK(summary_csv_header() == "method,sigma2,l2,linf,lpp,coverage");
}

TEST_SUITE_END();
