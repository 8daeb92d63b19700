#include "invuq/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace invuq {

namespace {
constexpr double kVarianceFloor = 1e-12;

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": support mismatch");
}
}  // namespace

ErrorNorms error_norms(std::span<const double> mean, std::span<const double> reference) {
  check_same(mean.size(), reference.size(), "error_norms");
  double diff2 = 0.0, ref2 = 0.0, linf = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = mean[i] - reference[i];
    diff2 += d * d;
    ref2 += reference[i] * reference[i];
    linf = std::max(linf, std::fabs(d));
  }
  if (ref2 == 0.0) throw std::invalid_argument("error_norms: zero-norm reference");
  return {std::sqrt(diff2 / ref2), linf};
}

double normal_quantile_two_sided(double level) {
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("normal quantile: level must be in (0,1)");
  // Acklam's rational approximation of the inverse normal CDF at (1+level)/2
  const double p = 0.5 * (1.0 + level);
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // one Halley refinement keeps full double accuracy
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

CoverageResult coverage(std::span<const double> mean, std::span<const double> variance,
                        std::span<const double> reference, double level) {
  check_same(mean.size(), variance.size(), "coverage");
  check_same(mean.size(), reference.size(), "coverage");
  const double z = normal_quantile_two_sided(level);
  CoverageResult r;
  r.total = mean.size();
  r.map.assign(mean.size(), 0);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (variance[i] < 0.0) throw std::invalid_argument("coverage: negative variance");
    if (std::fabs(mean[i] - reference[i]) <= z * std::sqrt(variance[i])) {
      r.map[i] = 1;
      ++r.covered;
    }
  }
  r.fraction = static_cast<double>(r.covered) / static_cast<double>(r.total);
  return r;
}

double lpp(std::span<const double> mean, std::span<const double> variance,
           std::span<const double> reference) {
  check_same(mean.size(), variance.size(), "lpp");
  check_same(mean.size(), reference.size(), "lpp");
  double s = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double s2 = std::max(variance[i], kVarianceFloor);
    const double d = mean[i] - reference[i];
    s += d * d / (2.0 * s2) + 0.5 * std::log(2.0 * std::numbers::pi * s2);
  }
  return -s;
}

PosteriorSummary summarize(std::span<const double> mean, std::span<const double> variance,
                           std::span<const double> reference, double level) {
  PosteriorSummary s;
  s.mean.assign(mean.begin(), mean.end());
  s.variance.assign(variance.begin(), variance.end());
  const ErrorNorms e = error_norms(mean, reference);
  s.l2_rel = e.l2_rel;
  s.linf = e.linf;
  CoverageResult c = coverage(mean, variance, reference, level);
  s.coverage_map = std::move(c.map);
  s.covered = c.covered;
  s.total = c.total;
  s.coverage_fraction = c.fraction;
  s.lpp = lpp(mean, variance, reference);
  s.level = level;
  return s;
}

std::string summary_csv_header() { return "method,sigma2,l2,linf,lpp,coverage"; }

std::string summary_csv_row(const std::string& method, double sigma2,
                            const PosteriorSummary& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g", method.c_str(), sigma2,
                s.l2_rel, s.linf, s.lpp, s.coverage_fraction);
  return buf;
}

}  // namespace invuq
