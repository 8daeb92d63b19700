#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace invuq {

struct ErrorNorms {
  double l2_rel = 0.0;
  double linf = 0.0;
};

/// l2_rel = ||m - r||_2 / ||r||_2, linf = max |m - r|. Rejects a zero-norm
/// reference.
ErrorNorms error_norms(std::span<const double> mean, std::span<const double> reference);

struct CoverageResult {
  std::vector<std::uint8_t> map;  // 1 where the reference is inside the interval
  std::size_t covered = 0;
  std::size_t total = 0;
  double fraction = 0.0;
};

/// Point covered iff |mean - ref| <= z(level) * sqrt(variance).
CoverageResult coverage(std::span<const double> mean, std::span<const double> variance,
                        std::span<const double> reference, double level);

/// Two-sided standard normal quantile, z(0.95) = 1.959964.
double normal_quantile_two_sided(double level);

/// Log predictive probability: -sum[(m-r)^2/(2 s2) + log(2 pi s2)/2] with a
/// 1e-12 variance floor.
double lpp(std::span<const double> mean, std::span<const double> variance,
           std::span<const double> reference);

struct PosteriorSummary {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<std::uint8_t> coverage_map;
  double l2_rel = 0.0;
  double linf = 0.0;
  double lpp = 0.0;
  std::size_t covered = 0;
  std::size_t total = 0;
  double coverage_fraction = 0.0;
  double level = 0.95;
};

PosteriorSummary summarize(std::span<const double> mean, std::span<const double> variance,
                           std::span<const double> reference, double level);

/// CSV row in the emission column order: method, sigma2, l2, linf, lpp,
/// coverage.
std::string summary_csv_row(const std::string& method, double sigma2,
                            const PosteriorSummary& s);
std::string summary_csv_header();

}  // namespace invuq
