#pragma once

#include <vector>

#include "invuq/grid.hpp"
#include "invuq/linalg.hpp"
#include "invuq/rng.hpp"

namespace invuq {

/// Isotropic exponential covariance k(d) = variance * exp(-d / length).
struct CovKernel {
  double variance = 1.0;
  double length = 1.0;

  double operator()(double distance) const;
};

/// Covariance matrix over active cell centers (Euclidean distances).
Matrix build_covariance(const Grid& grid, const CovKernel& kernel);

/// Correlated Gaussian field sampler: y = mean + L z with L L^T the prior
/// covariance (jittered Cholesky). The factor is built once and reused.
class FieldSampler {
 public:
  FieldSampler(const Grid& grid, const CovKernel& kernel, FieldY mean);

  FieldY draw(RngStream& stream) const;
  const FieldY& mean() const { return mean_; }
  const Matrix& chol() const { return chol_; }

 private:
  FieldY mean_;
  Matrix chol_;
};

/// n prior realizations; member i consumes rng.substream(i), so permuting
/// stream ids permutes members without changing ensemble statistics.
std::vector<FieldY> sample_fields(const Grid& grid, const CovKernel& kernel, const FieldY& mean,
                                  std::size_t n, const RngStream& rng);

}  // namespace invuq
