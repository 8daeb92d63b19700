#include "invuq/random_field.hpp"

#include <cmath>

#include "invuq/errors.hpp"

namespace invuq {

double CovKernel::operator()(double distance) const {
  return variance * std::exp(-distance / length);
}

Matrix build_covariance(const Grid& grid, const CovKernel& kernel) {
  const std::size_t n = grid.n_active();
  if (n < 2) throw ConfigError("build_covariance: need at least 2 active cells");
  std::vector<double> xs(n), ys(n);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t c = grid.cell_of_active[a];
    xs[a] = grid.xc(c % grid.nx);
    ys[a] = grid.yc(c / grid.nx);
  }
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = kernel.variance;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
      const double k = kernel(d);
      m(i, j) = k;
      m(j, i) = k;
    }
  }
  return m;
}

FieldSampler::FieldSampler(const Grid& grid, const CovKernel& kernel, FieldY mean)
    : mean_(std::move(mean)) {
  if (mean_.v.size() != grid.n_active())
    throw ConfigError("FieldSampler: mean length must equal active cell count");
  chol_ = cholesky(build_covariance(grid, kernel)).lower;
}

FieldY FieldSampler::draw(RngStream& stream) const {
  const std::size_t n = mean_.v.size();
  std::vector<double> z = sample_std_normal(stream, n);
  FieldY y;
  y.v = mean_.v;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += chol_(i, k) * z[k];
    y.v[i] += s;
  }
  return y;
}

std::vector<FieldY> sample_fields(const Grid& grid, const CovKernel& kernel, const FieldY& mean,
                                  std::size_t n, const RngStream& rng) {
  FieldSampler sampler(grid, kernel, mean);
  std::vector<FieldY> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream s = rng.substream(i);
    out.push_back(sampler.draw(s));
  }
  return out;
}

}  // namespace invuq
