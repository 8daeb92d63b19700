#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace invuq {

/// Banded matrix with kl sub- and ku super-diagonals, LAPACK-style band
/// storage with kl extra rows of headroom for pivoting fill-in.
class BandMatrix {
 public:
  BandMatrix(std::size_t n, std::size_t kl, std::size_t ku);

  std::size_t n() const { return n_; }
  std::size_t kl() const { return kl_; }
  std::size_t ku() const { return ku_; }

  double& at(std::size_t i, std::size_t j);
  double get(std::size_t i, std::size_t j) const;
  void add(std::size_t i, std::size_t j, double v) { at(i, j) += v; }
  void clear_row(std::size_t i);
  void zero();

  std::vector<double> mul(std::span<const double> x) const;

  /// Factors in place (partial pivoting) and solves. One-shot use.
  std::vector<double> solve_inplace(std::vector<double> rhs);

 private:
  // entry (i,j) lives at ab_[row_of(i,j)][j] with row_of = kl+ku+i-j;
  // rows 0..kl-1 hold elimination fill above the stored band.
  std::size_t n_, kl_, ku_, ldab_;
  std::vector<double> ab_;  // ldab x n, column j contiguous? stored row-major: ab_[r*n + j]
};

}  // namespace invuq
