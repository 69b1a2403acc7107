#pragma once

#include <Eigen/Core>

#include "kronprec/precision.hpp"

namespace kronprec {

// Linear-algebra kernels that emulate low-precision storage by rounding all
// intermediates to fmt. Summation is pairwise over a fixed tree (adjacent
// pairs, left to right; an unpaired trailing element carries forward without
// rounding), with one vectorized rounding call per stage, so results are
// bit-reproducible. Formats that cover double skip rounding and tally no
// rounding calls.

// Sum of pre-rounded addends; ceil(log2 n) rounding calls.
double pairwise_sum(const Eigen::VectorXd& z, const PrecisionFormat& fmt);

// round(x .* y) then pairwise_sum; ceil(log2 n) + 1 rounding calls.
double lp_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              const PrecisionFormat& fmt);

// Scales the columns of a by the entries of v, rounds once, then sums the
// columns pairwise; ceil(log2 n) + 1 rounding calls.
Eigen::VectorXd lp_matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& v,
                          const PrecisionFormat& fmt);

// Pairwise summation of the rounded rank-1 products a(:,i) b(i,:). With a
// single-column b this reproduces lp_matvec exactly, rounding tallies
// included.
Eigen::MatrixXd lp_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          const PrecisionFormat& fmt);

}  // namespace kronprec
