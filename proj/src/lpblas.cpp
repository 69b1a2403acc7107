#include "kronprec/lpblas.hpp"

#include <stdexcept>
#include <utility>

namespace kronprec {

namespace {

// Reduces k adjacent column blocks of width w to a single block. Each stage
// adds adjacent block pairs and rounds the freshly formed sums with one
// vectorized call; an odd trailing block is carried unrounded.
Eigen::MatrixXd pairwise_block_reduce(Eigen::MatrixXd c, Eigen::Index w,
                                      const PrecisionFormat& fmt) {
  const bool live = !fmt.covers_double();
  Eigen::Index k = c.cols() / w;
  while (k > 1) {
    const Eigen::Index pairs = k / 2;
    const Eigen::Index carry = k % 2;
    Eigen::MatrixXd next(c.rows(), (pairs + carry) * w);
    for (Eigen::Index i = 0; i < pairs; ++i)
      next.middleCols(i * w, w) =
          c.middleCols(2 * i * w, w) + c.middleCols((2 * i + 1) * w, w);
    if (live) round_inplace(next.leftCols(pairs * w), fmt);
    if (carry) next.rightCols(w) = c.rightCols(w);
    c = std::move(next);
    k = pairs + carry;
  }
  return c;
}

}  // namespace

double pairwise_sum(const Eigen::VectorXd& z, const PrecisionFormat& fmt) {
  if (z.size() == 0) throw std::invalid_argument("pairwise_sum: empty input");
  return pairwise_block_reduce(z.transpose(), 1, fmt)(0, 0);
}

double lp_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              const PrecisionFormat& fmt) {
  if (x.size() != y.size())
    throw std::invalid_argument("lp_dot: length mismatch");
  if (x.size() == 0) throw std::invalid_argument("lp_dot: empty input");
  Eigen::MatrixXd c = x.cwiseProduct(y).transpose();
  if (!fmt.covers_double()) round_inplace(c, fmt);
  return pairwise_block_reduce(std::move(c), 1, fmt)(0, 0);
}

Eigen::VectorXd lp_matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& v,
                          const PrecisionFormat& fmt) {
  if (a.cols() != v.size())
    throw std::invalid_argument("lp_matvec: shape mismatch");
  if (v.size() == 0) throw std::invalid_argument("lp_matvec: empty input");
  Eigen::MatrixXd c = a * v.asDiagonal();
  if (!fmt.covers_double()) round_inplace(c, fmt);
  return pairwise_block_reduce(std::move(c), 1, fmt).col(0);
}

Eigen::MatrixXd lp_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          const PrecisionFormat& fmt) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("lp_matmul: shape mismatch");
  if (a.cols() == 0) throw std::invalid_argument("lp_matmul: empty input");
  const Eigen::Index k = a.cols(), n = b.cols();
  Eigen::MatrixXd c(a.rows(), k * n);
  for (Eigen::Index i = 0; i < k; ++i)
    c.middleCols(i * n, n) = a.col(i) * b.row(i);
  if (!fmt.covers_double()) round_inplace(c, fmt);
  return pairwise_block_reduce(std::move(c), n, fmt);
}

}  // namespace kronprec
