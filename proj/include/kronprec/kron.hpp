#pragma once

#include <Eigen/Core>

#include <vector>

namespace kronprec {

// One separable term of a sum-of-Kronecker-products operator. The operator
// maps vec(X) to vec(col_factor * X * row_factor^T), so col_factor blurs down
// image columns and row_factor across image rows.
struct KronTerm {
  Eigen::MatrixXd row_factor;
  Eigen::MatrixXd col_factor;
};

// A = sum_k row_factor_k (x) col_factor_k, stored as paired n-by-n dense
// factors; the assembled operator acts on vectors of length n^2.
struct KroneckerSum {
  std::vector<KronTerm> terms;
  int n = 0;
};

// Column-stacking reshapes.
Eigen::VectorXd vec(const Eigen::MatrixXd& y);
Eigen::MatrixXd unvec(const Eigen::VectorXd& y, int n);

// (C (x) D) y = vec(D * unvec(y) * C^T) without forming the n^2 square
// Kronecker matrix.
Eigen::VectorXd kron_apply(const Eigen::MatrixXd& c, const Eigen::MatrixXd& d,
                           const Eigen::VectorXd& y);

Eigen::VectorXd kronsum_apply(const KroneckerSum& k, const Eigen::VectorXd& y);
Eigen::VectorXd kronsum_apply_transpose(const KroneckerSum& k,
                                        const Eigen::VectorXd& y);

// Explicit n^2-by-n^2 assembly, guarded to n <= 64; intended for oracles and
// small experiments only.
Eigen::MatrixXd kronsum_densify(const KroneckerSum& k);

// Frobenius norms and distances via the Gram identity
// ||sum_k B_k (x) C_k||_F^2 = sum_{k,l} <B_k,B_l>_F <C_k,C_l>_F,
// so no dense assembly is needed at any size.
double kronsum_frobenius_norm(const KroneckerSum& k);
double kronsum_frobenius_distance(const KroneckerSum& a,
                                  const KroneckerSum& b);
double kronsum_relative_distance(const KroneckerSum& a, const KroneckerSum& b);

}  // namespace kronprec
