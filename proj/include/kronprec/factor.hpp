#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "kronprec/deblur.hpp"
#include "kronprec/kron.hpp"
#include "kronprec/precision.hpp"

namespace kronprec {

struct SvdTriple {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;  // nonincreasing, nonnegative
  Eigen::MatrixXd v;
};

// Full dense SVD with sorted singular values. Throws std::runtime_error if
// the backend fails to converge and std::invalid_argument on non-finite
// input.
SvdTriple svd_dense(const Eigen::MatrixXd& a);

enum class KronWeighting { Uniform, Toeplitz };

// Best single Kronecker pair for the blur operator of psf on n-by-n images.
// Uniform mode maps the dominant SVD term of the PSF array through the
// Toeplitz construction unchanged. Toeplitz mode (the default) first scales
// the array by the diagonal-count weights diag(sqrt(n - |i - c|)) on each
// side, takes the dominant SVD term of the weighted array, and unweights the
// singular vectors; that choice minimizes the operator-level Frobenius error,
// so it is never worse than uniform.
KronTerm nearest_kron(const Psf& psf, int n,
                      KronWeighting weighting = KronWeighting::Toeplitz);

// One-term Kronecker SVD preconditioner for the regularized normal equations:
// with A_hat = A_r (x) A_c and factor SVDs U Sigma V^T, the preconditioner is
// M = (V_r (x) V_c) diag(1 ./ s_weights) (V_r (x) V_c)^T, where
// s_weights(i, j) = 1 / ((sigma_r(j) sigma_c(i))^2 + lambda^2). The rounded
// copies vr_lp, vc_lp, s_lp are what solves actually touch.
struct KronSvdPreconditioner {
  Eigen::MatrixXd a_r;
  Eigen::MatrixXd a_c;
  SvdTriple svd_r;
  SvdTriple svd_c;
  double lambda = 0.0;
  Eigen::MatrixXd s_weights;
  PrecisionFormat fmt;
  Eigen::MatrixXd vr_lp;
  Eigen::MatrixXd vc_lp;
  Eigen::MatrixXd s_lp;
  int n = 0;
};

KronSvdPreconditioner build_preconditioner(const Eigen::MatrixXd& a_r,
                                           const Eigen::MatrixXd& a_c,
                                           double lambda,
                                           const PrecisionFormat& fmt);

// Same factors and SVDs, new lambda; avoids recomputing the SVDs when the
// regularization parameter is chosen after the factors are known.
KronSvdPreconditioner with_lambda(const KronSvdPreconditioner& p,
                                  double lambda);

// Applies M^{-1} in the storage format: unvec the rounded residual, sandwich
// between the rounded V factors with low-precision matrix products, scale
// elementwise by the rounded weights (one vectorized rounding), sandwich
// back. Returns doubles whose values are representable in fmt.
Eigen::VectorXd precond_solve(const KronSvdPreconditioner& p,
                              const Eigen::VectorXd& r);

// Singular values of A_hat: all products sigma_r(j) sigma_c(i), sorted
// nonincreasing. perm maps sorted positions to column-major linear indices
// j * n + i.
struct ApproxSpectrum {
  Eigen::VectorXd sigma;
  std::vector<Eigen::Index> perm;
};

ApproxSpectrum approx_spectrum(const KronSvdPreconditioner& p);

// Coordinates of b in the left/right singular bases of A_hat, working
// precision, reordered to match approx_spectrum.
Eigen::VectorXd project_b(const KronSvdPreconditioner& p,
                          const Eigen::VectorXd& b);
Eigen::VectorXd project_x(const KronSvdPreconditioner& p,
                          const Eigen::VectorXd& x);

}  // namespace kronprec
