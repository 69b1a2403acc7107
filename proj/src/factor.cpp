#include "kronprec/factor.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kronprec/lpblas.hpp"

namespace kronprec {

SvdTriple svd_dense(const Eigen::MatrixXd& a) {
  if (a.size() == 0) throw std::invalid_argument("svd_dense: empty matrix");
  if (!a.allFinite())
    throw std::invalid_argument("svd_dense: non-finite entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success)
    throw std::runtime_error("svd_dense: backend did not converge");
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

KronTerm nearest_kron(const Psf& psf, int n, KronWeighting weighting) {
  const int np = int(psf.values.rows());
  if (n < np)
    throw std::invalid_argument("nearest_kron: image smaller than psf");

  if (weighting == KronWeighting::Uniform) {
    // Truncation at tol = 1 keeps exactly the dominant term.
    return psf_to_kronsum(psf, n, 1.0).terms.front();
  }

  Eigen::VectorXd dr(np), dc(np);
  for (int i = 0; i < np; ++i)
    dr(i) = std::sqrt(double(n - std::abs(i - psf.center_row)));
  for (int j = 0; j < np; ++j)
    dc(j) = std::sqrt(double(n - std::abs(j - psf.center_col)));

  const Eigen::MatrixXd weighted =
      dr.asDiagonal() * psf.values * dc.asDiagonal();
  const SvdTriple svd = svd_dense(weighted);

  Eigen::VectorXd u = svd.u.col(0);
  Eigen::VectorXd v = svd.v.col(0);
  Eigen::Index imax;
  u.cwiseAbs().maxCoeff(&imax);
  if (u(imax) < 0.0) {
    u = -u;
    v = -v;
  }
  const double root = std::sqrt(svd.s(0));
  const Eigen::VectorXd a_col = root * u.cwiseQuotient(dr);
  const Eigen::VectorXd a_row = root * v.cwiseQuotient(dc);
  return {banded_toeplitz(a_row, psf.center_col, n),
          banded_toeplitz(a_col, psf.center_row, n)};
}

namespace {

Eigen::MatrixXd weight_matrix(const SvdTriple& svd_r, const SvdTriple& svd_c,
                              double lambda) {
  const Eigen::Index n = svd_r.s.size();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double prod = svd_r.s(j) * svd_c.s(i);
      const double denom = prod * prod + lambda * lambda;
      if (denom == 0.0)
        throw std::invalid_argument(
            "build_preconditioner: singular factors need lambda > 0");
      s(i, j) = 1.0 / denom;
    }
  return s;
}

}  // namespace

KronSvdPreconditioner build_preconditioner(const Eigen::MatrixXd& a_r,
                                           const Eigen::MatrixXd& a_c,
                                           double lambda,
                                           const PrecisionFormat& fmt) {
  if (a_r.rows() != a_r.cols() || a_c.rows() != a_c.cols() ||
      a_r.rows() != a_c.rows())
    throw std::invalid_argument(
        "build_preconditioner: factors must be square and equally sized");
  if (lambda < 0.0)
    throw std::invalid_argument("build_preconditioner: negative lambda");

  KronSvdPreconditioner p;
  p.a_r = a_r;
  p.a_c = a_c;
  p.svd_r = svd_dense(a_r);
  p.svd_c = svd_dense(a_c);
  p.lambda = lambda;
  p.fmt = fmt;
  p.n = int(a_r.rows());
  p.s_weights = weight_matrix(p.svd_r, p.svd_c, lambda);
  p.vr_lp = round_array(p.svd_r.v, fmt);
  p.vc_lp = round_array(p.svd_c.v, fmt);
  p.s_lp = round_array(p.s_weights, fmt);
  return p;
}

KronSvdPreconditioner with_lambda(const KronSvdPreconditioner& p,
                                  double lambda) {
  if (lambda < 0.0)
    throw std::invalid_argument("with_lambda: negative lambda");
  KronSvdPreconditioner q = p;
  q.lambda = lambda;
  q.s_weights = weight_matrix(q.svd_r, q.svd_c, lambda);
  q.s_lp = round_array(q.s_weights, q.fmt);
  return q;
}

Eigen::VectorXd precond_solve(const KronSvdPreconditioner& p,
                              const Eigen::VectorXd& r) {
  if (r.size() != Eigen::Index(p.n) * p.n)
    throw std::invalid_argument("precond_solve: vector length is not n^2");
  const bool live = !p.fmt.covers_double();

  Eigen::MatrixXd rm = unvec(r, p.n);
  if (live) round_inplace(rm, p.fmt);

  const Eigen::MatrixXd t1 = lp_matmul(p.vc_lp.transpose(), rm, p.fmt);
  const Eigen::MatrixXd t2 = lp_matmul(t1, p.vr_lp, p.fmt);
  Eigen::MatrixXd w = p.s_lp.cwiseProduct(t2);
  if (live) round_inplace(w, p.fmt);
  const Eigen::MatrixXd t3 = lp_matmul(p.vc_lp, w, p.fmt);
  return vec(lp_matmul(t3, p.vr_lp.transpose(), p.fmt));
}

ApproxSpectrum approx_spectrum(const KronSvdPreconditioner& p) {
  const Eigen::Index n = p.n;
  ApproxSpectrum out;
  out.sigma.resize(n * n);
  out.perm.resize(std::size_t(n) * std::size_t(n));
  std::iota(out.perm.begin(), out.perm.end(), Eigen::Index{0});

  Eigen::VectorXd products(n * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      products(j * n + i) = p.svd_r.s(j) * p.svd_c.s(i);

  std::stable_sort(out.perm.begin(), out.perm.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return products(a) > products(b);
                   });
  for (Eigen::Index k = 0; k < n * n; ++k)
    out.sigma(k) = products(out.perm[std::size_t(k)]);
  return out;
}

namespace {

Eigen::VectorXd project(const KronSvdPreconditioner& p,
                        const Eigen::MatrixXd& left,
                        const Eigen::MatrixXd& right,
                        const Eigen::VectorXd& x) {
  if (x.size() != Eigen::Index(p.n) * p.n)
    throw std::invalid_argument("project: vector length is not n^2");
  const Eigen::VectorXd full =
      vec(left.transpose() * unvec(x, p.n) * right);
  const ApproxSpectrum sd = approx_spectrum(p);
  Eigen::VectorXd out(full.size());
  for (Eigen::Index k = 0; k < full.size(); ++k)
    out(k) = full(sd.perm[std::size_t(k)]);
  return out;
}

}  // namespace

Eigen::VectorXd project_b(const KronSvdPreconditioner& p,
                          const Eigen::VectorXd& b) {
  return project(p, p.svd_c.u, p.svd_r.u, b);
}

Eigen::VectorXd project_x(const KronSvdPreconditioner& p,
                          const Eigen::VectorXd& x) {
  return project(p, p.svd_c.v, p.svd_r.v, x);
}

}  // namespace kronprec
