#include "kronprec/kron.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>

namespace kronprec {

namespace {

void check_sum(const KroneckerSum& k) {
  if (k.terms.empty())
    throw std::invalid_argument("KroneckerSum: no terms");
  for (const auto& t : k.terms) {
    if (t.row_factor.rows() != k.n || t.row_factor.cols() != k.n ||
        t.col_factor.rows() != k.n || t.col_factor.cols() != k.n)
      throw std::invalid_argument("KroneckerSum: factor shape mismatch");
  }
}

Eigen::MatrixXd thin_r(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::Index k = std::min(m.rows(), m.cols());
  return Eigen::MatrixXd(
      qr.matrixQR().topRows(k).triangularView<Eigen::Upper>());
}

// Frobenius norm of a signed term list. Rearranging each Kronecker term into
// the rank-one outer product vec(row) vec(col)^T permutes the entries of the
// assembled operator, so the norm of the stacked product P Q^T equals the
// operator norm; going through thin QR factors keeps the evaluation accurate
// even when the terms cancel almost completely, which the quadratic Gram
// identity cannot do in double precision.
double signed_stack_norm(const std::vector<const KronTerm*>& terms,
                         const std::vector<double>& signs) {
  const Eigen::Index nn = terms.front()->row_factor.size();
  const auto k = Eigen::Index(terms.size());
  Eigen::MatrixXd p(nn, k), q(nn, k);
  for (Eigen::Index t = 0; t < k; ++t) {
    p.col(t) = signs[std::size_t(t)] *
               Eigen::Map<const Eigen::VectorXd>(
                   terms[std::size_t(t)]->row_factor.data(), nn);
    q.col(t) = Eigen::Map<const Eigen::VectorXd>(
        terms[std::size_t(t)]->col_factor.data(), nn);
  }
  return (thin_r(p) * thin_r(q).transpose()).norm();
}

}  // namespace

Eigen::VectorXd vec(const Eigen::MatrixXd& y) {
  return Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& y, int n) {
  if (y.size() != Eigen::Index(n) * n)
    throw std::invalid_argument("unvec: length is not n^2");
  return Eigen::Map<const Eigen::MatrixXd>(y.data(), n, n);
}

Eigen::VectorXd kron_apply(const Eigen::MatrixXd& c, const Eigen::MatrixXd& d,
                           const Eigen::VectorXd& y) {
  const Eigen::Index n = c.rows();
  if (c.cols() != n || d.rows() != n || d.cols() != n)
    throw std::invalid_argument("kron_apply: factors must be square, same n");
  if (y.size() != n * n)
    throw std::invalid_argument("kron_apply: vector length is not n^2");
  const Eigen::MatrixXd x = unvec(y, int(n));
  return vec(d * x * c.transpose());
}

Eigen::VectorXd kronsum_apply(const KroneckerSum& k, const Eigen::VectorXd& y) {
  check_sum(k);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(y.size());
  for (const auto& t : k.terms)
    out += kron_apply(t.row_factor, t.col_factor, y);
  return out;
}

Eigen::VectorXd kronsum_apply_transpose(const KroneckerSum& k,
                                        const Eigen::VectorXd& y) {
  check_sum(k);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(y.size());
  for (const auto& t : k.terms)
    out += kron_apply(t.row_factor.transpose(), t.col_factor.transpose(), y);
  return out;
}

Eigen::MatrixXd kronsum_densify(const KroneckerSum& k) {
  check_sum(k);
  if (k.n > 64)
    throw std::invalid_argument("kronsum_densify: n exceeds the size guard");
  const Eigen::Index n = k.n;
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n * n, n * n);
  for (const auto& t : k.terms)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        dense.block(i * n, j * n, n, n) += t.row_factor(i, j) * t.col_factor;
  return dense;
}

double kronsum_frobenius_norm(const KroneckerSum& k) {
  check_sum(k);
  std::vector<const KronTerm*> terms;
  std::vector<double> signs;
  for (const auto& t : k.terms) {
    terms.push_back(&t);
    signs.push_back(1.0);
  }
  return signed_stack_norm(terms, signs);
}

double kronsum_frobenius_distance(const KroneckerSum& a,
                                  const KroneckerSum& b) {
  check_sum(a);
  check_sum(b);
  if (a.n != b.n)
    throw std::invalid_argument("kronsum_frobenius_distance: size mismatch");
  std::vector<const KronTerm*> terms;
  std::vector<double> signs;
  for (const auto& t : a.terms) {
    terms.push_back(&t);
    signs.push_back(1.0);
  }
  for (const auto& t : b.terms) {
    terms.push_back(&t);
    signs.push_back(-1.0);
  }
  return signed_stack_norm(terms, signs);
}

double kronsum_relative_distance(const KroneckerSum& a,
                                 const KroneckerSum& b) {
  const double norm_a = kronsum_frobenius_norm(a);
  if (norm_a == 0.0)
    throw std::invalid_argument("kronsum_relative_distance: zero reference");
  return kronsum_frobenius_distance(a, b) / norm_a;
}

}  // namespace kronprec
