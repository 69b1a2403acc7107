#include "kronprec/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kronprec {

namespace {

void check_common(const KroneckerSum& a, const Eigen::VectorXd& b,
                  const SolverOptions& opts) {
  const Eigen::Index nn = Eigen::Index(a.n) * a.n;
  if (b.size() != nn)
    throw std::invalid_argument("solver: right-hand side length mismatch");
  if (opts.max_iterations < 1)
    throw std::invalid_argument("solver: max_iterations must be at least 1");
  if (!(opts.rel_residual_tol > 0.0))
    throw std::invalid_argument("solver: tolerance must be positive");
  if (opts.x_true) {
    if (opts.x_true->size() != nn)
      throw std::invalid_argument("solver: x_true length mismatch");
    if (opts.x_true->norm() == 0.0)
      throw std::invalid_argument("solver: x_true must be nonzero");
  }
}

struct Recorder {
  const SolverOptions& opts;
  double per_iter_work;
  double xnorm = 0.0;
  ConvergenceHistory h;

  Recorder(const SolverOptions& o, double work)
      : opts(o), per_iter_work(work) {
    if (opts.x_true) xnorm = opts.x_true->norm();
  }

  void row(int k, const Eigen::VectorXd& x, double resid) {
    if (opts.x_true)
      h.relative_error.push_back((x - *opts.x_true).norm() / xnorm);
    h.residual_norm.push_back(resid);
    h.work_units.push_back(per_iter_work * k);
    if (opts.record_iterates) h.iterates.push_back(x);
    h.iterations_used = k;
  }

  void cosine(const Eigen::VectorXd& cur, const Eigen::VectorXd& prev) {
    if (!opts.track_search_direction_orthogonality) return;
    const double denom = cur.norm() * prev.norm();
    h.residual_cosines.push_back(denom > 0.0
                                     ? std::abs(cur.dot(prev)) / denom
                                     : 0.0);
  }
};

SolveResult pcg_core(const KroneckerSum& a, const Eigen::VectorXd& b,
                     const KronSvdPreconditioner& m, const SolverOptions& opts,
                     bool flexible) {
  check_common(a, b, opts);
  if (Eigen::Index(m.n) * m.n != b.size())
    throw std::invalid_argument("solver: preconditioner size mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = kronsum_apply_transpose(a, b);
  const double r0 = r.norm();
  Recorder rec(opts, 2.25);
  rec.row(0, x, r0);
  if (r0 == 0.0) {
    rec.h.converged = true;
    return {std::move(x), std::move(rec.h)};
  }
  Eigen::VectorXd z = precond_solve(m, r);
  rec.h.msolve_count = 1;
  if (!z.allFinite()) {
    rec.h.abort_reason = "non-finite preconditioner output before iteration 1";
    return {std::move(x), std::move(rec.h)};
  }
  Eigen::VectorXd p = z;
  double rho = r.dot(z);
  if (!std::isfinite(rho) || rho <= 0.0) {
    rec.h.abort_reason = "preconditioner lost positivity before iteration 1";
    return {std::move(x), std::move(rec.h)};
  }
  Eigen::VectorXd r_prev;
  const bool keep_prev = flexible;

  for (int k = 1; k <= opts.max_iterations; ++k) {
    const Eigen::VectorXd q = normal_matvec(a, opts.lambda, p);
    const double pq = p.dot(q);
    if (!std::isfinite(pq)) {
      rec.h.abort_reason =
          "non-finite curvature at iteration " + std::to_string(k);
      break;
    }
    if (pq <= 0.0) {
      rec.h.abort_reason =
          "curvature breakdown at iteration " + std::to_string(k);
      break;
    }
    const double alpha = rho / pq;
    if (keep_prev) r_prev = r;
    x += alpha * p;
    r -= alpha * q;
    const double rnorm = r.norm();
    if (!std::isfinite(rnorm)) {
      rec.h.abort_reason =
          "non-finite residual at iteration " + std::to_string(k);
      break;
    }
    if (opts.track_search_direction_orthogonality) rec.cosine(r, z);
    rec.row(k, x, rnorm);
    if (rnorm <= opts.rel_residual_tol * r0) {
      rec.h.converged = true;
      break;
    }
    if (k == opts.max_iterations) break;
    z = precond_solve(m, r);
    ++rec.h.msolve_count;
    if (!z.allFinite()) {
      rec.h.abort_reason = "non-finite preconditioner output at iteration " +
                           std::to_string(k) +
                           " (overflow in the storage format)";
      break;
    }
    const double rz = r.dot(z);
    const double beta = flexible ? z.dot(r - r_prev) / rho : rz / rho;
    if (!std::isfinite(beta) || !std::isfinite(rz)) {
      rec.h.abort_reason =
          "non-finite inner product at iteration " + std::to_string(k);
      break;
    }
    p = z + beta * p;
    rho = rz;
    if (rho <= 0.0) {
      rec.h.abort_reason =
          "preconditioner lost positivity at iteration " + std::to_string(k);
      break;
    }
  }
  return {std::move(x), std::move(rec.h)};
}

}  // namespace

Eigen::VectorXd normal_matvec(const KroneckerSum& a, double lambda,
                              const Eigen::VectorXd& p) {
  if (p.size() != Eigen::Index(a.n) * a.n)
    throw std::invalid_argument("normal_matvec: length mismatch");
  return kronsum_apply_transpose(a, kronsum_apply(a, p)) +
         (lambda * lambda) * p;
}

SolveResult cgls(const KroneckerSum& a, const Eigen::VectorXd& b,
                 const SolverOptions& opts) {
  check_common(a, b, opts);
  const double l2 = opts.lambda * opts.lambda;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd rt = b;
  Eigen::VectorXd s = kronsum_apply_transpose(a, rt);
  const double s0 = s.norm();
  Recorder rec(opts, 2.0);
  rec.row(0, x, s0);
  if (s0 == 0.0) {
    rec.h.converged = true;
    return {std::move(x), std::move(rec.h)};
  }
  Eigen::VectorXd p = s;
  double gamma = s.squaredNorm();
  Eigen::VectorXd s_prev = s;

  for (int k = 1; k <= opts.max_iterations; ++k) {
    const Eigen::VectorXd q = kronsum_apply(a, p);
    const double delta = q.squaredNorm() + l2 * p.squaredNorm();
    if (!std::isfinite(delta)) {
      rec.h.abort_reason =
          "non-finite curvature at iteration " + std::to_string(k);
      break;
    }
    if (delta == 0.0) {
      rec.h.abort_reason =
          "curvature breakdown at iteration " + std::to_string(k);
      break;
    }
    const double alpha = gamma / delta;
    x += alpha * p;
    rt -= alpha * q;
    const Eigen::VectorXd snew = kronsum_apply_transpose(a, rt) - l2 * x;
    const double snorm = snew.norm();
    if (!std::isfinite(snorm)) {
      rec.h.abort_reason =
          "non-finite residual at iteration " + std::to_string(k);
      break;
    }
    rec.cosine(snew, s_prev);
    rec.row(k, x, snorm);
    if (snorm <= opts.rel_residual_tol * s0) {
      rec.h.converged = true;
      break;
    }
    const double gnew = snew.squaredNorm();
    const double beta = gnew / gamma;
    p = snew + beta * p;
    gamma = gnew;
    if (opts.track_search_direction_orthogonality) s_prev = snew;
  }
  return {std::move(x), std::move(rec.h)};
}

SolveResult pcg(const KroneckerSum& a, const Eigen::VectorXd& b,
                const KronSvdPreconditioner& m, const SolverOptions& opts) {
  return pcg_core(a, b, m, opts, false);
}

SolveResult fpcg(const KroneckerSum& a, const Eigen::VectorXd& b,
                 const KronSvdPreconditioner& m, const SolverOptions& opts) {
  return pcg_core(a, b, m, opts, true);
}

int plateau_iteration(const ConvergenceHistory& h, double tol) {
  if (h.relative_error.empty())
    throw std::invalid_argument(
        "plateau_iteration: run has no relative-error track");
  if (!(tol >= 0.0))
    throw std::invalid_argument("plateau_iteration: negative tolerance");
  const double best =
      *std::min_element(h.relative_error.begin(), h.relative_error.end());
  for (std::size_t k = 0; k < h.relative_error.size(); ++k)
    if (h.relative_error[k] <= (1.0 + tol) * best) return int(k);
  return int(h.relative_error.size()) - 1;
}

WorkReport work_report(const ConvergenceHistory& h_precond,
                       const ConvergenceHistory& h_baseline,
                       double plateau_tol) {
  WorkReport w;
  w.plateau_tolerance = plateau_tol;
  w.m_precond = plateau_iteration(h_precond, plateau_tol);
  w.m_baseline = plateau_iteration(h_baseline, plateau_tol);
  w.threshold = (8.0 * w.m_baseline) / 9.0;
  w.preconditioning_pays = double(w.m_precond) < w.threshold;
  return w;
}

}  // namespace kronprec
