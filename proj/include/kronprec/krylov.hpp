#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "kronprec/factor.hpp"
#include "kronprec/kron.hpp"

namespace kronprec {

struct SolverOptions {
  double lambda = 0.0;
  int max_iterations = 100;
  double rel_residual_tol = 1e-8;
  std::optional<Eigen::VectorXd> x_true;
  bool track_search_direction_orthogonality = false;
  // Keep a copy of every iterate; used by diagnostics and trajectory tests.
  bool record_iterates = false;
};

// Row k describes the state after k iterations; row 0 is the zero starting
// point. residual_norm is the recurrence residual of the regularized normal
// equations, ||A^T b - (A^T A + lambda^2 I) x_k||. work_units charges the
// model cost of one iteration: 2 structured products for every solver plus
// 1/4 for a preconditioned one.
struct ConvergenceHistory {
  std::vector<double> relative_error;  // only when x_true was supplied
  std::vector<double> residual_norm;
  std::vector<double> work_units;  // cumulative, strictly increasing
  // Cosine between each new residual and the previous preconditioned
  // residual, when tracked; zero in exact arithmetic, so growth signals loss
  // of conjugacy.
  std::vector<double> residual_cosines;
  std::vector<Eigen::VectorXd> iterates;  // when record_iterates
  int iterations_used = 0;
  bool converged = false;
  std::string abort_reason;  // empty on a clean run
  int msolve_count = 0;
};

struct SolveResult {
  Eigen::VectorXd x;
  ConvergenceHistory history;
};

// (A^T A + lambda^2 I) p through two structured applications.
Eigen::VectorXd normal_matvec(const KroneckerSum& a, double lambda,
                              const Eigen::VectorXd& p);

// Conjugate gradients on the regularized least-squares stack [A; lambda I],
// algebraically the same iteration as CG on the normal equations but with
// the better-behaved residual recurrences. Baseline solver: 2 work units per
// iteration.
SolveResult cgls(const KroneckerSum& a, const Eigen::VectorXd& b,
                 const SolverOptions& opts);

// Preconditioned CG on the regularized normal equations with the
// Fletcher-Reeves update beta = (z_new . r_new) / (z . r). The preconditioner
// solve runs in its storage format; everything else stays in double.
SolveResult pcg(const KroneckerSum& a, const Eigen::VectorXd& b,
                const KronSvdPreconditioner& m, const SolverOptions& opts);

// Flexible variant: Polak-Ribiere update beta = (z_new . (r_new - r)) /
// (z . r), which tolerates a preconditioner that is not quite a fixed linear
// map, at the cost of storing the previous residual.
SolveResult fpcg(const KroneckerSum& a, const Eigen::VectorXd& b,
                 const KronSvdPreconditioner& m, const SolverOptions& opts);

// First iteration whose relative error is within tol of the run's minimum.
// Requires relative-error tracking.
int plateau_iteration(const ConvergenceHistory& h, double tol = 0.01);

// Cost verdict: preconditioning pays when the preconditioned run plateaus in
// under (8/9) of the baseline's plateau iterations, each iteration costing
// 2.25 versus 2 work units.
struct WorkReport {
  int m_precond = 0;
  int m_baseline = 0;
  double threshold = 0.0;
  bool preconditioning_pays = false;
  double plateau_tolerance = 0.01;
};

WorkReport work_report(const ConvergenceHistory& h_precond,
                       const ConvergenceHistory& h_baseline,
                       double plateau_tol = 0.01);

}  // namespace kronprec
