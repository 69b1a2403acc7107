#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "kronprec/factor.hpp"

namespace kronprec {

// Spectral view of a problem through the approximate operator A_hat: its
// singular values together with the coordinates of b (and optionally x_true)
// in the corresponding singular bases. Selectors only read the multiset of
// (sigma, b, x) triples, so the order does not matter as long as the vectors
// stay aligned.
struct SpectralData {
  Eigen::VectorXd sigma_hat;
  Eigen::VectorXd b_hat;
  std::optional<Eigen::VectorXd> x_hat;
  Eigen::Index n = 0;
};

SpectralData make_spectral_data(const KronSvdPreconditioner& p,
                                const Eigen::VectorXd& b);
SpectralData make_spectral_data(const KronSvdPreconditioner& p,
                                const Eigen::VectorXd& b,
                                const Eigen::VectorXd& x_true);

enum class ParamMethod { Opt, Gcv, Wgcv, Discrepancy };

std::string param_method_name(ParamMethod m);

struct ParamChoice {
  double lambda = 0.0;
  ParamMethod method = ParamMethod::Gcv;
  double omega = 0.0;       // wgcv
  double eta = 0.0;         // discrepancy
  double noise_norm = 0.0;  // discrepancy
  double objective_value = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool flat_objective = false;
};

// Thrown by discrepancy() when the residual gap has no sign change over the
// search bracket; the message says whether the target was too large or too
// small to reach.
struct NoRootError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MinimizeResult {
  double x = 0.0;
  double fx = 0.0;
};

// Golden-section search on [lo, hi]; unimodality is assumed, not verified.
// Infinite objective values are treated as worse than any finite value so
// isolated poles are skipped; NaN aborts with an exception.
MinimizeResult minimize_1d(const std::function<double(double)>& f, double lo,
                           double hi, double tol);

// Plain bisection; requires a sign change over [lo, hi]. Stops when the
// bracket width drops below tol * (1 + |x|).
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol);

// Pointwise evaluations of the selection criteria. All take lambda > 0 when
// the spectrum contains zeros.
double opt_objective(const SpectralData& sd, double lambda);
double gcv_objective(const SpectralData& sd, double lambda);
double wgcv_objective(const SpectralData& sd, double omega, double lambda);
// Squared residual-norm surplus over epsilon^2; nondecreasing in lambda.
double discrepancy_gap(const SpectralData& sd, double epsilon, double lambda);

// Each selector searches lambda over [max(sigma_min, 1e-10 sigma_max),
// sigma_max] in log scale. A degenerate or numerically flat objective yields
// the bracket midpoint with flat_objective set. For omega > 1 wgcv starts
// the search where its denominator's trace term turns positive, skipping the
// spurious decay toward the bracket floor on the other side of that sign
// change; ParamChoice reports the bracket actually searched.
ParamChoice lambda_opt(const SpectralData& sd);
ParamChoice gcv(const SpectralData& sd);
ParamChoice wgcv(const SpectralData& sd, double omega);
// Solves ||residual(lambda)||^2 = (eta * noise_norm)^2; throws NoRootError
// when no bracketed root exists.
ParamChoice discrepancy(const SpectralData& sd, double noise_norm, double eta);

// Direct Tikhonov solution for the approximate operator: x = (V_r (x) V_c)
// diag(sigma / (sigma^2 + lambda^2)) (U_r (x) U_c)^T b, evaluated through the
// small factors in double precision. Serves as the solver oracle and as the
// reconstruction map for parameter-rule evaluation.
Eigen::VectorXd filtered_solution(const KronSvdPreconditioner& p,
                                  const Eigen::VectorXd& b, double lambda);

}  // namespace kronprec
