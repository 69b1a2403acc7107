#include "kronprec/regparam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "kronprec/kron.hpp"

namespace kronprec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_spectral(const SpectralData& sd, bool need_x) {
  if (sd.sigma_hat.size() == 0)
    throw std::invalid_argument("spectral data: empty spectrum");
  if (sd.b_hat.size() != sd.sigma_hat.size())
    throw std::invalid_argument("spectral data: sigma and b lengths differ");
  if (sd.x_hat && sd.x_hat->size() != sd.sigma_hat.size())
    throw std::invalid_argument("spectral data: sigma and x lengths differ");
  if (need_x && !sd.x_hat)
    throw std::invalid_argument("selector requires x coordinates");
  if ((sd.sigma_hat.array() < 0.0).any())
    throw std::invalid_argument("spectral data: negative singular value");
  if (!(sd.sigma_hat.maxCoeff() > 0.0))
    throw std::invalid_argument("spectral data: all singular values zero");
}

std::pair<double, double> selector_bracket(const SpectralData& sd) {
  const double smax = sd.sigma_hat.maxCoeff();
  const double smin = sd.sigma_hat.minCoeff();
  return {std::max(smin, 1e-10 * smax), smax};
}

double probe(const std::function<double(double)>& f, double x,
             const char* who) {
  const double v = f(x);
  if (std::isnan(v))
    throw std::runtime_error(std::string(who) + ": objective is NaN");
  return v;
}

struct LogSearch {
  double lambda = 0.0;
  double value = 0.0;
  bool flat = false;
};

// Coarse log-grid pass to land in the global basin, then golden refinement
// inside the bracketing pair of grid cells. Infinite values (poles of the
// weighted-denominator criterion) are skipped.
LogSearch minimize_log(const std::function<double(double)>& g, double lo,
                       double hi) {
  if (hi <= lo * (1.0 + 1e-12)) return {lo, probe(g, lo, "minimize_log"), true};
  const double ulo = std::log(lo);
  const double uhi = std::log(hi);
  const int grid = 1024;
  int best_k = -1;
  double best_v = kInf;
  double vmin = kInf;
  double vmax = -kInf;
  for (int k = 0; k < grid; ++k) {
    const double u = ulo + (uhi - ulo) * k / (grid - 1);
    const double v = probe(g, std::exp(u), "minimize_log");
    if (!std::isfinite(v)) continue;
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
    if (v < best_v) {
      best_v = v;
      best_k = k;
    }
  }
  if (best_k < 0)
    throw std::runtime_error("minimize_log: objective infinite everywhere");
  const double scale = std::max({std::abs(vmin), std::abs(vmax), 1e-300});
  if (vmax - vmin <= 1e-14 * scale) {
    const double mid = std::exp(0.5 * (ulo + uhi));
    return {mid, probe(g, mid, "minimize_log"), true};
  }
  const double step = (uhi - ulo) / (grid - 1);
  const double a = std::max(ulo, ulo + (best_k - 1) * step);
  const double b = std::min(uhi, ulo + (best_k + 1) * step);
  const MinimizeResult r =
      minimize_1d([&](double u) { return g(std::exp(u)); }, a, b, 1e-12);
  return {std::exp(r.x), r.fx, false};
}

// Trace term of the wgcv denominator, sum of (1 - omega * filter factor);
// strictly increasing in lambda, negative left of its root when omega > 1.
double wgcv_trace(const SpectralData& sd, double omega, double lambda) {
  const auto s2 = sd.sigma_hat.array().square();
  return (((1.0 - omega) * s2 + lambda * lambda) / (s2 + lambda * lambda))
      .sum();
}

ParamChoice run_selector_on(double lo, double hi, ParamMethod method,
                            const std::function<double(double)>& g) {
  const LogSearch r = minimize_log(g, lo, hi);
  ParamChoice c;
  c.lambda = r.lambda;
  c.method = method;
  c.objective_value = r.value;
  c.bracket_lo = lo;
  c.bracket_hi = hi;
  c.flat_objective = r.flat;
  return c;
}

ParamChoice run_selector(const SpectralData& sd, ParamMethod method,
                         const std::function<double(double)>& g) {
  const auto [lo, hi] = selector_bracket(sd);
  return run_selector_on(lo, hi, method, g);
}

}  // namespace

SpectralData make_spectral_data(const KronSvdPreconditioner& p,
                                const Eigen::VectorXd& b) {
  SpectralData sd;
  sd.sigma_hat = approx_spectrum(p).sigma;
  sd.b_hat = project_b(p, b);
  sd.n = sd.sigma_hat.size();
  return sd;
}

SpectralData make_spectral_data(const KronSvdPreconditioner& p,
                                const Eigen::VectorXd& b,
                                const Eigen::VectorXd& x_true) {
  SpectralData sd = make_spectral_data(p, b);
  sd.x_hat = project_x(p, x_true);
  return sd;
}

std::string param_method_name(ParamMethod m) {
  switch (m) {
    case ParamMethod::Opt:
      return "opt";
    case ParamMethod::Gcv:
      return "gcv";
    case ParamMethod::Wgcv:
      return "wgcv";
    case ParamMethod::Discrepancy:
      return "discrepancy";
  }
  throw std::invalid_argument("unknown parameter method");
}

MinimizeResult minimize_1d(const std::function<double(double)>& f, double lo,
                           double hi, double tol) {
  if (!(lo < hi)) throw std::invalid_argument("minimize_1d: requires lo < hi");
  if (!(tol > 0.0))
    throw std::invalid_argument("minimize_1d: tol must be positive");
  constexpr double invphi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = probe(f, c, "minimize_1d");
  double fd = probe(f, d, "minimize_1d");
  for (int it = 0; it < 300 && b - a > tol * (1.0 + std::min(std::abs(a),
                                                             std::abs(b)));
       ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      if (c <= a || c >= d) break;
      fc = probe(f, c, "minimize_1d");
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      if (d <= c || d >= b) break;
      fd = probe(f, d, "minimize_1d");
    }
  }
  return fc < fd ? MinimizeResult{c, fc} : MinimizeResult{d, fd};
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol) {
  if (!(lo < hi)) throw std::invalid_argument("find_root: requires lo < hi");
  if (!(tol > 0.0))
    throw std::invalid_argument("find_root: tol must be positive");
  double flo = probe(f, lo, "find_root");
  double fhi = probe(f, hi, "find_root");
  if (!std::isfinite(flo) || !std::isfinite(fhi))
    throw std::runtime_error("find_root: endpoint value not finite");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::invalid_argument("find_root: no sign change over [lo, hi]");
  double a = lo;
  double b = hi;
  while (b - a > tol * (1.0 + 0.5 * (std::abs(a) + std::abs(b)))) {
    const double m = a + 0.5 * (b - a);
    if (m <= a || m >= b) break;
    const double fm = probe(f, m, "find_root");
    if (!std::isfinite(fm))
      throw std::runtime_error("find_root: function value not finite");
    if (fm == 0.0) return m;
    if ((fm > 0.0) == (flo > 0.0)) {
      a = m;
      flo = fm;
    } else {
      b = m;
    }
  }
  return a + 0.5 * (b - a);
}

double opt_objective(const SpectralData& sd, double lambda) {
  if (!sd.x_hat)
    throw std::invalid_argument("opt_objective: x coordinates missing");
  const auto s = sd.sigma_hat.array();
  const auto d = s.square() + lambda * lambda;
  return (s * sd.b_hat.array() / d - sd.x_hat->array()).square().sum();
}

double gcv_objective(const SpectralData& sd, double lambda) {
  const Eigen::ArrayXd d = sd.sigma_hat.array().square() + lambda * lambda;
  const double num = double(sd.n) * (sd.b_hat.array() / d).square().sum();
  const double den = d.inverse().sum();
  return num / (den * den);
}

double wgcv_objective(const SpectralData& sd, double omega, double lambda) {
  const double l2 = lambda * lambda;
  const Eigen::ArrayXd s2 = sd.sigma_hat.array().square();
  const Eigen::ArrayXd d = s2 + l2;
  const double num =
      double(sd.n) * (l2 * sd.b_hat.array() / d).square().sum();
  const double den = (((1.0 - omega) * s2 + l2) / d).sum();
  if (den == 0.0) return kInf;
  return num / (den * den);
}

double discrepancy_gap(const SpectralData& sd, double epsilon, double lambda) {
  const double l2 = lambda * lambda;
  const Eigen::ArrayXd d = sd.sigma_hat.array().square() + l2;
  return (l2 * sd.b_hat.array() / d).square().sum() - epsilon * epsilon;
}

ParamChoice lambda_opt(const SpectralData& sd) {
  check_spectral(sd, true);
  return run_selector(sd, ParamMethod::Opt,
                      [&](double l) { return opt_objective(sd, l); });
}

ParamChoice gcv(const SpectralData& sd) {
  check_spectral(sd, false);
  return run_selector(sd, ParamMethod::Gcv,
                      [&](double l) { return gcv_objective(sd, l); });
}

ParamChoice wgcv(const SpectralData& sd, double omega) {
  check_spectral(sd, false);
  if (!(omega > 0.0))
    throw std::invalid_argument("wgcv: omega must be positive");
  auto [lo, hi] = selector_bracket(sd);
  // For omega > 1 the denominator's trace term starts negative and crosses
  // zero once; left of that crossing the objective decays artificially
  // toward the bracket floor, so a weight meant to smooth would pick the
  // least smoothing available. Restrict the search to the branch where the
  // trace is positive, which is where the weighting behaves as designed:
  // lambda grows with omega. The reported bracket_lo is the restricted one.
  if (omega > 1.0 && wgcv_trace(sd, omega, lo) < 0.0 &&
      wgcv_trace(sd, omega, hi) > 0.0) {
    double a = std::log(lo);
    double b = std::log(hi);
    while (b - a > 1e-13 * (1.0 + std::abs(b))) {
      const double m = 0.5 * (a + b);
      (wgcv_trace(sd, omega, std::exp(m)) > 0.0 ? b : a) = m;
    }
    lo = std::exp(b);
  }
  ParamChoice c =
      run_selector_on(lo, hi, ParamMethod::Wgcv,
                      [&](double l) { return wgcv_objective(sd, omega, l); });
  c.omega = omega;
  return c;
}

ParamChoice discrepancy(const SpectralData& sd, double noise_norm,
                        double eta) {
  check_spectral(sd, false);
  if (!(noise_norm > 0.0))
    throw std::invalid_argument("discrepancy: noise_norm must be positive");
  if (!(eta > 0.0))
    throw std::invalid_argument("discrepancy: eta must be positive");
  const double eps = eta * noise_norm;
  const double smax = sd.sigma_hat.maxCoeff();
  const double lo = 1e-10 * smax;
  const double hi = smax;
  const double glo = discrepancy_gap(sd, eps, lo);
  const double ghi = discrepancy_gap(sd, eps, hi);
  if (ghi < 0.0)
    throw NoRootError(
        "no root; eta * noise_norm too large: the residual cannot reach it "
        "inside the bracket");
  if (glo > 0.0)
    throw NoRootError(
        "no root; eta * noise_norm too small: the residual exceeds it "
        "everywhere in the bracket");
  double lambda;
  if (glo == 0.0)
    lambda = lo;
  else if (ghi == 0.0)
    lambda = hi;
  else
    lambda = std::exp(find_root(
        [&](double u) { return discrepancy_gap(sd, eps, std::exp(u)); },
        std::log(lo), std::log(hi), 1e-12));
  ParamChoice c;
  c.lambda = lambda;
  c.method = ParamMethod::Discrepancy;
  c.eta = eta;
  c.noise_norm = noise_norm;
  c.objective_value = discrepancy_gap(sd, eps, lambda);
  c.bracket_lo = lo;
  c.bracket_hi = hi;
  return c;
}

Eigen::VectorXd filtered_solution(const KronSvdPreconditioner& p,
                                  const Eigen::VectorXd& b, double lambda) {
  if (b.size() != Eigen::Index(p.n) * p.n)
    throw std::invalid_argument("filtered_solution: length mismatch");
  if (lambda < 0.0)
    throw std::invalid_argument("filtered_solution: negative lambda");
  const Eigen::MatrixXd bhat =
      p.svd_c.u.transpose() * unvec(b, p.n) * p.svd_r.u;
  const double l2 = lambda * lambda;
  Eigen::MatrixXd coef(p.n, p.n);
  for (int j = 0; j < p.n; ++j)
    for (int i = 0; i < p.n; ++i) {
      const double s = p.svd_r.s(j) * p.svd_c.s(i);
      const double den = s * s + l2;
      if (den == 0.0)
        throw std::invalid_argument(
            "filtered_solution: zero singular value with lambda = 0");
      coef(i, j) = s / den * bhat(i, j);
    }
  return vec(p.svd_c.v * coef * p.svd_r.v.transpose());
}

}  // namespace kronprec
