#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "kronprec/deblur.hpp"
#include "kronprec/factor.hpp"
#include "kronprec/kron.hpp"
#include "kronprec/precision.hpp"
#include "kronprec/regparam.hpp"

using namespace kronprec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Plain-loop transcriptions of the selection criteria, kept independent of
// the library's vectorized evaluations.
double opt_ref(const Eigen::VectorXd& s, const Eigen::VectorXd& b,
               const Eigen::VectorXd& x, double lam) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double t = s(i) * b(i) / (s(i) * s(i) + lam * lam) - x(i);
    acc += t * t;
  }
  return acc;
}

double gcv_ref(const Eigen::VectorXd& s, const Eigen::VectorXd& b, double n,
               double lam) {
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double d = s(i) * s(i) + lam * lam;
    num += (b(i) / d) * (b(i) / d);
    den += 1.0 / d;
  }
  return n * num / (den * den);
}

double wgcv_ref(const Eigen::VectorXd& s, const Eigen::VectorXd& b, double n,
                double omega, double lam) {
  const double l2 = lam * lam;
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double d = s(i) * s(i) + l2;
    const double t = l2 * b(i) / d;
    num += t * t;
    den += ((1.0 - omega) * s(i) * s(i) + l2) / d;
  }
  if (den == 0.0) return kInf;
  return n * num / (den * den);
}

double resid2_ref(const Eigen::VectorXd& s, const Eigen::VectorXd& b,
                  double lam) {
  const double l2 = lam * lam;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double t = l2 * b(i) / (s(i) * s(i) + l2);
    acc += t * t;
  }
  return acc;
}

std::pair<double, double> bracket_ref(const Eigen::VectorXd& s) {
  const double smax = s.maxCoeff();
  return {std::max(s.minCoeff(), 1e-10 * smax), smax};
}

std::vector<double> log_grid(double lo, double hi, int count) {
  auto g = std::vector<double>(std::size_t(count));
  const double ulo = std::log(lo);
  const double uhi = std::log(hi);
  for (int k = 0; k < count; ++k)
    g[std::size_t(k)] = std::exp(ulo + (uhi - ulo) * k / (count - 1));
  return g;
}

SpectralData random_spectrum(std::uint64_t seed, int count, bool with_x) {
  Rng rng(seed);
  Eigen::VectorXd s(count), b(count), x(count);
  for (int i = 0; i < count; ++i) {
    s(i) = std::pow(10.0, rng.uniform(-5.0, 0.0));
    b(i) = rng.normal();
    x(i) = rng.normal();
  }
  std::sort(s.data(), s.data() + count, std::greater<double>());
  SpectralData sd;
  sd.sigma_hat = s;
  sd.b_hat = b;
  if (with_x) sd.x_hat = x;
  sd.n = count;
  return sd;
}

Eigen::MatrixXd dense_kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Eigen::MatrixXd random_matrix(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = rng.normal();
  return m;
}

// One grid cell of slack, in log space, between a searched minimizer and the
// grid scan's argmin.
void check_within_cell(double lambda, double lambda_grid, double step_log) {
  CAPTURE(lambda);
  CAPTURE(lambda_grid);
  CHECK(std::abs(std::log(lambda) - std::log(lambda_grid)) <=
        1.01 * step_log);
}

}  // namespace

TEST_CASE("scalar search building blocks") {
  SUBCASE("parabola minimum") {
    const auto r =
        minimize_1d([](double x) { return (x - 2.0) * (x - 2.0); }, 0.0, 5.0,
                    1e-10);
    CHECK(std::abs(r.x - 2.0) <= 1e-7);
    CHECK(r.fx <= 1e-13);
  }
  SUBCASE("cosine minimum") {
    const double pi = std::acos(-1.0);
    const auto r =
        minimize_1d([](double x) { return std::cos(x); }, 0.0, 2.0 * std::acos(-1.0),
                    1e-10);
    CHECK(std::abs(r.x - pi) <= 1e-6);
    CHECK(std::abs(r.fx + 1.0) <= 1e-12);
  }
  SUBCASE("infinite plateau is skipped") {
    const auto r = minimize_1d(
        [](double x) { return x < 1.0 ? kInf : (x - 2.0) * (x - 2.0); }, 0.0,
        5.0, 1e-10);
    CHECK(std::abs(r.x - 2.0) <= 1e-6);
  }
  SUBCASE("linear root") {
    const double x = find_root([](double t) { return t - 3.0; }, 0.0, 10.0,
                               1e-12);
    CHECK(std::abs(x - 3.0) <= 1e-9);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(minimize_1d([](double) { return 0.0; }, 1.0, 1.0, 1e-8),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        minimize_1d([](double) { return std::nan(""); }, 0.0, 1.0, 1e-8),
        std::runtime_error);
    CHECK_THROWS_AS(
        find_root([](double) { return 1.0; }, 0.0, 1.0, 1e-8),
        std::invalid_argument);
    CHECK_THROWS_AS(find_root([](double) { return 0.5; }, 2.0, 1.0, 1e-8),
                    std::invalid_argument);
  }
}

TEST_CASE("selector pinned values") {
  SUBCASE("single singular value pins the bracket") {
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd::Ones(1);
    sd.b_hat = Eigen::VectorXd::Ones(1);
    sd.x_hat = Eigen::VectorXd::Ones(1);
    sd.n = 1;
    const ParamChoice c = lambda_opt(sd);
    CHECK(c.lambda == 1.0);
    CHECK(c.flat_objective);
    CHECK(c.bracket_lo == 1.0);
    CHECK(c.bracket_hi == 1.0);

    (*sd.x_hat)(0) = 0.5;
    const ParamChoice h = lambda_opt(sd);
    CHECK(h.lambda == 1.0);
    CHECK(h.objective_value == 0.0);
  }
  SUBCASE("interior optimum of the error criterion") {
    // With sigma = [1, 1e-4], b = [1, 0], x = [1/2, 0] every term except the
    // first vanishes, so the optimum solves 1/(1+lam^2) = 1/2 at lam = 1,
    // now interior to the bracket [1e-4, 1].
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd(2);
    sd.sigma_hat << 1.0, 1e-4;
    sd.b_hat = Eigen::VectorXd(2);
    sd.b_hat << 1.0, 0.0;
    sd.x_hat = Eigen::VectorXd(2);
    (*sd.x_hat) << 0.5, 0.0;
    sd.n = 2;
    const ParamChoice c = lambda_opt(sd);
    CHECK(std::abs(c.lambda - 1.0) <= 1e-6);
    CHECK(!c.flat_objective);
    CHECK(c.lambda >= c.bracket_lo);
    CHECK(c.lambda <= c.bracket_hi);
  }
  SUBCASE("equal spectrum makes the cross-validation curve flat") {
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd::Constant(4, 0.7);
    sd.b_hat = Eigen::VectorXd(4);
    sd.b_hat << 1.0, -2.0, 0.5, 3.0;
    sd.n = 4;
    const ParamChoice c = gcv(sd);
    CHECK(c.lambda == 0.7);
    CHECK(c.flat_objective);
    CHECK(c.objective_value ==
          doctest::Approx(sd.b_hat.squaredNorm() / 4.0).epsilon(1e-12));
  }
  SUBCASE("two-point spectrum matches the grid scan") {
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd(2);
    sd.sigma_hat << 2.0, 1.0;
    sd.b_hat = Eigen::VectorXd::Ones(2);
    sd.n = 2;
    const ParamChoice c = gcv(sd);
    const auto [lo, hi] = bracket_ref(sd.sigma_hat);
    const auto grid = log_grid(lo, hi, 10000);
    double best = kInf;
    double best_lam = lo;
    for (const double lam : grid) {
      const double v = gcv_ref(sd.sigma_hat, sd.b_hat, 2.0, lam);
      if (v < best) {
        best = v;
        best_lam = lam;
      }
    }
    check_within_cell(c.lambda, best_lam,
                      (std::log(hi) - std::log(lo)) / 9999.0);
  }
  SUBCASE("direct formula values") {
    const SpectralData sd = random_spectrum(11, 12, true);
    for (const double lam : {0.1, 1.0, 10.0}) {
      CHECK(gcv_objective(sd, lam) ==
            doctest::Approx(gcv_ref(sd.sigma_hat, sd.b_hat, double(sd.n), lam))
                .epsilon(1e-12));
      CHECK(opt_objective(sd, lam) ==
            doctest::Approx(
                opt_ref(sd.sigma_hat, sd.b_hat, *sd.x_hat, lam))
                .epsilon(1e-12));
      CHECK(wgcv_objective(sd, 2.5, lam) ==
            doctest::Approx(
                wgcv_ref(sd.sigma_hat, sd.b_hat, double(sd.n), 2.5, lam))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("selectors agree with dense grid scans") {
  const int grid_points = 10000;
  // Scans the bracket each selection reports, which for wgcv with omega > 1
  // starts where the denominator trace turns positive.
  const auto scan = [&](const ParamChoice& c,
                        const std::function<double(double)>& f) {
    const double step =
        (std::log(c.bracket_hi) - std::log(c.bracket_lo)) / (grid_points - 1);
    double best = kInf, best_lam = c.bracket_lo;
    for (const double lam : log_grid(c.bracket_lo, c.bracket_hi, grid_points)) {
      const double v = f(lam);
      if (v < best) { best = v; best_lam = lam; }
    }
    check_within_cell(c.lambda, best_lam, step);
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SpectralData sd = random_spectrum(seed * 977, 20, true);
    CAPTURE(seed);
    scan(lambda_opt(sd), [&](double lam) {
      return opt_ref(sd.sigma_hat, sd.b_hat, *sd.x_hat, lam);
    });
    scan(gcv(sd), [&](double lam) {
      return gcv_ref(sd.sigma_hat, sd.b_hat, double(sd.n), lam);
    });
    scan(wgcv(sd, 2.5), [&](double lam) {
      return wgcv_ref(sd.sigma_hat, sd.b_hat, double(sd.n), 2.5, lam);
    });

    const auto [lo, hi] = bracket_ref(sd.sigma_hat);
    const ParamChoice w = wgcv(sd, 2.5);
    CHECK(w.bracket_hi == hi);
    CHECK(w.bracket_lo >= lo);
    CHECK(w.lambda >= w.bracket_lo);
    // On the reported bracket the denominator trace is nonnegative.
    double tr = 0.0;
    for (Eigen::Index i = 0; i < sd.n; ++i) {
      const double s2 = sd.sigma_hat(i) * sd.sigma_hat(i);
      const double l2 = w.bracket_lo * w.bracket_lo;
      tr += ((1.0 - 2.5) * s2 + l2) / (s2 + l2);
    }
    CHECK(tr >= -1e-9 * double(sd.n));
  }
}

TEST_CASE("wgcv weight restricts the search to the smoothing branch") {
  SUBCASE("the trace root is the search floor") {
    // sigma = [1, 1e-3 x3], omega = 3: the trace term sum((1-3)s^2+l^2)
    // /(s^2+l^2) crosses zero at lambda = sqrt(8)*1e-3.
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd::Constant(4, 1e-3);
    sd.sigma_hat(0) = 1.0;
    sd.b_hat = Eigen::VectorXd::Constant(4, 0.5);
    sd.n = 4;
    const ParamChoice c = wgcv(sd, 3.0);
    CHECK(c.bracket_lo ==
          doctest::Approx(std::sqrt(8.0) * 1e-3).epsilon(1e-4));
    CHECK(c.bracket_hi == 1.0);
    CHECK(c.lambda >= c.bracket_lo);
  }
  SUBCASE("weights above one smooth more on a deblurring problem") {
    PsfParams pp;
    pp.radius = 5.0;
    const Psf psf = make_psf(BlurKind::Defocus, 13, pp, 0);
    const TestProblem tp =
        make_test_problem(default_test_image(32), psf, 0.01, 1);
    const KronTerm term = nearest_kron(psf, 32);
    const KronSvdPreconditioner p = build_preconditioner(
        term.row_factor, term.col_factor, 1.0, PrecisionFormat::fp64());
    const SpectralData sd = make_spectral_data(p, tp.b);
    const double lg = gcv(sd).lambda;
    const double l3 = wgcv(sd, 3.0).lambda;
    const double l5 = wgcv(sd, 5.0).lambda;
    const double l8 = wgcv(sd, 8.0).lambda;
    CHECK(l3 >= lg);
    CHECK(l5 >= l3);
    CHECK(l8 >= l5);
  }
  SUBCASE("weights at or below one keep the full bracket") {
    const SpectralData sd = random_spectrum(4242, 16, false);
    const auto [lo, hi] = bracket_ref(sd.sigma_hat);
    for (const double om : {0.25, 1.0}) {
      const ParamChoice c = wgcv(sd, om);
      CHECK(c.bracket_lo == lo);
      CHECK(c.bracket_hi == hi);
    }
  }
}

TEST_CASE("discrepancy root finding") {
  SUBCASE("closed form") {
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd::Ones(1);
    sd.b_hat = Eigen::VectorXd::Constant(1, 2.0);
    sd.n = 1;
    const ParamChoice c = discrepancy(sd, 1.0, 1.0);
    CHECK(c.lambda == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.eta == 1.0);
    CHECK(c.noise_norm == 1.0);
  }
  SUBCASE("target larger than the data has no root") {
    SpectralData sd;
    sd.sigma_hat = Eigen::VectorXd::Ones(1);
    sd.b_hat = Eigen::VectorXd::Constant(1, 2.0);
    sd.n = 1;
    CHECK_THROWS_WITH_AS(discrepancy(sd, 3.0, 1.0),
                         doctest::Contains("too large"), NoRootError);
    CHECK_THROWS_WITH_AS(discrepancy(sd, 1e-30, 1.0),
                         doctest::Contains("too small"), NoRootError);
  }
  SUBCASE("matches a bisection-on-grid oracle") {
    for (std::uint64_t seed = 3; seed <= 10; ++seed) {
      const SpectralData sd = random_spectrum(seed * 131, 16, false);
      const auto [lo, hi] = bracket_ref(sd.sigma_hat);
      const double target =
          std::exp(0.35 * std::log(lo) + 0.65 * std::log(hi));
      const double eps = std::sqrt(resid2_ref(sd.sigma_hat, sd.b_hat, target));
      const ParamChoice c = discrepancy(sd, eps, 1.0);

      const int grid_points = 10000;
      const double blo = 1e-10 * sd.sigma_hat.maxCoeff();
      const auto grid = log_grid(blo, hi, grid_points);
      const double step = (std::log(hi) - std::log(blo)) / (grid_points - 1);
      int cell = -1;
      for (int k = 0; k + 1 < grid_points; ++k) {
        const double a = resid2_ref(sd.sigma_hat, sd.b_hat, grid[size_t(k)]) -
                         eps * eps;
        const double b =
            resid2_ref(sd.sigma_hat, sd.b_hat, grid[size_t(k) + 1]) -
            eps * eps;
        if (a <= 0.0 && b >= 0.0) {
          cell = k;
          break;
        }
      }
      CAPTURE(seed);
      REQUIRE(cell >= 0);
      CHECK(std::log(c.lambda) >= std::log(grid[size_t(cell)]) - 1.01 * step);
      CHECK(std::log(c.lambda) <=
            std::log(grid[size_t(cell) + 1]) + 1.01 * step);
    }
  }
  SUBCASE("root grows with the target") {
    const SpectralData sd = random_spectrum(555, 16, false);
    const auto [lo, hi] = bracket_ref(sd.sigma_hat);
    const double mid = std::exp(0.5 * (std::log(lo) + std::log(hi)));
    const double nn = std::sqrt(resid2_ref(sd.sigma_hat, sd.b_hat, mid)) / 6.0;
    const ParamChoice c2 = discrepancy(sd, nn, 2.0);
    const ParamChoice c5 = discrepancy(sd, nn, 5.0);
    CHECK(c5.lambda > c2.lambda);
  }
  SUBCASE("residual gap is nondecreasing") {
    for (std::uint64_t seed = 21; seed <= 25; ++seed) {
      const SpectralData sd = random_spectrum(seed, 10, false);
      const auto grid =
          log_grid(1e-8 * sd.sigma_hat.maxCoeff(),
                   10.0 * sd.sigma_hat.maxCoeff(), 64);
      double prev = -kInf;
      for (const double lam : grid) {
        const double d = discrepancy_gap(sd, 0.5, lam);
        CHECK(d >= prev - 1e-12 * std::max(1.0, std::abs(d)));
        prev = d;
      }
    }
  }
}

TEST_CASE("selector invariants") {
  SUBCASE("weight one reduces to plain cross validation") {
    const SpectralData sd = random_spectrum(7321, 24, false);
    const auto [lo, hi] = bracket_ref(sd.sigma_hat);
    for (const double lam : log_grid(lo, hi, 50)) {
      const double g = gcv_objective(sd, lam);
      CHECK(wgcv_objective(sd, 1.0, lam) ==
            doctest::Approx(g).epsilon(1e-12));
    }
    CHECK(wgcv(sd, 1.0).lambda ==
          doctest::Approx(gcv(sd).lambda).epsilon(1e-9));
  }
  SUBCASE("joint permutation of the triples does not move lambda") {
    const SpectralData sd = random_spectrum(9185, 18, true);
    std::vector<Eigen::Index> idx(18);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 eng(99);
    std::shuffle(idx.begin(), idx.end(), eng);
    SpectralData ps = sd;
    for (Eigen::Index i = 0; i < 18; ++i) {
      ps.sigma_hat(i) = sd.sigma_hat(idx[std::size_t(i)]);
      ps.b_hat(i) = sd.b_hat(idx[std::size_t(i)]);
      (*ps.x_hat)(i) = (*sd.x_hat)(idx[std::size_t(i)]);
    }
    CHECK(lambda_opt(ps).lambda ==
          doctest::Approx(lambda_opt(sd).lambda).epsilon(1e-6));
    CHECK(gcv(ps).lambda == doctest::Approx(gcv(sd).lambda).epsilon(1e-6));
    CHECK(wgcv(ps, 3.0).lambda ==
          doctest::Approx(wgcv(sd, 3.0).lambda).epsilon(1e-6));
    const double nn = 0.3 * sd.b_hat.norm();
    CHECK(discrepancy(ps, nn, 1.0).lambda ==
          doctest::Approx(discrepancy(sd, nn, 1.0).lambda).epsilon(1e-6));
  }
  SUBCASE("lambda always lands inside the bracket") {
    for (std::uint64_t seed = 41; seed <= 46; ++seed) {
      const SpectralData sd = random_spectrum(seed * 17, 14, true);
      for (const ParamChoice& c :
           {lambda_opt(sd), gcv(sd), wgcv(sd, 4.0)}) {
        CHECK(c.lambda >= c.bracket_lo);
        CHECK(c.lambda <= c.bracket_hi);
        CHECK(std::isfinite(c.objective_value));
      }
    }
  }
  SUBCASE("input validation") {
    SpectralData sd = random_spectrum(5, 6, false);
    CHECK_THROWS_AS(lambda_opt(sd), std::invalid_argument);
    CHECK_THROWS_AS(wgcv(sd, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(discrepancy(sd, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(discrepancy(sd, 1.0, 0.0), std::invalid_argument);
    SpectralData zero = sd;
    zero.sigma_hat.setZero();
    CHECK_THROWS_AS(gcv(zero), std::invalid_argument);
    SpectralData ragged = sd;
    ragged.b_hat = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(gcv(ragged), std::invalid_argument);
  }
  SUBCASE("method names") {
    CHECK(param_method_name(ParamMethod::Opt) == "opt");
    CHECK(param_method_name(ParamMethod::Gcv) == "gcv");
    CHECK(param_method_name(ParamMethod::Wgcv) == "wgcv");
    CHECK(param_method_name(ParamMethod::Discrepancy) == "discrepancy");
  }
}

TEST_CASE("filtered solution") {
  SUBCASE("identity operator") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(6, 6);
    const auto p = build_preconditioner(eye, eye, 1.0, PrecisionFormat::fp64());
    Rng rng(31);
    Eigen::VectorXd b(36);
    for (int i = 0; i < 36; ++i) b(i) = rng.normal();
    CHECK((filtered_solution(p, b, 0.0) - b).norm() <= 1e-13 * b.norm());
    CHECK((filtered_solution(p, b, 1.0) - 0.5 * b).norm() <=
          1e-13 * b.norm());
  }
  SUBCASE("matches the dense regularized solve") {
    const int n = 8;
    const Eigen::MatrixXd ar = random_matrix(n, 101);
    const Eigen::MatrixXd ac = random_matrix(n, 102);
    const auto p = build_preconditioner(ar, ac, 0.0, PrecisionFormat::fp64());
    Rng rng(103);
    Eigen::VectorXd b(n * n);
    for (int i = 0; i < n * n; ++i) b(i) = rng.normal();
    const Eigen::MatrixXd k = dense_kron(ar, ac);
    for (const double lam : {0.3, 1.0, 4.0}) {
      const Eigen::MatrixXd g =
          k.transpose() * k +
          lam * lam * Eigen::MatrixXd::Identity(n * n, n * n);
      const Eigen::VectorXd want = g.ldlt().solve(k.transpose() * b);
      const Eigen::VectorXd got = filtered_solution(p, b, lam);
      CHECK((got - want).norm() <= 1e-10 * want.norm());
    }
  }
  SUBCASE("zero spectrum needs positive lambda") {
    Eigen::MatrixXd sing = Eigen::MatrixXd::Identity(4, 4);
    sing(3, 3) = 0.0;
    const auto p =
        build_preconditioner(sing, sing, 0.5, PrecisionFormat::fp64());
    Eigen::VectorXd b = Eigen::VectorXd::Ones(16);
    CHECK_NOTHROW(filtered_solution(p, b, 0.5));
    CHECK_THROWS_AS(filtered_solution(p, b, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(filtered_solution(p, Eigen::VectorXd::Ones(4), 0.5),
                    std::invalid_argument);
  }
  SUBCASE("error-optimal lambda beats a dense lambda grid") {
    const int n = 8;
    const Psf psf = make_psf(BlurKind::Gaussian, 5, PsfParams{});
    const TestProblem tp =
        make_test_problem(default_test_image(n), psf, 0.01, 42);
    const KronTerm best = nearest_kron(psf, n);
    const auto p = build_preconditioner(best.row_factor, best.col_factor, 1.0,
                                        PrecisionFormat::fp64());
    const SpectralData sd = make_spectral_data(p, tp.b, tp.x_true);
    CHECK(sd.n == n * n);
    CHECK(sd.sigma_hat.size() == n * n);
    const ParamChoice c = lambda_opt(sd);
    const double xnorm = tp.x_true.norm();
    const double err_star =
        (filtered_solution(p, tp.b, c.lambda) - tp.x_true).norm() / xnorm;
    for (const double lam : log_grid(c.bracket_lo, c.bracket_hi, 1000)) {
      const double err =
          (filtered_solution(p, tp.b, lam) - tp.x_true).norm() / xnorm;
      CHECK(err_star <= err + 1e-12);
    }
  }
}
