#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kronprec/lpblas.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace kronprec;

namespace {

double uniform(std::mt19937_64& eng, double lo, double hi) {
  const double u = double(eng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Eigen::VectorXd random_vec(std::mt19937_64& eng, int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(eng, lo, hi);
  return v;
}

// Left-to-right sequential summation with every partial sum rounded, for
// contrast with the pairwise tree.
double sequential_lp_sum(const Eigen::VectorXd& z, const PrecisionFormat& fmt) {
  double acc = z(0);
  for (Eigen::Index i = 1; i < z.size(); ++i)
    acc = round_value(acc + z(i), fmt);
  return acc;
}

}  // namespace

TEST_CASE("pairwise_sum on pinned inputs") {
  const auto h = PrecisionFormat::fp16();

  CHECK(pairwise_sum(Eigen::VectorXd::Ones(8), h) == 8.0);

  Eigen::VectorXd a(8);
  a << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(pairwise_sum(a, h) == 36.0);

  Eigen::VectorXd b(4);
  b << 2048, 2, 1, 1;
  CHECK(pairwise_sum(b, h) == 2052.0);

  // The tree shape matters: sequential accumulation loses the unit addends
  // to the tie rule, the pairwise tree keeps them.
  Eigen::VectorXd c(4);
  c << 2048, 1, 1, 1;
  CHECK(sequential_lp_sum(c, h) == 2048.0);
  CHECK(pairwise_sum(c, h) == 2050.0);

  Eigen::VectorXd one(1);
  one << 7.0;
  CHECK(pairwise_sum(one, h) == 7.0);

  CHECK_THROWS_AS((void)pairwise_sum(Eigen::VectorXd(0), h),
                  std::invalid_argument);
}

TEST_CASE("rounding-call budgets") {
  const auto h = PrecisionFormat::fp16();
  std::mt19937_64 eng(777);

  for (int n : {1, 2, 3, 5, 8, 64, 100, 1024}) {
    CAPTURE(n);
    const Eigen::VectorXd z = round_array(random_vec(eng, n, -1.0, 1.0), h);
    const int stages = n == 1 ? 0 : int(std::ceil(std::log2(double(n))));

    RoundCallSession s1;
    (void)pairwise_sum(z, h);
    CHECK(s1.count() == std::uint64_t(stages));

    RoundCallSession s2;
    (void)lp_dot(z, z, h);
    CHECK(s2.count() == std::uint64_t(stages + 1));
  }

  SUBCASE("pinned budgets for power-of-two lengths") {
    RoundCallSession s;
    (void)lp_dot(random_vec(eng, 8, -1, 1), random_vec(eng, 8, -1, 1), h);
    CHECK(s.count() == 4);
    RoundCallSession s2;
    (void)lp_dot(random_vec(eng, 1024, -1, 1), random_vec(eng, 1024, -1, 1), h);
    CHECK(s2.count() == 11);
  }

  SUBCASE("double-covering formats tally nothing") {
    const auto d = PrecisionFormat::fp64();
    const Eigen::VectorXd x = random_vec(eng, 100, -1, 1);
    RoundCallSession s;
    const double got = lp_dot(x, x, d);
    CHECK(s.count() == 0);
    CHECK(got == doctest::Approx(x.dot(x)).epsilon(1e-14));
  }
}

TEST_CASE("lp_dot values and error bound") {
  const auto h = PrecisionFormat::fp16();

  Eigen::VectorXd e3 = Eigen::VectorXd::Zero(8);
  e3(2) = 1.0;
  Eigen::VectorXd up(8);
  up << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(lp_dot(e3, up, h) == 3.0);

  CHECK(lp_dot(Eigen::VectorXd::Ones(16), Eigen::VectorXd::Ones(16), h) == 16.0);

  CHECK_THROWS_AS((void)lp_dot(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4), h),
                  std::invalid_argument);

  std::mt19937_64 eng(4242);
  for (const auto& fmt : {PrecisionFormat::fp16(), PrecisionFormat::bfloat16()}) {
    CAPTURE(fmt.name);
    for (int n : {10, 64, 100, 1000}) {
      CAPTURE(n);
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd x = random_vec(eng, n, -1.0, 1.0);
        const Eigen::VectorXd y = random_vec(eng, n, -1.0, 1.0);
        const double exact = x.dot(y);
        const double got = lp_dot(x, y, fmt);
        const double stages = std::ceil(std::log2(double(n)));
        const double bound = (stages + 2.0) * fmt.unit_roundoff() *
                             x.cwiseProduct(y).cwiseAbs().sum();
        REQUIRE(std::fabs(got - exact) <= bound);
      }
    }
  }
}

TEST_CASE("lp_matvec values and rowwise bound") {
  const auto h = PrecisionFormat::fp16();
  std::mt19937_64 eng(999);

  const Eigen::VectorXd v = random_vec(eng, 8, -2.0, 2.0);
  CHECK(lp_matvec(Eigen::MatrixXd::Identity(8, 8), v, h) == round_array(v, h));

  Eigen::MatrixXd a(5, 5);
  for (int j = 0; j < 5; ++j) a.col(j) = random_vec(eng, 5, -2.0, 2.0);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(5);
  e2(1) = 1.0;
  CHECK(lp_matvec(a, e2, h) == round_array(Eigen::VectorXd(a.col(1)), h));

  CHECK_THROWS_AS((void)lp_matvec(a, Eigen::VectorXd::Ones(4), h),
                  std::invalid_argument);

  Eigen::MatrixXd b(16, 16);
  for (int j = 0; j < 16; ++j) b.col(j) = random_vec(eng, 16, -1.0, 1.0);
  const Eigen::VectorXd w = random_vec(eng, 16, -1.0, 1.0);
  const Eigen::VectorXd got = lp_matvec(b, w, h);
  const Eigen::VectorXd exact = b * w;
  const double stages = std::ceil(std::log2(16.0));
  for (int i = 0; i < 16; ++i) {
    const double bound = (stages + 2.0) * h.unit_roundoff() *
                         (b.row(i).transpose().cwiseProduct(w)).cwiseAbs().sum();
    REQUIRE(std::fabs(got(i) - exact(i)) <= bound);
  }

  RoundCallSession s;
  (void)lp_matvec(b, w, h);
  CHECK(s.count() == 5);
}

TEST_CASE("lp_matmul values and consistency with lp_matvec") {
  const auto h = PrecisionFormat::fp16();
  std::mt19937_64 eng(2468);

  Eigen::MatrixXd b(4, 6);
  for (int j = 0; j < 6; ++j) b.col(j) = random_vec(eng, 4, -3.0, 3.0);
  CHECK(lp_matmul(Eigen::MatrixXd::Identity(4, 4), b, h) == round_array(b, h));

  Eigen::MatrixXd a(3, 5);
  for (int j = 0; j < 5; ++j) a.col(j) = random_vec(eng, 3, -3.0, 3.0);
  CHECK(lp_matmul(a, Eigen::MatrixXd::Identity(5, 5), h) == round_array(a, h));

  Eigen::MatrixXd p(2, 2), q(2, 2), expect(2, 2);
  p << 1, 2, 3, 4;
  q << 5, 6, 7, 8;
  expect << 19, 22, 43, 50;
  CHECK(lp_matmul(p, q, h) == expect);

  CHECK_THROWS_AS((void)lp_matmul(p, Eigen::MatrixXd::Ones(3, 2), h),
                  std::invalid_argument);

  SUBCASE("single-column product is bit-identical to lp_matvec") {
    for (int k : {4, 17, 32}) {
      CAPTURE(k);
      Eigen::MatrixXd m(7, k);
      for (int j = 0; j < k; ++j) m.col(j) = random_vec(eng, 7, -1.0, 1.0);
      const Eigen::VectorXd v = random_vec(eng, k, -1.0, 1.0);

      RoundCallSession s1;
      const Eigen::VectorXd via_matvec = lp_matvec(m, v, h);
      const std::uint64_t c1 = s1.count();

      RoundCallSession s2;
      const Eigen::MatrixXd via_matmul = lp_matmul(m, v, h);
      const std::uint64_t c2 = s2.count();

      REQUIRE(via_matmul.cols() == 1);
      REQUIRE(Eigen::VectorXd(via_matmul.col(0)) == via_matvec);
      REQUIRE(c1 == c2);
    }
  }

  SUBCASE("exact when all intermediates are representable") {
    std::mt19937_64 ieng(13579);
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::MatrixXd x(6, 6), y(6, 6);
      for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) {
          x(i, j) = std::floor(uniform(ieng, -8.0, 9.0));
          y(i, j) = std::floor(uniform(ieng, -8.0, 9.0));
        }
      REQUIRE(lp_matmul(x, y, h) == Eigen::MatrixXd(x * y));
    }
  }
}
