#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>

#include "kronprec/kron.hpp"

namespace kronprec {

// Deterministic random source; all draws are hand-rolled on top of a fixed
// engine so streams are reproducible across platforms and library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

enum class BlurKind { Gaussian, Defocus, Motion, Shake, Speckle };

std::string blur_kind_name(BlurKind kind);
BlurKind parse_blur_kind(const std::string& name);

struct PsfParams {
  double sigma = 2.0;      // gaussian
  double radius = 3.0;     // defocus
  int length = 5;          // motion
  int steps = 64;          // shake
  int blob_count = 10;     // speckle
  double blob_sigma = 1.0; // speckle
};

// Discrete point-spread function: nonnegative, sums to one, with the
// point-source location at (center_row, center_col).
struct Psf {
  Eigen::MatrixXd values;
  int center_row = 0;
  int center_col = 0;
  BlurKind kind = BlurKind::Gaussian;
  std::uint64_t seed = 0;
  PsfParams params;
};

Psf make_psf(BlurKind kind, int n_p, const PsfParams& params,
             std::uint64_t seed = 0);

// n-by-n banded Toeplitz matrix T with T(i, i') = w(i - i' + c); taps outside
// w are zero (zero boundary conditions).
Eigen::MatrixXd banded_toeplitz(const Eigen::VectorXd& w, int c, int n);

// Exact sum-of-Kronecker-products form of zero-boundary blur with psf on
// n-by-n images. Each kept SVD term s u v^T of the PSF array becomes the pair
// (row_factor, col_factor) = (T(sqrt(s) v, center_col), T(sqrt(s) u,
// center_row)). Terms with s <= truncation_tol * s_max are dropped; with
// truncation_tol = 0 only exact zeros are dropped and the operator applies
// the full convolution.
KroneckerSum psf_to_kronsum(const Psf& psf, int n,
                            double truncation_tol = 1e-12);

struct TestProblem {
  KroneckerSum a;
  Eigen::VectorXd x_true;
  Eigen::VectorXd b_true;
  Eigen::VectorXd noise;
  Eigen::VectorXd b;
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  Psf psf;
  int n = 0;
};

// Blurs the image with psf and adds seeded Gaussian noise scaled so that
// ||noise|| / ||b_true|| equals noise_level.
TestProblem make_test_problem(const Eigen::MatrixXd& image, const Psf& psf,
                              double noise_level, std::uint64_t seed);

// Piecewise-constant synthetic scene (bright rectangle and disk on a dark
// background) used when no image file is supplied.
Eigen::MatrixXd default_test_image(int n);

// Problem bundle directory: meta.json plus raw little-endian float64
// column-major arrays psf.f64, xtrue.f64, btrue.f64, b.f64. Loading rebuilds
// the operator from the stored PSF; the noise vector is recovered as
// b - b_true.
void save_problem(const TestProblem& tp, const std::string& dir);
TestProblem load_problem(const std::string& dir);

// 8-bit binary PGM; values clamp to [0, 1] on save and scale to [0, 1] on
// load.
void save_pgm(const Eigen::MatrixXd& image, const std::string& path);
Eigen::MatrixXd load_pgm(const std::string& path);

}  // namespace kronprec
