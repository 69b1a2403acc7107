#include "kronprec/deblur.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "raw float64 bundle I/O assumes a little-endian host");

namespace kronprec {

namespace fs = std::filesystem;
using nlohmann::json;

double Rng::uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * M_PI * u2;
  spare_ = mag * std::sin(ang);
  have_spare_ = true;
  return mag * std::cos(ang);
}

std::string blur_kind_name(BlurKind kind) {
  switch (kind) {
    case BlurKind::Gaussian: return "gaussian";
    case BlurKind::Defocus: return "defocus";
    case BlurKind::Motion: return "motion";
    case BlurKind::Shake: return "shake";
    case BlurKind::Speckle: return "speckle";
  }
  throw std::logic_error("blur_kind_name: bad enum");
}

BlurKind parse_blur_kind(const std::string& name) {
  if (name == "gaussian") return BlurKind::Gaussian;
  if (name == "defocus") return BlurKind::Defocus;
  if (name == "motion") return BlurKind::Motion;
  if (name == "shake") return BlurKind::Shake;
  if (name == "speckle") return BlurKind::Speckle;
  throw std::invalid_argument("unknown blur kind: " + name);
}

namespace {

void fill_gaussian(Eigen::MatrixXd& values, int c, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("make_psf: sigma must be > 0");
  const int np = int(values.rows());
  Eigen::VectorXd g(np);
  for (int i = 0; i < np; ++i)
    g(i) = std::exp(-0.5 * double(i - c) * double(i - c) / (sigma * sigma));
  values = g * g.transpose();  // outer product keeps the array exactly rank 1
}

void fill_defocus(Eigen::MatrixXd& values, int c, double radius) {
  if (radius < 0.0)
    throw std::invalid_argument("make_psf: radius must be >= 0");
  const int np = int(values.rows());
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j) {
      const double d2 = double(i - c) * (i - c) + double(j - c) * (j - c);
      values(i, j) = d2 <= radius * radius ? 1.0 : 0.0;
    }
}

void fill_motion(Eigen::MatrixXd& values, int c, int length) {
  const int np = int(values.rows());
  if (length < 1) throw std::invalid_argument("make_psf: length must be >= 1");
  const int start = -((length - 1) / 2);
  if (c + start < 0 || c + start + length - 1 >= np)
    throw std::invalid_argument("make_psf: motion segment exceeds psf array");
  for (int k = 0; k < length; ++k)
    values(c + start + k, c + start + k) = 1.0;
}

void fill_shake(Eigen::MatrixXd& values, int c, int steps, Rng& rng) {
  const int np = int(values.rows());
  if (steps < 1) throw std::invalid_argument("make_psf: steps must be >= 1");
  double pr = c, pc = c;
  for (int s = 0; s < steps; ++s) {
    const int i = int(std::lround(pr));
    const int j = int(std::lround(pc));
    values(i, j) += 1.0;
    pr = std::clamp(pr + rng.uniform(-1.0, 1.0), 0.0, double(np - 1));
    pc = std::clamp(pc + rng.uniform(-1.0, 1.0), 0.0, double(np - 1));
  }
}

void fill_speckle(Eigen::MatrixXd& values, int blob_count, double blob_sigma,
                  Rng& rng) {
  const int np = int(values.rows());
  if (blob_count < 1)
    throw std::invalid_argument("make_psf: blob_count must be >= 1");
  if (blob_sigma <= 0.0)
    throw std::invalid_argument("make_psf: blob_sigma must be > 0");
  for (int b = 0; b < blob_count; ++b) {
    const double bi = rng.uniform(0.0, double(np - 1));
    const double bj = rng.uniform(0.0, double(np - 1));
    const double amp = rng.uniform(0.5, 1.5);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < np; ++j) {
        const double d2 = (i - bi) * (i - bi) + (j - bj) * (j - bj);
        values(i, j) += amp * std::exp(-0.5 * d2 / (blob_sigma * blob_sigma));
      }
  }
}

}  // namespace

Psf make_psf(BlurKind kind, int n_p, const PsfParams& params,
             std::uint64_t seed) {
  if (n_p < 1 || n_p % 2 == 0)
    throw std::invalid_argument("make_psf: psf size must be odd and positive");
  const int c = n_p / 2;
  Psf psf;
  psf.values = Eigen::MatrixXd::Zero(n_p, n_p);
  psf.center_row = c;
  psf.center_col = c;
  psf.kind = kind;
  psf.seed = seed;
  psf.params = params;

  Rng rng(seed);
  switch (kind) {
    case BlurKind::Gaussian: fill_gaussian(psf.values, c, params.sigma); break;
    case BlurKind::Defocus: fill_defocus(psf.values, c, params.radius); break;
    case BlurKind::Motion: fill_motion(psf.values, c, params.length); break;
    case BlurKind::Shake: fill_shake(psf.values, c, params.steps, rng); break;
    case BlurKind::Speckle:
      fill_speckle(psf.values, params.blob_count, params.blob_sigma, rng);
      break;
  }
  psf.values /= psf.values.sum();
  return psf;
}

Eigen::MatrixXd banded_toeplitz(const Eigen::VectorXd& w, int c, int n) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int k = i - j + c;
      if (k >= 0 && k < w.size()) t(i, j) = w(k);
    }
  return t;
}

KroneckerSum psf_to_kronsum(const Psf& psf, int n, double truncation_tol) {
  const int np = int(psf.values.rows());
  if (n < np)
    throw std::invalid_argument("psf_to_kronsum: image smaller than psf");
  if (truncation_tol < 0.0)
    throw std::invalid_argument("psf_to_kronsum: negative truncation_tol");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      psf.values, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();

  KroneckerSum sum;
  sum.n = n;
  for (int k = 0; k < s.size(); ++k) {
    if (s(k) <= 0.0) break;
    if (k > 0 && s(k) <= truncation_tol * s(0)) break;
    Eigen::VectorXd u = svd.matrixU().col(k);
    Eigen::VectorXd v = svd.matrixV().col(k);
    // Fix the sign so equal inputs give identical factors on every platform.
    Eigen::Index imax;
    u.cwiseAbs().maxCoeff(&imax);
    if (u(imax) < 0.0) {
      u = -u;
      v = -v;
    }
    const double root = std::sqrt(s(k));
    sum.terms.push_back({banded_toeplitz(root * v, psf.center_col, n),
                         banded_toeplitz(root * u, psf.center_row, n)});
  }
  if (sum.terms.empty())
    throw std::invalid_argument("psf_to_kronsum: psf has no nonzero terms");
  return sum;
}

TestProblem make_test_problem(const Eigen::MatrixXd& image, const Psf& psf,
                              double noise_level, std::uint64_t seed) {
  if (image.size() == 0)
    throw std::invalid_argument("make_test_problem: empty image");
  if (image.rows() != image.cols())
    throw std::invalid_argument("make_test_problem: image must be square");
  if (noise_level < 0.0)
    throw std::invalid_argument("make_test_problem: negative noise level");

  TestProblem tp;
  tp.n = int(image.rows());
  tp.psf = psf;
  tp.seed = seed;
  tp.noise_level = noise_level;
  tp.a = psf_to_kronsum(psf, tp.n);
  tp.x_true = vec(image);
  tp.b_true = kronsum_apply(tp.a, tp.x_true);

  if (noise_level == 0.0) {
    tp.noise = Eigen::VectorXd::Zero(tp.b_true.size());
  } else {
    Rng rng(seed);
    Eigen::VectorXd g(tp.b_true.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
    tp.noise = (noise_level * tp.b_true.norm() / g.norm()) * g;
  }
  tp.b = tp.b_true + tp.noise;
  return tp;
}

Eigen::MatrixXd default_test_image(int n) {
  if (n < 1) throw std::invalid_argument("default_test_image: n must be >= 1");
  Eigen::MatrixXd img = Eigen::MatrixXd::Constant(n, n, 0.1);

  const int r0 = int(0.20 * n), r1 = int(0.55 * n);
  const int c0 = int(0.15 * n), c1 = int(0.45 * n);
  for (int i = r0; i < r1; ++i)
    for (int j = c0; j < c1; ++j) img(i, j) = 0.7;

  const double dr = 0.62 * n, dc = 0.68 * n, rad = 0.18 * n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((i - dr) * (i - dr) + (j - dc) * (j - dc) <= rad * rad)
        img(i, j) = 1.0;
  return img;
}

namespace {

void write_f64(const fs::path& path, const double* data, std::size_t count) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data),
            std::streamsize(count * sizeof(double)));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

Eigen::VectorXd read_f64(const fs::path& path, std::size_t count) {
  std::error_code ec;
  const auto actual = fs::file_size(path, ec);
  if (ec) throw std::runtime_error("missing bundle file " + path.string());
  if (actual != count * sizeof(double))
    throw std::runtime_error("bundle file " + path.string() +
                             " has unexpected size");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto len = Eigen::Index(count);
  Eigen::VectorXd v(len);
  in.read(reinterpret_cast<char*>(v.data()),
          std::streamsize(count * sizeof(double)));
  if (!in) throw std::runtime_error("short read from " + path.string());
  return v;
}

}  // namespace

void save_problem(const TestProblem& tp, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path base(dir);
  const auto np = std::size_t(tp.psf.values.rows());
  const auto nn = std::size_t(tp.n) * std::size_t(tp.n);

  json meta;
  meta["schema"] = "kronprec.problem/1";
  meta["kind"] = blur_kind_name(tp.psf.kind);
  meta["n"] = tp.n;
  meta["psf_size"] = np;
  meta["center_row"] = tp.psf.center_row;
  meta["center_col"] = tp.psf.center_col;
  meta["seed"] = tp.seed;
  meta["psf_seed"] = tp.psf.seed;
  meta["noise_level"] = tp.noise_level;
  meta["params"] = {{"sigma", tp.psf.params.sigma},
                    {"radius", tp.psf.params.radius},
                    {"length", tp.psf.params.length},
                    {"steps", tp.psf.params.steps},
                    {"blob_count", tp.psf.params.blob_count},
                    {"blob_sigma", tp.psf.params.blob_sigma}};
  meta["bytes"] = {{"psf.f64", np * np * sizeof(double)},
                   {"xtrue.f64", nn * sizeof(double)},
                   {"btrue.f64", nn * sizeof(double)},
                   {"b.f64", nn * sizeof(double)}};

  std::ofstream out(base / "meta.json");
  if (!out) throw std::runtime_error("cannot write bundle meta.json");
  out << meta.dump(2) << "\n";
  out.close();

  write_f64(base / "psf.f64", tp.psf.values.data(), np * np);
  write_f64(base / "xtrue.f64", tp.x_true.data(), nn);
  write_f64(base / "btrue.f64", tp.b_true.data(), nn);
  write_f64(base / "b.f64", tp.b.data(), nn);
}

TestProblem load_problem(const std::string& dir) {
  const fs::path base(dir);
  std::ifstream in(base / "meta.json");
  if (!in) throw std::runtime_error("missing bundle meta.json in " + dir);
  json meta = json::parse(in);

  const int n = meta.at("n").get<int>();
  const auto np = meta.at("psf_size").get<std::size_t>();
  const auto& bytes = meta.at("bytes");
  for (const char* name : {"psf.f64", "xtrue.f64", "btrue.f64", "b.f64"}) {
    std::error_code ec;
    const auto actual = fs::file_size(base / name, ec);
    if (ec || actual != bytes.at(name).get<std::size_t>())
      throw std::runtime_error(std::string("bundle file ") + name +
                               " is missing or has the wrong size");
  }

  Psf psf;
  psf.kind = parse_blur_kind(meta.at("kind").get<std::string>());
  psf.center_row = meta.at("center_row").get<int>();
  psf.center_col = meta.at("center_col").get<int>();
  psf.seed = meta.at("psf_seed").get<std::uint64_t>();
  const auto& pj = meta.at("params");
  psf.params.sigma = pj.at("sigma").get<double>();
  psf.params.radius = pj.at("radius").get<double>();
  psf.params.length = pj.at("length").get<int>();
  psf.params.steps = pj.at("steps").get<int>();
  psf.params.blob_count = pj.at("blob_count").get<int>();
  psf.params.blob_sigma = pj.at("blob_sigma").get<double>();
  const Eigen::VectorXd pv = read_f64(base / "psf.f64", np * np);
  psf.values = Eigen::Map<const Eigen::MatrixXd>(pv.data(), np, np);

  TestProblem tp;
  tp.n = n;
  tp.psf = psf;
  tp.seed = meta.at("seed").get<std::uint64_t>();
  tp.noise_level = meta.at("noise_level").get<double>();
  const auto nn = std::size_t(n) * std::size_t(n);
  tp.x_true = read_f64(base / "xtrue.f64", nn);
  tp.b_true = read_f64(base / "btrue.f64", nn);
  tp.b = read_f64(base / "b.f64", nn);
  tp.noise = tp.b - tp.b_true;
  tp.a = psf_to_kronsum(psf, n);
  return tp;
}

void save_pgm(const Eigen::MatrixXd& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < image.rows(); ++i)
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      const double v = std::clamp(image(i, j), 0.0, 1.0);
      out.put(char(std::lround(v * 255.0)));
    }
  if (!out) throw std::runtime_error("short write to " + path);
}

namespace {

int pgm_next_int(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) throw std::runtime_error("pgm: malformed header");
  return v;
}

}  // namespace

Eigen::MatrixXd load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw std::runtime_error("pgm: not a P5 file");
  const int w = pgm_next_int(in);
  const int h = pgm_next_int(in);
  const int maxval = pgm_next_int(in);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
    throw std::runtime_error("pgm: unsupported header");
  in.get();  // single whitespace byte before raster
  Eigen::MatrixXd img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int c = in.get();
      if (c == EOF) throw std::runtime_error("pgm: truncated raster");
      img(i, j) = double(c) / double(maxval);
    }
  return img;
}

}  // namespace kronprec
