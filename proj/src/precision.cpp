#include "kronprec/precision.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace kronprec {

namespace {

thread_local std::uint64_t g_round_calls = 0;

// Round to nearest integer with ties to even. Exact for |z| < 2^53 and
// independent of the ambient FPU rounding mode.
double nearest_even_int(double z) {
  const double f = std::floor(z);
  const double d = z - f;
  if (d > 0.5) return f + 1.0;
  if (d < 0.5) return f;
  return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

double round_finite_nonzero(double x, const PrecisionFormat& fmt) {
  const int t = fmt.significand_bits;
  const int emin = fmt.min_exponent();
  const double mag = std::fabs(x);

  if (mag >= fmt.overflow_threshold()) return std::copysign(HUGE_VAL, x);

  int shift;
  const int e = std::ilogb(mag);
  if (e < emin) {
    // Below the normal range: snap to the subnormal grid, or to the nearest
    // of zero and the smallest normal when subnormals are off.
    shift = fmt.subnormals_enabled ? emin - t + 1 : emin;
  } else {
    shift = e - t + 1;
  }
  const double r = std::ldexp(nearest_even_int(std::ldexp(x, -shift)), shift);
  return r == 0.0 ? std::copysign(0.0, x) : r;
}

}  // namespace

PrecisionFormat PrecisionFormat::fp16() { return {11, 15, true, "fp16"}; }
PrecisionFormat PrecisionFormat::bfloat16() { return {8, 127, true, "bfloat16"}; }
PrecisionFormat PrecisionFormat::fp32() { return {24, 127, true, "fp32"}; }
PrecisionFormat PrecisionFormat::fp64() { return {53, 1023, true, "fp64"}; }

PrecisionFormat PrecisionFormat::parse(const std::string& text) {
  if (text == "fp16") return fp16();
  if (text == "bfloat16") return bfloat16();
  if (text == "fp32") return fp32();
  if (text == "fp64") return fp64();
  int t = 0, emax = 0, sub = 0;
  if (std::sscanf(text.c_str(), "custom:t=%d,emax=%d,subnormals=%d", &t, &emax,
                  &sub) == 3 &&
      t >= 2 && emax >= 1 && (sub == 0 || sub == 1)) {
    return {t, emax, sub == 1, text};
  }
  throw std::invalid_argument("unknown precision format: " + text);
}

double PrecisionFormat::unit_roundoff() const {
  return std::ldexp(1.0, -significand_bits);
}

double PrecisionFormat::max_finite() const {
  return std::ldexp(2.0 - std::ldexp(1.0, 1 - significand_bits), max_exponent);
}

double PrecisionFormat::overflow_threshold() const {
  return std::ldexp(2.0 - std::ldexp(1.0, -significand_bits), max_exponent);
}

int PrecisionFormat::min_exponent() const { return 1 - max_exponent; }

bool PrecisionFormat::covers_double() const {
  return significand_bits >= 53 && max_exponent >= 1023 && subnormals_enabled;
}

double round_value(double x, const PrecisionFormat& fmt, RoundingMode) {
  if (fmt.covers_double()) return x;
  if (!std::isfinite(x) || x == 0.0) return x;
  return round_finite_nonzero(x, fmt);
}

void round_inplace(Eigen::Ref<Eigen::MatrixXd> a, const PrecisionFormat& fmt,
                   RoundingMode mode) {
  ++g_round_calls;
  if (fmt.covers_double()) return;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      a(i, j) = round_value(a(i, j), fmt, mode);
}

Eigen::MatrixXd round_array(const Eigen::MatrixXd& a,
                            const PrecisionFormat& fmt, RoundingMode mode) {
  Eigen::MatrixXd r = a;
  round_inplace(r, fmt, mode);
  return r;
}

Eigen::VectorXd round_array(const Eigen::VectorXd& a,
                            const PrecisionFormat& fmt, RoundingMode mode) {
  Eigen::VectorXd r = a;
  round_inplace(r, fmt, mode);
  return r;
}

RoundCallSession::RoundCallSession() : start_(g_round_calls) {}

std::uint64_t RoundCallSession::count() const {
  return g_round_calls - start_;
}

std::uint64_t round_call_count(const RoundCallSession& session) {
  return session.count();
}

}  // namespace kronprec
