#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

namespace kronprec {

enum class RoundingMode { NearestEven };

// Parameters of an emulated binary floating-point format. significand_bits
// counts the implicit leading bit, so IEEE half precision has t = 11.
struct PrecisionFormat {
  int significand_bits = 53;
  int max_exponent = 1023;
  bool subnormals_enabled = true;
  std::string name = "fp64";

  static PrecisionFormat fp16();
  static PrecisionFormat bfloat16();
  static PrecisionFormat fp32();
  static PrecisionFormat fp64();

  // Accepts "fp16", "bfloat16", "fp32", "fp64" or
  // "custom:t=T,emax=E,subnormals=0|1". Throws std::invalid_argument.
  static PrecisionFormat parse(const std::string& text);

  double unit_roundoff() const;
  double max_finite() const;
  // Magnitudes at or beyond this value round to infinity.
  double overflow_threshold() const;
  int min_exponent() const;

  // True when every double is representable, making rounding the identity.
  bool covers_double() const;
};

// Nearest value representable in fmt, ties to even significand. Infinities
// and NaN pass through. Scalar rounding is not tallied by RoundCallSession.
double round_value(double x, const PrecisionFormat& fmt,
                   RoundingMode mode = RoundingMode::NearestEven);

// Elementwise round_value over a whole array. Each invocation, regardless of
// size, tallies exactly one vectorized rounding call.
void round_inplace(Eigen::Ref<Eigen::MatrixXd> a, const PrecisionFormat& fmt,
                   RoundingMode mode = RoundingMode::NearestEven);
Eigen::MatrixXd round_array(const Eigen::MatrixXd& a,
                            const PrecisionFormat& fmt,
                            RoundingMode mode = RoundingMode::NearestEven);
Eigen::VectorXd round_array(const Eigen::VectorXd& a,
                            const PrecisionFormat& fmt,
                            RoundingMode mode = RoundingMode::NearestEven);

// Tallies vectorized rounding calls made on the current thread between
// construction and count(). Sessions may nest.
class RoundCallSession {
 public:
  RoundCallSession();
  std::uint64_t count() const;

 private:
  std::uint64_t start_;
};

std::uint64_t round_call_count(const RoundCallSession& session);

}  // namespace kronprec
