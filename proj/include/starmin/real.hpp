// Scalar type support: everything numerical in this library is templated on a
// Real type so that heavy-traffic runs (rho close to 1) can switch from plain
// double to an arbitrary-precision float.  BigFloat wraps an MPFR number whose
// mantissa width is set at runtime.

#pragma once

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <cstdint>

namespace starmin {

using BigFloat = boost::multiprecision::number<
    boost::multiprecision::mpfr_float_backend<0>, boost::multiprecision::et_off>;

inline unsigned digits10_for_bits(unsigned bits) {
  // ceil(bits * log10(2)) plus a couple of guard digits
  return static_cast<unsigned>(bits * 0.30103) + 2;
}

inline void set_working_precision_bits(unsigned bits) {
  BigFloat::default_precision(digits10_for_bits(bits));
}

inline unsigned working_precision_digits() { return BigFloat::default_precision(); }

// RAII scope guard; restores the previous precision on exit.  The default
// precision is thread-local, so parallel regions must install their own guard.
class PrecisionGuard {
 public:
  explicit PrecisionGuard(unsigned bits) : saved_(BigFloat::default_precision()) {
    set_working_precision_bits(bits);
  }
  ~PrecisionGuard() { BigFloat::default_precision(saved_); }
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  unsigned saved_;
};

inline double to_double(double x) { return x; }
inline double to_double(const BigFloat& x) { return x.convert_to<double>(); }

template <class Real>
inline constexpr bool is_bigfloat_v = std::is_same_v<Real, BigFloat>;

// Machine epsilon of the active representation.
template <class Real>
Real real_epsilon() {
  if constexpr (is_bigfloat_v<Real>) {
    return boost::multiprecision::pow(BigFloat(10), -static_cast<int>(BigFloat::default_precision()) + 1);
  } else {
    return std::numeric_limits<Real>::epsilon();
  }
}

}  // namespace starmin
