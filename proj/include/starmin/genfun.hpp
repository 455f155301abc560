// Scaled coefficients of the meromorphic expansion of the occupancy
// generating function, and the functional identities tying them to the
// equilibrium distribution.
//
// Working directly with the raw expansion coefficients a_k is numerically
// hopeless (they span hundreds of orders of magnitude and their zeros repel
// every naive scheme), so everything here lives in the scaled coordinates
//
//   a_k = -c_k (log rho)^3 alpha'(1) xi^k,       c_1 = 1,
//
// where the c_k obey the parameter-free convolution recurrence
//
//   c_k = (log rho)^3 / (1 - rho^{k-1}) *
//         sum_{j=1}^{k-1} c_j c_{k-j} rho^{j+k-1} / (1 - rho^j)^2
//
// and xi is the smallest positive zero of c(z) = sum c_{k+1} z^k (the
// anchoring equation).  The inner convolution is a deterministic chunked
// reduction (kernels.hpp) so it can run parallel without changing bits.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "starmin/errors.hpp"
#include "starmin/kernels.hpp"
#include "starmin/meanfield.hpp"
#include "starmin/real.hpp"

namespace starmin::genfun {

template <class Real>
struct ScaledSeries {
  double rho = 0.0;
  std::vector<Real> c;  // c[1..M]; c[0] unused
  int M = 0;
  int underflow_at = 0;  // first index whose coefficient underflowed to 0 (0 = none)
  Real xi{0};
  Real a1{0};           // set by calibrate_alpha
  Real alpha_prime{0};  // set by calibrate_alpha

  bool calibrated() const { return a1 != Real{0}; }
};

template <class Real>
ScaledSeries<Real> scaled_coefficients(double rho, int M,
                                       kernels::Exec exec = kernels::Exec::parallel) {
  using std::exp;
  using std::expm1;
  using std::isfinite;
  using std::log;
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("scaled_coefficients: need 0 < rho < 1");
  if (M < 2) throw DomainError("scaled_coefficients: need M >= 2");

  ScaledSeries<Real> s;
  s.rho = rho;
  s.M = M;
  s.c.assign(M + 1, Real{0});
  s.c[1] = Real{1};

  const Real logrho = log(Real(rho));
  const Real L3 = logrho * logrho * logrho;

  // rho^j and rho^j/(1-rho^j)^2; 1-rho^j through expm1 to keep digits near rho=1
  std::vector<Real> rpow(M + 1), weight(M + 1), one_minus_rpow(M + 1);
  rpow[0] = Real{1};
  for (int j = 1; j <= M; ++j) {
    rpow[j] = exp(Real(j) * logrho);
    one_minus_rpow[j] = -expm1(Real(j) * logrho);
    weight[j] = rpow[j] / (one_minus_rpow[j] * one_minus_rpow[j]);
  }

  for (int k = 2; k <= M; ++k) {
    const auto& c = s.c;
    const Real conv = kernels::chunked_sum<Real>(
        static_cast<std::size_t>(k - 1),
        [&](std::size_t idx) {
          const int j = static_cast<int>(idx) + 1;
          return c[j] * c[k - j] * weight[j];
        },
        exec);
    const Real ck = L3 * rpow[k - 1] / one_minus_rpow[k - 1] * conv;
    if constexpr (!is_bigfloat_v<Real>) {
      if (!isfinite(ck))
        throw ConvergenceError(
            "scaled_coefficients: coefficient left the representable range at k=" +
            std::to_string(k) + "; switch to extended precision");
    }
    if (ck == Real{0}) {  // underflow: later coefficients are meaningless
      s.underflow_at = k;
      s.M = k - 1;
      s.c.resize(k);
      break;
    }
    s.c[k] = ck;
  }
  return s;
}

// ----------------------------------------------------------------------------
// Series evaluation with a certified truncation bound.

template <class Scalar>
struct SeriesValue {
  Scalar value{};
  double max_partial = 0.0;  // largest |partial sum| met during accumulation
  double tail_bound = 0.0;   // certified bound on the neglected tail
  bool certified = false;
};

namespace detail {
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& x) { return std::abs(x); }
inline double magnitude(const BigFloat& x) { return std::abs(to_double(x)); }
}  // namespace detail

// c(z) = sum_{k>=1} c_k z^{k-1}, forward accumulation.  The certificate
// requires the last trailing terms to be decreasing geometrically; the tail is
// then bounded by the last term times r/(1-r).
template <class Real, class Scalar>
SeriesValue<Scalar> evaluate_series(const ScaledSeries<Real>& s, const Scalar& z) {
  SeriesValue<Scalar> out;
  Scalar acc{0};
  Scalar zp{1};
  double last_mag = 0.0;
  constexpr int W = 8;  // trailing ratio window
  double ratios[W];
  int nratios = 0;
  for (int k = 1; k <= s.M; ++k) {
    Scalar term;
    if constexpr (std::is_same_v<Scalar, Real>) {
      term = s.c[k] * zp;
    } else {
      term = Scalar(to_double(s.c[k])) * zp;
    }
    acc += term;
    zp *= z;
    const double mag = detail::magnitude(term);
    out.max_partial = std::max(out.max_partial, detail::magnitude(acc));
    if (k > 1) {
      double r;
      if (last_mag > 0.0)
        r = mag / last_mag;
      else
        r = (mag > 0.0) ? std::numeric_limits<double>::infinity() : 0.0;
      ratios[nratios++ % W] = r;
    }
    last_mag = mag;
  }
  out.value = acc;
  // Certificate: the last W term ratios are all uniformly below 1, so the
  // neglected tail (including any continuation past a coefficient underflow,
  // whose ratios only shrink further by the rho^k factor of the recurrence)
  // is bounded by the last term's geometric sum.
  if (nratios >= W) {
    double rmax = 0.0;
    for (double r : ratios) rmax = std::max(rmax, r);
    if (rmax < 0.95) {
      out.certified = true;
      out.tail_bound = last_mag * rmax / (1.0 - rmax);
    }
  }
  return out;
}

// ----------------------------------------------------------------------------
// Anchoring: smallest positive zero of c(., rho).

struct XiReport {
  double xi = 0.0;
  double c_at_xi = 0.0;        // |c(xi)| achieved
  double max_partial = 0.0;    // scale of the cancellation at xi (series method)
  double stability = 0.0;      // relative move under truncation doubling
  bool used_chain = false;     // true when the chained evaluator located xi
};

enum class XiMethod { automatic, partial_sums, chained };

// Locate xi by sign-change bracketing of the certified partial sums followed
// by bisection.  Throws ConvergenceError when no certified sign change exists
// within the truncation (expected as rho -> 1: the positive zeros run off to
// infinity faster than any fixed M can follow).
template <class Real>
XiReport find_xi_partial_sums(const ScaledSeries<Real>& s) {
  using std::abs;
  const double target_abs = 1e-13;
  // a sign is only trusted when the certified tail cannot flip it
  auto trusted_sign = [](const SeriesValue<Real>& f) -> int {
    if (!f.certified || detail::magnitude(f.value) < 10.0 * f.tail_bound) return 0;
    return (f.value > Real{0}) ? 1 : -1;
  };

  Real lo{0}, hi{0};
  Real z{0.1};
  SeriesValue<Real> fz = evaluate_series(s, z);
  if (trusted_sign(fz) != 1)
    throw ConvergenceError("find_xi: series not certified near the origin; M too small");
  for (;;) {
    Real z2 = z * Real(1.25);
    SeriesValue<Real> f2 = evaluate_series(s, z2);
    const int sign = trusted_sign(f2);
    if (sign == 0) {
      std::ostringstream msg;
      msg << "find_xi: certified resolution exhausted at z=" << to_double(z2)
          << " before a sign change (M=" << s.M << " too small for rho=" << s.rho << ")";
      throw ConvergenceError(msg.str());
    }
    if (sign < 0) {
      lo = z;
      hi = z2;
      break;
    }
    if (to_double(z2) > 1e60)
      throw ConvergenceError("find_xi: no sign change found below z=1e60");
    z = z2;
    fz = f2;
  }

  XiReport rep;
  SeriesValue<Real> fmid;
  for (int it = 0; it < 400; ++it) {
    const Real mid = (lo + hi) / Real{2};
    fmid = evaluate_series(s, mid);
    // polish to 1e-13 absolute unless the cancellation noise floor is higher
    const double noise = 4.0 * to_double(real_epsilon<Real>()) * fmid.max_partial;
    const double floor = std::max(target_abs, noise);
    if (!fmid.certified || fmid.tail_bound > floor)
      throw ConvergenceError("find_xi: truncated tail too large to resolve the zero; "
                             "increase M or precision");
    if (detail::magnitude(fmid.value) <= floor || to_double(hi - lo) < 1e-15 * to_double(hi)) {
      rep.xi = to_double(mid);
      rep.c_at_xi = detail::magnitude(fmid.value);
      rep.max_partial = fmid.max_partial;
      return rep;
    }
    if (fmid.value > Real{0})
      lo = mid;
    else
      hi = mid;
  }
  const Real mid = (lo + hi) / Real{2};
  fmid = evaluate_series(s, mid);
  rep.xi = to_double(mid);
  rep.c_at_xi = detail::magnitude(fmid.value);
  rep.max_partial = fmid.max_partial;
  return rep;
}

// Evaluates log c(z, rho) for z > 0 below the first zero by applying the
// one-step relation  c(z) = c(rho z) [1 + log(rho) v(z)]  repeatedly toward
// the origin, where
//
//   v(z) = z (log rho)^2 sum_{i>=1} i rho^{i+1} c(rho^{i+1} z).
//
// All arguments on the chain live strictly below the first zero, so every
// factor is in (0,1] and the recursion is stable in log space; c itself can be
// far below the underflow threshold without harm.  Only the leading
// coefficients (small-z disk) are taken from the series, where no
// cancellation occurs, so double precision suffices throughout.
class ChainedEvaluator {
 public:
  template <class Real>
  explicit ChainedEvaluator(const ScaledSeries<Real>& s, double small_disk = 0.25)
      : rho_(s.rho), L_(std::log(s.rho)), Z0_(small_disk) {
    const int n = std::min(s.M, 120);
    c_lo_.resize(n + 1);
    for (int k = 1; k <= n; ++k) c_lo_[k] = to_double(s.c[k]);
  }

  // g(zeta) = 1 + log(rho) v(zeta); xi is its smallest positive zero.  When an
  // inner chain factor is already nonpositive (zeta far beyond xi) a negative
  // sentinel keeps bracketing monotone.
  double g(double zeta) const {
    Grid grid = build(zeta);
    if (grid.crossed) return -1.0;
    return 1.0 + L_ * v_at(grid, 0, zeta);
  }

  // log c(z); requires z below the first zero.
  double log_c(double z) const {
    Grid grid = build(z);
    if (grid.crossed) throw DomainError("ChainedEvaluator::log_c: argument beyond the first zero");
    const double v0 = v_at(grid, 0, z);
    const double f = 1.0 + L_ * v0;
    if (f <= 0.0) throw DomainError("ChainedEvaluator::log_c: argument beyond the first zero");
    return grid.logc[1] + std::log1p(L_ * v0);
  }

 private:
  struct Grid {
    std::vector<double> zs, logc, cval;
    bool crossed = false;
  };

  double series_small(double z) const {
    double acc = 0.0;
    for (int k = static_cast<int>(c_lo_.size()) - 1; k >= 1; --k) acc = acc * z + c_lo_[k];
    return acc;
  }

  // v at rung m: uses c on rungs m+2 and deeper only.
  double v_at(const Grid& grid, int m, double zm) const {
    const int n = static_cast<int>(grid.zs.size());
    double s = 0.0;
    double w = rho_ * rho_;  // i * rho^{i+1} at i = 1
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 1; m + i + 1 < n; ++i) {
      const double term = static_cast<double>(i) * w * grid.cval[m + i + 1];
      s += term;
      w *= rho_;
      if (term < prev && term < 1e-19 * s && i > 4) break;
      prev = term;
    }
    return zm * L_ * L_ * s;
  }

  Grid build(double zeta) const {
    Grid grid;
    const double eps_ln = -L_;
    const int extra = static_cast<int>(std::ceil(55.0 / eps_ln)) + 8;
    int n_top = 0;
    if (zeta > Z0_) n_top = static_cast<int>(std::ceil(std::log(zeta / Z0_) / eps_ln)) + 1;
    const int n = n_top + extra;
    grid.zs.resize(n);
    grid.logc.assign(n, 0.0);
    grid.cval.assign(n, 0.0);
    for (int m = 0; m < n; ++m) grid.zs[m] = zeta * std::exp(L_ * m);
    for (int m = n - 1; m >= 1; --m) {
      const double zm = grid.zs[m];
      if (zm <= Z0_) {
        const double cv = series_small(zm);
        grid.logc[m] = std::log(cv);
        grid.cval[m] = cv;
      } else {
        const double v = v_at(grid, m, zm);
        const double f = 1.0 + L_ * v;
        if (f <= 0.0) {
          grid.crossed = true;
          return grid;
        }
        grid.logc[m] = grid.logc[m + 1] + std::log1p(L_ * v);
        grid.cval[m] = std::exp(grid.logc[m]);
      }
    }
    return grid;
  }

  double rho_, L_, Z0_;
  std::vector<double> c_lo_;
};

template <class Real>
XiReport find_xi_chained(const ScaledSeries<Real>& s) {
  ChainedEvaluator ev(s);
  double z = 0.5, gz = ev.g(z);
  if (gz <= 0.0) throw ConvergenceError("find_xi_chained: g already negative at z=0.5");
  double lo = z, hi = 0.0;
  for (;;) {
    const double z2 = z * 2.718281828459045;
    const double g2 = ev.g(z2);
    if (g2 < 0.0) {
      lo = z;
      hi = z2;
      break;
    }
    if (z2 > 1e60) throw ConvergenceError("find_xi_chained: no sign change below 1e60");
    z = z2;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (ev.g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi / lo - 1.0 < 1e-13) break;
  }
  XiReport rep;
  rep.xi = std::sqrt(lo * hi);
  rep.used_chain = true;
  // |c(xi)| = c(rho xi) |g(xi)|; both factors are available here
  rep.c_at_xi = std::exp(ev.log_c(s.rho * rep.xi)) * std::abs(ev.g(rep.xi));
  return rep;
}

// Locate xi, store it on the series and verify stability under truncation
// doubling (the spec for how many coefficients the first bracket needs as
// rho -> 1 is empirical, so the doubling test is the guard).
template <class Real>
XiReport anchor_xi(ScaledSeries<Real>& s, XiMethod method = XiMethod::automatic,
                   bool stability_check = true) {
  const bool prefer_chain = (method == XiMethod::chained) ||
                            (method == XiMethod::automatic && s.rho > 0.75);
  XiReport rep;
  if (prefer_chain) {
    rep = find_xi_chained(s);
  } else {
    try {
      rep = find_xi_partial_sums(s);
    } catch (const ConvergenceError&) {
      if (method == XiMethod::partial_sums) throw;
      rep = find_xi_chained(s);
    }
  }
  if (stability_check) {
    ScaledSeries<Real> doubled = scaled_coefficients<Real>(s.rho, 2 * s.M);
    const XiReport rep2 =
        rep.used_chain ? find_xi_chained(doubled) : find_xi_partial_sums(doubled);
    rep.stability = std::abs(rep2.xi - rep.xi) / rep.xi;
    if (rep.stability > 1e-8)
      throw ConvergenceError("anchor_xi: xi not stable under truncation doubling (moved by " +
                             std::to_string(rep.stability) + "); M too small");
  }
  s.xi = Real(rep.xi);
  return rep;
}

// ----------------------------------------------------------------------------
// Calibration against the equilibrium distribution.

struct CalibrationReport {
  double max_rel_error = 0.0;  // worst reconstruction error over checked k
  int worst_k = 0;
  double xi_identity_rel = 0.0;  // | -a1/(L^3 abar) - xi | / xi
};

// Pin the free scale of the expansion from the equilibrium solution:
// a_1 = K(rho)/rho (residue of the generating function at its first pole)
// and alpha'(1) = alpha_bar.  Then every alpha_{k-1} must be reproduced by
// rho^k a(rho^k) with a(z) = a_1 c(z xi).
//
// Note the paper states a_1 = rho K(rho); matching the fixed point (and the
// exact identity xi = -a_1/((log rho)^3 alpha'(1))) requires K(rho)/rho.
template <class Real>
CalibrationReport calibrate_alpha(ScaledSeries<Real>& s, const meanfield::Distribution<Real>& dist,
                                  double check_tol = 1e-6, int k_limit = 200) {
  using std::abs;
  using std::exp;
  using std::log;
  if (std::abs(s.rho - dist.rho) > 1e-14)
    throw DomainError("calibrate_alpha: series and distribution are at different loads");
  if (s.xi == Real{0}) throw DomainError("calibrate_alpha: anchor xi first");
  const Real rho(s.rho);
  s.a1 = dist.K_rho / rho;
  s.alpha_prime = dist.alpha_bar;

  CalibrationReport rep;
  const Real logrho = log(rho);
  const Real xi_implied = -s.a1 / (logrho * logrho * logrho * dist.alpha_bar);
  rep.xi_identity_rel = to_double(abs(xi_implied - s.xi) / s.xi);

  // large arguments fall back to the chained evaluator (stable for any z
  // below the first zero) when the direct partial sum cannot be certified
  std::optional<ChainedEvaluator> chain;
  const int kmax = std::min<int>(k_limit, dist.K + 1);
  for (int k = 1; k <= kmax; ++k) {
    const Real arg = exp(Real(k) * logrho) * s.xi;  // rho^k xi
    Real cval;
    const auto cv = evaluate_series(s, arg);
    if (cv.certified && detail::magnitude(cv.value) > 10.0 * cv.tail_bound) {
      cval = cv.value;
    } else {
      if (!chain) chain.emplace(s);
      cval = Real(std::exp(chain->log_c(to_double(arg))));
    }
    const Real recon = exp(Real(k) * logrho) * s.a1 * cval;
    const Real exact = dist.alpha[k - 1];
    if (exact > Real(1e-10)) {
      const double rel = to_double(abs(recon - exact) / exact);
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_k = k;
      }
    }
  }
  if (rep.max_rel_error > check_tol) {
    std::ostringstream msg;
    msg << "calibrate_alpha: reconstruction off by " << rep.max_rel_error << " at k=" << rep.worst_k
        << " (tolerance " << check_tol << "); truncation M or K insufficient";
    throw InvariantViolation(msg.str());
  }
  return rep;
}

// ----------------------------------------------------------------------------
// Functional identities.

// Relative residual of c(z) = c(rho z) [1 + z (log rho)^3 sum_{i=1}^J i rho^{i+1} c(rho^{i+1} z)].
// The neglected i-tail is bounded geometrically and folded into the result.
template <class Real, class Scalar>
double functional_residual(const ScaledSeries<Real>& s, const Scalar& z, int J = 64) {
  using detail::magnitude;
  const double rho = s.rho;
  const double L = std::log(rho);
  const auto lhs = evaluate_series(s, z);
  const Scalar rz = Scalar(rho) * z;
  const auto crz = evaluate_series(s, rz);
  if (!lhs.certified || !crz.certified)
    throw DomainError("functional_residual: z outside the certified evaluation domain");

  Scalar sum{0};
  double wmax = 0.0;
  double w = rho * rho;  // rho^{i+1} at i = 1
  for (int i = 1; i <= J; ++i) {
    const Scalar arg = Scalar(w) * z;  // rho^{i+1} z
    const auto ci = evaluate_series(s, arg);
    if (!ci.certified)
      throw DomainError("functional_residual: inner argument outside certified domain");
    sum += Scalar(static_cast<double>(i) * w) * ci.value;
    wmax = std::max(wmax, magnitude(ci.value));
    w *= rho;
  }
  // |c| on the remaining arguments is bounded by its value at the largest one
  // (plus 1 for safety near the origin where c -> 1); w is now rho^{J+2}
  const double tail_weight = w * ((J + 1) * (1.0 - rho) + rho) / ((1.0 - rho) * (1.0 - rho));
  const double tail = std::abs(L * L * L) * magnitude(z) * tail_weight * std::max(1.0, wmax);

  const Scalar factor = Scalar(1) + Scalar(L * L * L) * z * sum;
  const Scalar rhs = crz.value * factor;
  const double scale =
      magnitude(lhs.value) + magnitude(rhs) + magnitude(crz.value);
  return (magnitude(lhs.value - rhs) + magnitude(crz.value) * tail) / scale;
}

// ----------------------------------------------------------------------------
// The convolution weight function f, in both series forms:
//   form 1:  f(t) = sum_{j>=1} (rho^j/(1-rho^j))^2 t^j          (|t| < rho^{-2})
//   form 2:  f(t) = t sum_{j>=1} j rho^{j+1} / (1 - t rho^{j+1})
// They agree on the overlap of their domains.

template <class Scalar>
struct FPair {
  Scalar form1{}, form2{};
  bool form1_valid = false, form2_valid = false;
  Scalar value() const {
    if (form1_valid) return form1;
    if (form2_valid) return form2;
    throw DomainError("evaluate_f: t outside both convergence domains");
  }
};

template <class Scalar>
FPair<Scalar> evaluate_f(const Scalar& t, double rho) {
  using detail::magnitude;
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("evaluate_f: need 0 < rho < 1");
  FPair<Scalar> out;
  const double tmag = magnitude(t);
  const double inv_r2 = 1.0 / (rho * rho);

  if (tmag < inv_r2 * (1.0 - 1e-12)) {
    Scalar acc{0}, tp = t;
    double rj = rho;
    for (int j = 1; j < 100000; ++j) {
      const double w = rj / (1.0 - rj);
      const Scalar term = Scalar(w * w) * tp;
      acc += term;
      tp *= t;
      rj *= rho;
      const double ratio = tmag * rho * rho;
      if (magnitude(term) < 1e-18 * (magnitude(acc) + 1e-300) && j > 4) break;
      if (j > 64 && ratio < 1.0 && magnitude(term) / (1.0 - ratio) < 1e-18 * magnitude(acc)) break;
    }
    out.form1 = acc;
    out.form1_valid = true;
  }

  // form 2 converges geometrically wherever t stays away from the poles rho^{-j-1}
  bool near_pole = false;
  double rj = rho * rho;
  for (int j = 1; j < 2048 && rj * tmag > 1e-6; ++j) {
    if (magnitude(Scalar(1) - t * Scalar(rj)) < 1e-8) near_pole = true;
    rj *= rho;
  }
  if (!near_pole) {
    Scalar acc{0};
    double w = rho * rho;
    for (int j = 1; j < 100000; ++j) {
      const Scalar term = Scalar(static_cast<double>(j) * w) / (Scalar(1) - t * Scalar(w));
      acc += term;
      w *= rho;
      if (j > 8 && magnitude(term) < 1e-19 * magnitude(acc)) break;
    }
    out.form2 = t * acc;
    out.form2_valid = true;
  }
  if (!out.form1_valid && !out.form2_valid)
    throw DomainError("evaluate_f: t outside both convergence domains");
  return out;
}

// ----------------------------------------------------------------------------
// Evaluator bundle for the calibrated expansion.

template <class Real>
struct Evaluators {
  const ScaledSeries<Real>& s;

  Real c(const Real& z) const {
    const auto v = evaluate_series(s, z);
    if (!v.certified) throw DomainError("Evaluators::c: outside certified domain");
    return v.value;
  }
  Real a(const Real& z) const {
    if (!s.calibrated()) throw DomainError("Evaluators::a: calibrate first");
    return s.a1 * c(z * s.xi);
  }
  // b(z) = z sum_{j>=1} j rho^{j+1} a(rho^{j+1} z)
  Real b(const Real& z, int J = 256) const {
    using std::exp;
    using std::log;
    const Real logrho = log(Real(s.rho));
    Real acc{0};
    for (int j = 1; j <= J; ++j) {
      const Real w = exp(Real(j + 1) * logrho);
      const Real term = Real(j) * w * a(w * z);
      acc += term;
      using std::abs;
      if (j > 8 && abs(term) < Real(1e-19) * abs(acc)) break;
    }
    return z * acc;
  }
  // v(z) = z (log rho)^2 sum_{i>=1} i rho^{i+1} c(rho^{i+1} z)
  Real v(const Real& z, int J = 256) const {
    using std::exp;
    using std::log;
    const Real logrho = log(Real(s.rho));
    Real acc{0};
    for (int i = 1; i <= J; ++i) {
      const Real w = exp(Real(i + 1) * logrho);
      const Real term = Real(i) * w * c(w * z);
      acc += term;
      using std::abs;
      if (i > 8 && abs(term) < Real(1e-19) * abs(acc)) break;
    }
    return z * logrho * logrho * acc;
  }
};

// Partial-fraction reconstruction of the occupancy generating function from
// the pole expansion alpha(z) = sum_i a_i / (rho^{-i} - z), with
// a_i = -c_i (log rho)^3 alpha'(1) xi^i.  Used as a cross-module invariant.
template <class Real>
Real alpha_from_poles(const ScaledSeries<Real>& s, const Real& z, double rel_tol = 1e-14) {
  using std::abs;
  using std::exp;
  using std::log;
  if (!s.calibrated()) throw DomainError("alpha_from_poles: calibrate first");
  const Real logrho = log(Real(s.rho));
  const Real L3 = logrho * logrho * logrho;
  Real acc{0};
  Real xipow{1};
  for (int i = 1; i <= s.M; ++i) {
    xipow *= s.xi;
    const Real a_i = -s.c[i] * L3 * s.alpha_prime * xipow;
    const Real pole = exp(-Real(i) * logrho);  // rho^{-i}
    const Real term = a_i / (pole - z);
    acc += term;
    if (i > 8 && abs(term) < Real(rel_tol) * abs(acc)) return acc;
  }
  throw ConvergenceError("alpha_from_poles: pole series did not settle within M terms");
}

}  // namespace starmin::genfun
