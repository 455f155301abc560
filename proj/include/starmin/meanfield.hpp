// Stationary occupancy law of a single link under the min policy, in the
// large-network limit.  The distribution (alpha_k) solves the balance
//
//     alpha_{k+1} u_{k+1} = rho * alpha_bar * alpha_k,
//     u_k = sum_l min(k,l) alpha_l,
//
// which is a nonlinear fixed point because u and alpha_bar are functionals of
// alpha itself.  The solver is a damped fixed-point iteration with adaptive
// truncation; the regeneration pass works in log space because near rho = 1
// the unnormalized iterate peaks around exp(rho * alpha_bar).

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "starmin/errors.hpp"
#include "starmin/kernels.hpp"
#include "starmin/real.hpp"

namespace starmin::meanfield {

struct SystemParams {
  double rho = 0.0;     // load, rho = lambda * v
  double lambda = 0.0;  // arrival intensity per link
  double v = 1.0;       // mean volume

  static SystemParams from_rho(double rho, double v = 1.0) {
    SystemParams p;
    p.rho = rho;
    p.v = v;
    p.lambda = rho / v;
    return p;
  }

  void validate() const {
    if (!(rho >= 0.0) || rho >= 1.0)
      throw DomainError("SystemParams: equilibrium requires 0 <= rho < 1, got rho=" + std::to_string(rho));
    if (!(v > 0.0)) throw DomainError("SystemParams: mean volume must be positive");
    if (std::abs(rho - lambda * v) > 1e-12 * std::max(1.0, std::abs(rho)))
      throw DomainError("SystemParams: rho != lambda * v");
  }
};

template <class Real>
struct Distribution {
  double rho = 0.0;
  std::vector<Real> alpha;  // alpha[0..K]
  std::vector<Real> u;      // u[0..K], u[0] = 0
  std::vector<Real> D;      // D[m] = sum_{j>=m} (j-m) alpha_j, indices 0..K
  int K = 0;
  Real alpha_bar{0};
  Real K_rho{0};     // limit of alpha_k rho^{-k}
  Real residual{0};  // sup_k |alpha_{k+1} u_{k+1} - rho alpha_bar alpha_k| / alpha_k
  long iterations = 0;
};

struct SolveOptions {
  double theta = 0.5;            // damping factor
  long max_iterations = 200000;
  double truncation_floor = 1e-16;  // require alpha_K < floor * max_k alpha_k
};

// u_k = sum_l min(k,l) alpha_l via suffix sums: u_{k+1} - u_k = sum_{l>k} alpha_l.
// Two passes, additions of nonnegative terms only.
template <class Real>
std::vector<Real> compute_u(std::span<const Real> alpha) {
  const std::size_t n = alpha.size();
  if (n == 0) throw DomainError("compute_u: empty sequence");
  Real sum{0};
  for (const Real& a : alpha) {
    if (a < Real{0}) throw DomainError("compute_u: negative entry");
    sum += a;
  }
  using std::abs;
  if (abs(sum - Real{1}) > Real{1e-8})
    throw DomainError("compute_u: sequence mass deviates from 1 beyond tolerance");
  std::vector<Real> tail(n + 1, Real{0});
  for (std::size_t k = n; k-- > 0;) tail[k] = tail[k + 1] + alpha[k];
  std::vector<Real> u(n, Real{0});
  for (std::size_t k = 0; k + 1 < n; ++k) u[k + 1] = u[k] + tail[k + 1];
  return u;
}

namespace detail {

// One damped sweep; returns the residual of the current iterate.
template <class Real>
Real sweep(std::vector<Real>& alpha, double rho, double theta) {
  using std::exp;
  using std::log;
  const int K = static_cast<int>(alpha.size()) - 1;
  std::vector<Real> tail(K + 2, Real{0});
  for (int k = K; k >= 0; --k) tail[k] = tail[k + 1] + alpha[k];
  std::vector<Real> u(K + 2, Real{0});
  for (int k = 0; k <= K; ++k) u[k + 1] = u[k] + tail[k + 1];
  Real abar{0};
  for (int k = 1; k <= K; ++k) abar += Real(k) * alpha[k];

  Real res{0};
  const Real drive = Real(rho) * abar;
  using std::abs;
  using std::max;
  for (int k = 0; k < K; ++k) {
    const Real r = abs(alpha[k + 1] * u[k + 1] - drive * alpha[k]) / alpha[k];
    res = max(res, r);
  }

  // regenerate in log space, then renormalize and damp
  const Real logdrive = log(drive);
  std::vector<Real> lg(K + 1, Real{0});
  Real lgmax{0};
  for (int k = 0; k < K; ++k) {
    lg[k + 1] = lg[k] + logdrive - log(u[k + 1]);
    lgmax = max(lgmax, lg[k + 1]);
  }
  Real mass{0};
  std::vector<Real> fresh(K + 1);
  for (int k = 0; k <= K; ++k) {
    fresh[k] = exp(lg[k] - lgmax);
    mass += fresh[k];
  }
  const Real th(theta);
  Real total{0};
  for (int k = 0; k <= K; ++k) {
    alpha[k] = th * (fresh[k] / mass) + (Real{1} - th) * alpha[k];
    total += alpha[k];
  }
  for (int k = 0; k <= K; ++k) alpha[k] /= total;
  return res;
}

template <class Real>
void finalize(Distribution<Real>& d) {
  const int K = d.K;
  std::vector<Real> tail(K + 2, Real{0});
  for (int k = K; k >= 0; --k) tail[k] = tail[k + 1] + d.alpha[k];
  d.u.assign(K + 1, Real{0});
  for (int k = 0; k < K; ++k) d.u[k + 1] = d.u[k] + tail[k + 1];
  d.D.assign(K + 1, Real{0});
  for (int m = K - 1; m >= 0; --m) d.D[m] = d.D[m + 1] + tail[m + 1];
  d.alpha_bar = Real{0};
  for (int k = 1; k <= K; ++k) d.alpha_bar += Real(k) * d.alpha[k];
}

}  // namespace detail

template <class Real>
Real tail_constant(const Distribution<Real>& dist);

// Solve the equilibrium at load rho.  The truncation K grows until the last
// retained weight is negligible and the geometric tail bound (ratio
// rho/(1-tol), from the tail-ratio sandwich) leaves mass below tol.
template <class Real = double>
Distribution<Real> solve(const SystemParams& params, double tol = 1e-13,
                         int K_max = 2'000'000, SolveOptions opts = {}) {
  params.validate();
  if (!(tol > 0)) throw DomainError("solve: tol must be positive");
  const double rho = params.rho;

  Distribution<Real> d;
  d.rho = rho;
  if (rho == 0.0) {  // no arrivals: all mass at zero
    d.alpha = {Real{1}};
    d.u = {Real{0}};
    d.D = {Real{0}};
    d.K = 0;
    d.K_rho = Real{1};
    return d;
  }

  int K = std::clamp(static_cast<int>(std::ceil(std::log(1e-18) / std::log(rho))), 32, K_max);
  std::vector<Real> alpha;
  {  // geometric initial guess
    alpha.resize(K + 1);
    Real mass{0};
    for (int k = 0; k <= K; ++k) {
      alpha[k] = Real(1.0 - rho) * pow(Real(rho), k);
      mass += alpha[k];
    }
    for (auto& a : alpha) a /= mass;
  }

  long total_iter = 0;
  const Real target(tol);
  for (;;) {
    Real res{};
    Real best{std::numeric_limits<double>::max()};
    long stalled = 0;
    bool converged = false;
    while (total_iter < opts.max_iterations) {
      res = detail::sweep(alpha, rho, opts.theta);
      ++total_iter;
      if (res <= target) {
        converged = true;
        break;
      }
      // plateau detection: the iteration has hit its precision floor
      if (res < best * Real(0.9999)) {
        best = res;
        stalled = 0;
      } else if (++stalled > 800) {
        break;
      }
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "meanfield::solve: no convergence after " << total_iter
          << " iterations at rho=" << rho << " (residual " << to_double(res)
          << "); tol below the precision floor, theta too aggressive, or rho too close to 1";
      throw ConvergenceError(msg.str());
    }

    // truncation adequacy
    using std::max;
    Real amax{0};
    for (const auto& a : alpha) amax = max(amax, a);
    const double r = rho / (1.0 - tol);  // certified tail ratio
    const Real tail_mass = alpha[K] * Real(r / (1.0 - r));
    if (to_double(alpha[K]) < opts.truncation_floor * to_double(amax) &&
        to_double(tail_mass) < tol)
      break;
    if (K >= K_max)
      throw ConvergenceError("meanfield::solve: K_max too small for requested tolerance");
    const int K_new = std::min(K_max, K + K / 2 + 32);
    alpha.resize(K_new + 1);
    for (int k = K + 1; k <= K_new; ++k) alpha[k] = alpha[K] * pow(Real(rho), k - K);
    Real mass{0};
    for (const auto& a : alpha) mass += a;
    for (auto& a : alpha) a /= mass;
    K = K_new;
  }

  d.alpha = std::move(alpha);
  d.K = K;
  d.iterations = total_iter;
  detail::finalize(d);
  {  // residual of the final iterate
    using std::abs;
    using std::max;
    Real res{0};
    const Real drive = Real(rho) * d.alpha_bar;
    for (int k = 0; k < K; ++k)
      res = max(res, abs(d.alpha[k + 1] * d.u[k + 1] - drive * d.alpha[k]) / d.alpha[k]);
    d.residual = res;
  }
  d.K_rho = tail_constant(d);
  return d;
}

// K(rho) = lim alpha_k rho^{-k}, computed two ways: directly at the truncation
// frontier (with Aitken extrapolation of the geometric approach) and through
// the product formula
//     alpha_k rho^{-k} = alpha_0 prod_{m=1}^{k} alpha_bar / (alpha_bar - D_m).
// Both must agree to 1e-8 relative; the product value is returned.
template <class Real>
Real tail_constant(const Distribution<Real>& dist) {
  using std::abs;
  using std::exp;
  using std::log;
  if (dist.rho == 0.0) return dist.alpha[0];  // empty product
  const int K = dist.K;
  if (K < 8) throw DomainError("tail_constant: distribution too short");
  const Real logrho = log(Real(dist.rho));

  auto direct_at = [&](int k) { return exp(log(dist.alpha[k]) - Real(k) * logrho); };
  const Real x0 = direct_at(K - 2), x1 = direct_at(K - 1), x2 = direct_at(K);
  Real direct = x2;
  const Real d1 = x1 - x0, d2 = x2 - x1;
  const Real dd = d2 - d1;
  if (abs(dd) > Real{0}) {
    const Real aitken = x2 - d2 * d2 / dd;
    if (aitken > Real{0}) direct = aitken;
  }

  Real logprod = log(dist.alpha[0]);
  for (int m = 1; m <= K; ++m) logprod -= log1p(-dist.D[m] / dist.alpha_bar);
  const Real prod = exp(logprod);

  if (abs(prod - direct) > Real{1e-8} * abs(prod)) {
    std::ostringstream msg;
    msg << "tail_constant: estimators disagree (product " << to_double(prod) << ", direct "
        << to_double(direct) << ") -- truncation K insufficient";
    throw InvariantViolation(msg.str());
  }
  return prod;
}

// alpha'(1) = alpha_bar, with the balance identity rho*alpha_bar =
// alpha_1/alpha_0 - alpha_1 checked (it is the k = 0 case of the equilibrium,
// since u_1 = 1 - alpha_0).
template <class Real>
Real alpha_prime_exact(const Distribution<Real>& dist) {
  using std::abs;
  if (dist.rho == 0.0) return Real{0};
  if (!(dist.alpha[0] > Real{0})) throw DomainError("alpha_prime_exact: alpha_0 must be positive");
  const Real lhs = Real(dist.rho) * dist.alpha_bar;
  const Real rhs = dist.alpha[1] / dist.alpha[0] - dist.alpha[1];
  if (abs(lhs - rhs) > Real{1e-10} * abs(lhs))
    throw InvariantViolation("alpha_prime_exact: identity rho*alpha_bar = alpha_1/alpha_0 - alpha_1 "
                             "violated; fixed point not converged");
  return dist.alpha_bar;
}

// Epsilon used in tail-ratio bounds; the underlying estimate is existential,
// the concrete choice is (1-rho)/10.
inline double tail_ratio_epsilon(double rho) { return (1.0 - rho) / 10.0; }

}  // namespace starmin::meanfield
