#include <doctest.h>

#include <cmath>
#include <vector>

#include "starmin/meanfield.hpp"

using namespace starmin;
using namespace starmin::meanfield;

namespace {

// direct-summation oracle for u_k = sum_l min(k,l) alpha_l
std::vector<double> u_oracle(const std::vector<double>& alpha) {
  std::vector<double> u(alpha.size(), 0.0);
  for (std::size_t k = 0; k < alpha.size(); ++k)
    for (std::size_t l = 0; l < alpha.size(); ++l)
      u[k] += std::min(k, l) * alpha[l];
  return u;
}

}  // namespace

TEST_CASE("compute_u: single atom at k=1") {
  std::vector<double> alpha{0.0, 1.0, 0.0, 0.0, 0.0};
  const auto u = compute_u<double>(alpha);
  CHECK(u[0] == 0.0);
  for (std::size_t k = 1; k < u.size(); ++k) CHECK(u[k] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("compute_u: single atom at k=3 gives min(k,3)") {
  std::vector<double> alpha{0, 0, 0, 1.0, 0, 0, 0};
  const auto u = compute_u<double>(alpha);
  const std::vector<double> expect{0, 1, 2, 3, 3, 3, 3};
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(u[k] == doctest::Approx(expect[k]).epsilon(1e-15));
}

TEST_CASE("compute_u: geometric law, u_2 = q(1+q)") {
  const double q = 0.5;
  std::vector<double> alpha(80);
  for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] = (1 - q) * std::pow(q, k);
  const auto u = compute_u<double>(alpha);
  CHECK(u[2] == doctest::Approx(0.75).epsilon(1e-13));
  const auto ref = u_oracle(alpha);
  for (std::size_t k = 0; k < u.size(); ++k) CHECK(u[k] == doctest::Approx(ref[k]).epsilon(1e-12));
}

TEST_CASE("compute_u rejects bad input") {
  CHECK_THROWS_AS(compute_u<double>(std::vector<double>{0.5, -0.1, 0.6}), DomainError);
  CHECK_THROWS_AS(compute_u<double>(std::vector<double>{0.3, 0.3}), DomainError);
}

TEST_CASE("solve: rho=0 is the point mass at zero") {
  const auto d = solve<double>(SystemParams::from_rho(0.0), 1e-13);
  REQUIRE(d.alpha.size() == 1);
  CHECK(d.alpha[0] == 1.0);
  CHECK(d.alpha_bar == 0.0);
  CHECK(tail_constant(d) == 1.0);  // K(0) = alpha_0, empty product
  CHECK(alpha_prime_exact(d) == 0.0);
}

TEST_CASE("solve: rho=0.5 regression values") {
  const auto d = solve<double>(SystemParams::from_rho(0.5), 1e-13);
  CHECK(d.residual <= 1e-13);
  double mass = 0;
  for (double a : d.alpha) mass += a;
  CHECK(std::abs(mass - 1.0) < 1e-12);
  CHECK(d.alpha[0] < 0.5);  // alpha_0 < 1 - rho
  // frozen from a 50-digit independent solve of the same equations
  CHECK(d.alpha_bar == doctest::Approx(1.7636472001165747).epsilon(1e-11));
  CHECK(d.alpha[0] == doctest::Approx(0.24544223856142).epsilon(1e-10));
  CHECK(d.K_rho == doctest::Approx(1.1640267276338058).epsilon(1e-9));
}

TEST_CASE("solve: equilibrium properties across the load grid") {
  double prev_abar = -1.0;
  for (double rho : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    CAPTURE(rho);
    const double tol = rho > 0.8 ? 1e-12 : 1e-13;
    const auto d = solve<double>(SystemParams::from_rho(rho), tol);
    CHECK(d.residual <= 1e-12);
    CHECK(d.alpha[0] < 1.0 - rho);
    for (int k = 0; k <= d.K; ++k) CHECK(d.alpha[k] > 0.0);
    // u_1 = 1 - alpha_0 and u_k + D_k = alpha_bar
    CHECK(d.u[1] == doctest::Approx(1.0 - d.alpha[0]).epsilon(1e-12));
    for (int k = 0; k <= d.K; k += 7)
      CHECK(d.u[k] + d.D[k] == doctest::Approx(d.alpha_bar).epsilon(1e-12));
    // u increments nonincreasing (concavity)
    for (int k = 0; k + 2 <= d.K; ++k)
      CHECK(d.u[k + 1] - d.u[k] >= d.u[k + 2] - d.u[k + 1] - 1e-15);
    // monotone load
    CHECK(d.alpha_bar > prev_abar);
    prev_abar = d.alpha_bar;
    // identity rho*abar = alpha_1/alpha_0 - alpha_1 (throws if off by > 1e-10)
    CHECK(alpha_prime_exact(d) == d.alpha_bar);
  }
}

TEST_CASE("solve: geometric tail at rho=0.9") {
  const auto d = solve<double>(SystemParams::from_rho(0.9), 1e-12);
  // ratio alpha_{k+1}/alpha_k settles at rho
  for (int k = 250; k < d.K - 10; ++k) {
    CAPTURE(k);
    CHECK(std::abs(d.alpha[k + 1] / d.alpha[k] - 0.9) < 1e-6);
  }
  // the sandwich rho <= ratio <= rho/(1-eps) holds beyond the index where
  // D_k <= eps * alpha_bar
  const double eps = tail_ratio_epsilon(0.9);
  int k0 = 0;
  while (k0 <= d.K && d.D[k0] > eps * d.alpha_bar) ++k0;
  for (int k = k0; k < d.K; ++k) {
    const double ratio = d.alpha[k + 1] / d.alpha[k];
    CHECK(ratio >= 0.9 - 1e-12);
    CHECK(ratio <= 0.9 / (1.0 - eps) + 1e-12);
  }
  // log alpha_k - k log rho converges to log K(rho)
  const double direct = std::exp(std::log(d.alpha[d.K]) - d.K * std::log(0.9));
  CHECK(std::abs(direct - d.K_rho) / d.K_rho < 1e-6);
}

TEST_CASE("sum of D_l stays within the geometric scaling bound") {
  for (double rho : {0.3, 0.5, 0.7}) {
    CAPTURE(rho);
    const auto d = solve<double>(SystemParams::from_rho(rho), 1e-13);
    double sumD = 0;
    for (double x : d.D) sumD += x;
    const double eps = tail_ratio_epsilon(rho);
    const double bound = (rho + eps) / std::pow(1.0 - rho - eps, 3);
    CHECK(sumD > 0.0);
    CHECK(sumD < 2.0 * bound);
  }
}

TEST_CASE("tail_constant: estimators cross-checked at rho=0.5") {
  const auto d = solve<double>(SystemParams::from_rho(0.5), 1e-13);
  const double K1 = tail_constant(d);  // throws if product and direct disagree
  CHECK(K1 == doctest::Approx(d.K_rho).epsilon(1e-12));
}

TEST_CASE("solve rejects bad parameters") {
  CHECK_THROWS_AS(solve<double>(SystemParams::from_rho(1.0), 1e-13), DomainError);
  CHECK_THROWS_AS(solve<double>(SystemParams::from_rho(-0.1), 1e-13), DomainError);
  CHECK_THROWS_AS(solve<double>(SystemParams::from_rho(0.5), -1.0), DomainError);
  SolveOptions opts;
  opts.max_iterations = 2;
  CHECK_THROWS_AS(solve<double>(SystemParams::from_rho(0.5), 1e-13, 2'000'000, opts),
                  ConvergenceError);
}

TEST_CASE("SystemParams validation") {
  SystemParams p;
  p.rho = 0.5;
  p.lambda = 0.4;  // rho != lambda * v
  p.v = 1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  CHECK_NOTHROW(SystemParams::from_rho(0.5, 2.0).validate());
}

TEST_CASE("extended precision path agrees with double at rho=0.5") {
  PrecisionGuard guard(192);
  const auto dd = solve<double>(SystemParams::from_rho(0.5), 1e-13);
  const auto db = solve<BigFloat>(SystemParams::from_rho(0.5), 1e-13);
  CHECK(std::abs(to_double(db.alpha_bar) - dd.alpha_bar) < 1e-12);
  CHECK(std::abs(to_double(db.K_rho) - dd.K_rho) < 1e-10);
  CHECK(to_double(db.residual) <= 1e-13);
}
