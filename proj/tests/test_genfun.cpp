#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>

#include "starmin/genfun.hpp"
#include "starmin/meanfield.hpp"

using namespace starmin;
using namespace starmin::genfun;

namespace {

// The coefficients factor as c_k = (log rho)^{3(k-1)} d_k with d_k rational in
// rho: substituting strips the transcendental factor from the recurrence.
// Rational-arithmetic oracle used to pin the floating evaluation.
using Rational = boost::multiprecision::cpp_rational;

std::vector<Rational> rational_d(const Rational& rho, int M) {
  auto rpow = [&](int e) {
    Rational r = 1;
    for (int i = 0; i < e; ++i) r *= rho;
    return r;
  };
  std::vector<Rational> d(M + 1);
  d[1] = 1;
  for (int k = 2; k <= M; ++k) {
    Rational sum = 0;
    for (int j = 1; j < k; ++j) {
      const Rational denom = (1 - rpow(j)) * (1 - rpow(j));
      sum += d[j] * d[k - j] * rpow(j + k - 1) / denom;
    }
    d[k] = sum / (1 - rpow(k - 1));
  }
  return d;
}

}  // namespace

TEST_CASE("c_2 matches the hand substitution rho^2 log^3(rho)/(1-rho)^3") {
  for (double rho : {0.3, 0.5, 0.9}) {
    CAPTURE(rho);
    const auto s = scaled_coefficients<double>(rho, 16);
    const double L = std::log(rho);
    const double expect = rho * rho * L * L * L / std::pow(1.0 - rho, 3);
    CHECK(s.c[1] == 1.0);
    CHECK(s.c[2] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("c_3 matches the k=3 hand substitution") {
  const double rho = 0.5, L = std::log(rho);
  const auto s = scaled_coefficients<double>(rho, 16);
  const double c2 = s.c[2];
  const double expect = L * L * L / (1 - rho * rho) *
                        (c2 * std::pow(rho, 3) / ((1 - rho) * (1 - rho)) +
                         c2 * std::pow(rho, 4) / ((1 - rho * rho) * (1 - rho * rho)));
  CHECK(s.c[3] == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("rational-arithmetic oracle pins the floating recurrence") {
  const auto d = rational_d(Rational(1, 2), 14);
  const auto s = scaled_coefficients<double>(0.5, 14);
  const double L3 = std::pow(std::log(0.5), 3);
  double scale = 1.0;  // (log rho)^{3(k-1)}
  for (int k = 1; k <= 14; ++k) {
    CAPTURE(k);
    const double expect = scale * static_cast<double>(d[k]);
    CHECK(s.c[k] == doctest::Approx(expect).epsilon(1e-12));
    scale *= L3;
  }
}

TEST_CASE("sign alternation of the scaled coefficients") {
  for (double rho : {0.3, 0.5, 0.7, 0.9, 0.95}) {
    CAPTURE(rho);
    const auto s = scaled_coefficients<double>(rho, 400);
    for (int k = 1; k < s.M; ++k) {
      CAPTURE(k);
      REQUIRE(((s.c[k] > 0) != (s.c[k + 1] > 0)));
    }
  }
}

TEST_CASE("coefficient-level continuity toward the rho=1 limit series") {
  // c_k(rho) -> gamma_{k-1} as rho -> 1; the gap shrinks like (1-rho)
  const std::vector<double> gamma{1.0, -1.0, 5.0 / 8.0, -17.0 / 54.0, 121.0 / 864.0};
  const auto near = scaled_coefficients<double>(0.9999, 8);
  const auto far = scaled_coefficients<double>(0.999, 8);
  for (int k = 1; k <= 5; ++k) {
    CAPTURE(k);
    const double gap_near = std::abs(near.c[k] - gamma[k - 1]);
    const double gap_far = std::abs(far.c[k] - gamma[k - 1]);
    CHECK(gap_near < 1e-4);
    CHECK(gap_near < 0.15 * gap_far);
  }
}

TEST_CASE("anchoring at rho=0.5: partial sums, stability, frozen value") {
  auto s = scaled_coefficients<double>(0.5, 160);
  const auto rep = anchor_xi(s, XiMethod::partial_sums);
  CHECK(!rep.used_chain);
  CHECK(rep.xi == doctest::Approx(3.963737192022).epsilon(1e-9));
  CHECK(rep.c_at_xi < 1e-12);
  CHECK(rep.c_at_xi < 1e-12 * rep.max_partial);
  CHECK(rep.stability < 1e-8);
}

TEST_CASE("anchoring: xi increases with the load") {
  double prev = 0.0;
  const std::vector<std::pair<double, double>> frozen{
      {0.3, 3.390852384}, {0.5, 3.963737192}, {0.7, 9.684220015}, {0.9, 1494.5005096}};
  for (const auto& [rho, expect] : frozen) {
    CAPTURE(rho);
    auto s = scaled_coefficients<double>(rho, 240);
    const auto rep = anchor_xi(s);
    CHECK(rep.xi == doctest::Approx(expect).epsilon(1e-7));
    CHECK(rep.xi > prev);
    prev = rep.xi;
  }
}

TEST_CASE("chained evaluator agrees with certified partial sums at moderate load") {
  for (double rho : {0.3, 0.5, 0.7}) {
    CAPTURE(rho);
    auto s = scaled_coefficients<double>(rho, 240);
    const auto a = find_xi_partial_sums(s);
    const auto b = find_xi_chained(s);
    CHECK(std::abs(a.xi - b.xi) / a.xi < 1e-9);
  }
}

TEST_CASE("chained log c matches the series where both are valid") {
  auto s = scaled_coefficients<double>(0.5, 160);
  ChainedEvaluator ev(s);
  for (double z : {0.5, 1.0, 2.0, 3.0}) {
    CAPTURE(z);
    const auto direct = evaluate_series(s, z);
    REQUIRE(direct.certified);
    CHECK(std::log(direct.value) == doctest::Approx(ev.log_c(z)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(ev.log_c(50.0), DomainError);  // beyond the first zero
}

TEST_CASE("calibration at rho=0.5 reconstructs the equilibrium law") {
  auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(0.5), 1e-13);
  auto s = scaled_coefficients<double>(0.5, 160);
  anchor_xi(s);
  const auto rep = calibrate_alpha(s, dist);
  CHECK(rep.max_rel_error < 1e-6);
  CHECK(rep.xi_identity_rel < 1e-8);
  CHECK(to_double(s.a1) == doctest::Approx(dist.K_rho / 0.5).epsilon(1e-14));
  CHECK(to_double(s.alpha_prime) == doctest::Approx(dist.alpha_bar).epsilon(1e-14));
  // k=1 case spelled out: alpha_0 = rho a(rho) with a(z) = a1 c(z xi)
  const auto cv = evaluate_series(s, 0.5 * to_double(s.xi));
  const double recon = 0.5 * to_double(s.a1) * cv.value;
  CHECK(recon == doctest::Approx(dist.alpha[0]).epsilon(1e-8));
  // anchoring consistency: a(1) = a1 c(xi) vanishes
  const auto at_xi = evaluate_series(s, to_double(s.xi));
  CHECK(std::abs(to_double(s.a1) * at_xi.value) < 1e-10 * to_double(s.a1));
}

TEST_CASE("calibration at rho=0.8 via the chained fallback") {
  PrecisionGuard guard(256);
  auto dist = meanfield::solve<BigFloat>(meanfield::SystemParams::from_rho(0.8), 1e-12);
  auto s = scaled_coefficients<BigFloat>(0.8, 400);
  anchor_xi(s);
  const auto rep = calibrate_alpha(s, dist, 1e-6, 30);
  CHECK(rep.max_rel_error < 1e-6);
  CHECK(rep.xi_identity_rel < 1e-8);
}

TEST_CASE("calibration rejects mismatched loads") {
  auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(0.5), 1e-13);
  auto s = scaled_coefficients<double>(0.3, 64);
  anchor_xi(s);
  CHECK_THROWS_AS(calibrate_alpha(s, dist), DomainError);
}

TEST_CASE("scaling consistency: reconstructed a_k satisfies the raw recurrence") {
  auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(0.5), 1e-13);
  auto s = scaled_coefficients<double>(0.5, 64);
  anchor_xi(s);
  calibrate_alpha(s, dist);
  const double rho = 0.5, L = std::log(rho);
  const double abar = to_double(s.alpha_prime), xi = to_double(s.xi);
  std::vector<double> a(33, 0.0);
  for (int k = 1; k <= 32; ++k) a[k] = -to_double(s.c[k]) * L * L * L * abar * std::pow(xi, k);
  CHECK(a[1] > 0.0);
  for (int k = 2; k <= 30; ++k) {
    CAPTURE(k);
    double conv = 0.0;
    for (int j = 1; j < k; ++j) {
      const double omr = -std::expm1(j * L);
      conv += a[j] * a[k - j] * std::pow(rho, j + k - 1) / (omr * omr);
    }
    const double lhs = abar * (std::pow(rho, k - 1) - 1.0) * a[k];
    CHECK(std::abs(lhs - conv) <= 1e-10 * std::abs(lhs));
  }
}

TEST_CASE("functional equation residual") {
  auto s = scaled_coefficients<double>(0.5, 160);
  SUBCASE("z=0: both sides are 1") { CHECK(functional_residual(s, 0.0, 32) == 0.0); }
  SUBCASE("real z=1") { CHECK(functional_residual(s, 1.0, 128) < 1e-12); }
  SUBCASE("complex z") {
    CHECK(functional_residual(s, std::complex<double>(0.5, 0.5), 128) < 1e-10);
  }
  SUBCASE("at the anchoring zero, 1 + log(rho) v(xi) vanishes") {
    anchor_xi(s);
    Evaluators<double> ev{s};
    const double v = ev.v(to_double(s.xi));
    CHECK(std::abs(1.0 + std::log(0.5) * v) < 1e-8);
  }
}

TEST_CASE("f: both series forms agree on the overlap") {
  const double rho = 0.5;
  SUBCASE("t=0") {
    const auto f = evaluate_f(0.0, rho);
    CHECK(f.form1 == 0.0);
    CHECK(f.form2 == 0.0);
  }
  SUBCASE("t=-1 against a brute-force oracle") {
    const auto f = evaluate_f(-1.0, rho);
    REQUIRE(f.form1_valid);
    REQUIRE(f.form2_valid);
    CHECK(std::abs(f.form1 - f.form2) < 1e-12);
    double brute = 0.0;  // sum (rho^j/(1-rho^j))^2 (-1)^j
    for (int j = 1; j < 200; ++j) {
      const double w = std::pow(rho, j) / (1.0 - std::pow(rho, j));
      brute += w * w * ((j % 2) ? -1.0 : 1.0);
    }
    CHECK(f.form1 == doctest::Approx(brute).epsilon(1e-13));
  }
  SUBCASE("complex t with negative real part") {
    const auto f = evaluate_f(std::complex<double>(-0.7, 0.4), rho);
    REQUIRE(f.form1_valid);
    REQUIRE(f.form2_valid);
    CHECK(std::abs(f.form1 - f.form2) < 1e-12);
  }
  SUBCASE("ratio test: terms shrink geometrically at t=0.5") {
    // |term_{j+1}/term_j| -> t rho^2 = 0.125
    double prev = 0, cur = 0;
    const double t = 0.5;
    for (int j = 1; j <= 12; ++j) {
      const double w = std::pow(rho, j) / (1.0 - std::pow(rho, j));
      const double term = w * w * std::pow(t, j);
      if (j == 11) prev = term;
      if (j == 12) cur = term;
    }
    CHECK(cur / prev == doctest::Approx(0.125).epsilon(0.01));
  }
  SUBCASE("near a pole of form 2 with form 1 divergent") {
    CHECK_THROWS_AS(evaluate_f(4.0, 0.5), DomainError);  // t = rho^{-2} exactly
  }
}

TEST_CASE("b(1) equals alpha'(1)") {
  auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(0.5), 1e-13);
  auto s = scaled_coefficients<double>(0.5, 160);
  anchor_xi(s);
  calibrate_alpha(s, dist);
  Evaluators<double> ev{s};
  CHECK(ev.b(1.0) == doctest::Approx(dist.alpha_bar).epsilon(1e-10));
}

TEST_CASE("pole-series reconstruction of the generating function") {
  for (double rho : {0.3, 0.5}) {
    CAPTURE(rho);
    auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(rho), 1e-13);
    auto s = scaled_coefficients<double>(rho, 160);
    anchor_xi(s);
    calibrate_alpha(s, dist);
    for (double z : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      CAPTURE(z);
      double direct = 0.0;
      for (int k = dist.K; k >= 0; --k) direct = direct * z + dist.alpha[k];
      CHECK(alpha_from_poles(s, z) == doctest::Approx(direct).epsilon(1e-6));
    }
  }
}

TEST_CASE("error paths") {
  CHECK_THROWS_AS(scaled_coefficients<double>(1.0, 16), DomainError);
  CHECK_THROWS_AS(scaled_coefficients<double>(0.5, 1), DomainError);
  auto tiny = scaled_coefficients<double>(0.9, 24);
  CHECK_THROWS_AS(find_xi_partial_sums(tiny), ConvergenceError);  // M far too small
  // truncated-tail territory: the certified scan must refuse a spurious zero
  auto s = scaled_coefficients<double>(0.8, 100);
  CHECK_THROWS_AS(find_xi_partial_sums(s), ConvergenceError);
}
