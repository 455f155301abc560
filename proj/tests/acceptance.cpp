// End-to-end acceptance suite.  Each numbered criterion prints one PASS/FAIL
// line; the process exit code is the number of failures.

#include <boost/multiprecision/cpp_int.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "starmin/asympt.hpp"
#include "starmin/genfun.hpp"
#include "starmin/limit_ode.hpp"
#include "starmin/meanfield.hpp"
#include "starmin/netsim.hpp"

using namespace starmin;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%2d] %-34s %s   %s (%.1fs)\n", id, name.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

void criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = Clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = body();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  report(id, name, pass, detail, std::chrono::duration<double>(Clock::now() - t0).count());
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

}  // namespace

int main() {
  limit_ode::LimitSolution ode_solution;

  // 1. constant A from the limit system, two estimators, conservation identity
  criterion(1, "constant A", [&]() -> std::pair<bool, std::string> {
    const auto t0 = Clock::now();
    ode_solution = limit_ode::solve_limit_system();
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    const double agree =
        std::abs(ode_solution.A_integral - ode_solution.A_limit) / ode_solution.A_integral;
    const bool pass = ode_solution.A >= 1.25 && ode_solution.A <= 1.35 && agree <= 0.01 &&
                      ode_solution.identity_max < 1e-8 && wall < 60.0;
    return {pass, fmt("A=%.10f estimators agree %.1e, identity %.1e", ode_solution.A, agree,
                      ode_solution.identity_max)};
  });

  // 2. series seed in exact rational arithmetic + integral form of the flow
  criterion(2, "series seed", [&]() -> std::pair<bool, std::string> {
    using Rational = boost::multiprecision::cpp_rational;
    const auto seed = limit_ode::series_seed<Rational>(8);
    const bool exact = seed.c[1] == Rational(-1) && seed.c[2] == Rational(5, 8) &&
                       seed.c[3] == Rational(-17, 54) && seed.v[2] == Rational(-1, 4) &&
                       seed.v[3] == Rational(5, 72);
    const bool integral_form = ode_solution.eq16_residual < 1e-6;
    return {exact && integral_form,
            fmt("rational seed %s, integral-form residual %.1e", exact ? "exact" : "WRONG",
                ode_solution.eq16_residual)};
  });

  // 3. Blasius equation residual via chain-rule derivatives
  criterion(3, "Blasius residual", [&]() -> std::pair<bool, std::string> {
    std::vector<double> ys;
    for (double y = -2.0; y <= 4.0 + 1e-9; y += 0.02) ys.push_back(y);
    const auto rep = limit_ode::blasius_residual(ode_solution, ys);
    return {rep.max_residual_chain < 1e-8,
            fmt("chain-rule %.1e (fd cross-check %.1e)", rep.max_residual_chain,
                rep.max_residual_fd)};
  });

  // 4. equilibrium invariants across the load grid
  criterion(4, "equilibrium grid", [&]() -> std::pair<bool, std::string> {
    bool pass = true;
    double worst_res = 0, worst_tail = 0, worst_mass = 0;
    for (double rho : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
      const double tol = rho > 0.75 ? 1e-12 : 1e-13;
      const auto d = meanfield::solve<double>(meanfield::SystemParams::from_rho(rho), tol);
      double mass = 0;
      for (double a : d.alpha) mass += a;
      worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
      worst_res = std::max(worst_res, d.residual);
      pass = pass && d.residual <= 1e-12 && std::abs(mass - 1.0) <= 1e-12 &&
             d.alpha[0] < 1.0 - rho;
      // identity rho abar = alpha_1/alpha_0 - alpha_1 to 1e-10 (throws if not)
      meanfield::alpha_prime_exact(d);
      // tail ratio -> rho within 1e-6 on the last stretch
      for (int k = d.K - 30; k < d.K - 5; ++k)
        worst_tail = std::max(worst_tail, std::abs(d.alpha[k + 1] / d.alpha[k] - rho));
      // K(rho): product formula vs direct estimator to 1e-8 (throws if not)
      meanfield::tail_constant(d);
    }
    pass = pass && worst_tail < 1e-6;
    return {pass, fmt("residual<=%.1e, |mass-1|<=%.1e, tail gap %.1e", worst_res, worst_mass,
                      worst_tail)};
  });

  // 5. reconstruction of alpha from the calibrated expansion, k <= 30
  criterion(5, "alpha reconstruction", [&]() -> std::pair<bool, std::string> {
    double worst = 0;
    bool alternating = true;
    for (double rho : {0.3, 0.5, 0.8}) {
      genfun::CalibrationReport rep;
      if (rho < 0.75) {
        auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(rho), 1e-13);
        auto s = genfun::scaled_coefficients<double>(rho, 240);
        genfun::anchor_xi(s);
        rep = genfun::calibrate_alpha(s, dist, 1e-6, 30);
        for (int k = 1; k < s.M; ++k)
          alternating = alternating && ((s.c[k] > 0) != (s.c[k + 1] > 0));
      } else {
        PrecisionGuard guard(256);
        auto dist = meanfield::solve<BigFloat>(meanfield::SystemParams::from_rho(rho), 1e-12);
        auto s = genfun::scaled_coefficients<BigFloat>(rho, 400);
        genfun::anchor_xi(s);
        rep = genfun::calibrate_alpha(s, dist, 1e-6, 30);
        for (int k = 1; k < s.M; ++k)
          alternating = alternating && ((s.c[k] > BigFloat(0)) != (s.c[k + 1] > BigFloat(0)));
      }
      worst = std::max(worst, rep.max_rel_error);
    }
    return {worst < 1e-6 && alternating,
            fmt("worst rel err %.1e, alternation %s", worst, alternating ? "holds" : "BROKEN")};
  });

  // 6. anchoring zero: residual, truncation stability, monotone in rho
  criterion(6, "anchoring zero", [&]() -> std::pair<bool, std::string> {
    bool pass = true;
    double prev = 0, worst_c = 0, worst_stab = 0;
    for (double rho : {0.3, 0.5, 0.7, 0.9}) {
      auto s = genfun::scaled_coefficients<double>(rho, 240);
      const auto rep = genfun::anchor_xi(s);
      worst_c = std::max(worst_c, rep.c_at_xi);
      worst_stab = std::max(worst_stab, rep.stability);
      pass = pass && rep.c_at_xi < 1e-12 && rep.stability < 1e-8 && rep.xi > prev;
      prev = rep.xi;
    }
    return {pass, fmt("|c(xi)|<=%.1e, stability<=%.1e, increasing", worst_c, worst_stab)};
  });

  // 7. heavy-traffic expansions: both ratios approach their limits
  //    monotonically along rho -> 1 (exponents unspecified, so trend-based)
  asympt::Report trend_report;
  criterion(7, "heavy-traffic trend", [&]() -> std::pair<bool, std::string> {
    const auto t0 = Clock::now();
    const auto mellin = limit_ode::mellin_moments(ode_solution);
    const asympt::MellinInputs inputs{mellin.cstar1, mellin.dcds1};
    const std::vector<double> grid{0.90, 0.95, 0.98, 0.99};
    trend_report = asympt::build_report(grid, inputs);
    bool pass = true;
    std::string detail = "|ratio-1|: ";
    double prev_gap = 1e300, prev_xi = 1e300;
    for (const auto& row : trend_report.rows) {
      if (!row.ok) return {false, "row failed: " + row.error};
      const double gap = std::abs(row.ratio_alpha_bar - 1.0);
      pass = pass && gap < prev_gap && row.xi_log_gap < prev_xi;
      detail += fmt("%.4f ", gap);
      prev_gap = gap;
      prev_xi = row.xi_log_gap;
    }
    detail += "| xi log gaps: ";
    for (const auto& row : trend_report.rows) detail += fmt("%.4f ", row.xi_log_gap);
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    return {pass && wall < 600.0, detail};
  });

  // 8. byproduct shape: (1-rho) log K(rho) near 1/A at rho = 0.98
  criterion(8, "tail-constant shape", [&]() -> std::pair<bool, std::string> {
    double K98 = 0;
    for (const auto& row : trend_report.rows)
      if (std::abs(row.rho - 0.98) < 1e-12 && row.ok) K98 = row.K_exact;
    if (K98 == 0) return {false, "no rho=0.98 row available"};
    const double shape = 0.02 * std::log(K98);
    const double target = 1.0 / ode_solution.A;
    const double rel = std::abs(shape - target) / target;
    return {rel < 0.15, fmt("(1-rho)logK=%.4f vs 1/A=%.4f (off %.1f%%)", shape, target,
                            100 * rel)};
  });

  // 9. simulator vs exact stationary solve on the coupled pair
  criterion(9, "simulator vs oracle", [&]() -> std::pair<bool, std::string> {
    const auto topo = netsim::Topology::bipartite(1, 2, 0.15);  // shared-link load 0.3
    const auto oracle = netsim::exact_oracle(topo, 1.0, 40);
    netsim::SimParams p;
    p.horizon = 4e5;
    p.seed = 2024;
    const auto sim = netsim::simulate(topo, p);
    const auto sim2 = netsim::simulate(topo, p);
    const double tv = netsim::tv_distance(sim.empirical_alpha, oracle.link_occupancy);
    const bool deterministic =
        sim.empirical_alpha == sim2.empirical_alpha && sim.n_events == sim2.n_events;
    return {tv < 0.01 && deterministic,
            fmt("TV=%.4f, determinism %s", tv, deterministic ? "ok" : "BROKEN")};
  });

  // 10. chaos-propagation heuristic: N=100 links against the equilibrium law
  criterion(10, "mean-field heuristic N=100", [&]() -> std::pair<bool, std::string> {
    const auto t0 = Clock::now();
    const auto topo = netsim::Topology::star(100, 0.5);
    netsim::SimParams p;
    p.horizon = 6000.0;
    p.seed = 31;
    const auto sim = netsim::simulate(topo, p);
    const auto mf = meanfield::solve<double>(meanfield::SystemParams::from_rho(0.5), 1e-13);
    const double tv = netsim::tv_distance(sim.empirical_alpha, mf.alpha);
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();
    return {tv < 0.05 && wall < 300.0, fmt("TV=%.4f over %llu events", tv,
                                           static_cast<unsigned long long>(sim.n_events))};
  });

  std::printf("ACCEPTANCE: %d/10 criteria passed\n", 10 - failures);
  return failures;
}
