// Command-line entry point.  Subcommands:
//   meanfield    equilibrium distribution at a load
//   coeffs       scaled expansion coefficients and the anchoring zero
//   ode          rho = 1 limit system, constant A, Mellin moments
//   asymptotics  heavy-traffic predictions vs exact values on a rho grid
//   simulate     finite-N event simulation
//   validate     cross-module consistency suite
//
// Every run writes its payloads plus a manifest.json into --out.  Payloads
// carry no timestamps, so identical configs give byte-identical files.

#include <chrono>
#include <complex>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "starmin/asympt.hpp"
#include "starmin/errors.hpp"
#include "starmin/genfun.hpp"
#include "starmin/json_io.hpp"
#include "starmin/limit_ode.hpp"
#include "starmin/manifest.hpp"
#include "starmin/meanfield.hpp"
#include "starmin/netsim.hpp"

namespace {

using namespace starmin;
using nlohmann::json;

struct Options {
  double rho = 0.5;
  std::string rho_grid;  // "a:b:step"
  double tol = 1e-12;
  int kmax = 2'000'000;
  int order = 200;
  double zmax = 2e5;
  std::uint64_t seed = 1;
  double horizon = 2000.0;
  int links = 100;
  std::string precision = "standard";
  std::string out = "out";
  std::string format = "json";
};

unsigned precision_bits(const std::string& p) {
  if (p == "standard") return 0;
  if (p.rfind("ext:", 0) == 0) {
    const int bits = std::stoi(p.substr(4));
    if (bits < 64 || bits > 1'000'000) throw DomainError("--precision ext:<bits> out of range");
    return static_cast<unsigned>(bits);
  }
  throw DomainError("--precision must be 'standard' or 'ext:<bits>'");
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> g;
  double a, b, step;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0)
    throw DomainError("--rho-grid must look like a:b:step with step > 0");
  for (double r = a; r <= b + 1e-12; r += step) g.push_back(r);
  return g;
}

json config_json(const Options& o, const std::string& sub) {
  json c;
  c["subcommand"] = sub;
  c["rho"] = o.rho;
  c["rho_grid"] = o.rho_grid;
  c["tol"] = o.tol;
  c["kmax"] = o.kmax;
  c["order"] = o.order;
  c["zmax"] = o.zmax;
  c["seed"] = o.seed;
  c["horizon"] = o.horizon;
  c["links"] = o.links;
  c["precision"] = o.precision;
  c["format"] = o.format;
  return c;
}

template <class Real>
int run_meanfield(const Options& o) {
  auto dist = meanfield::solve<Real>(meanfield::SystemParams::from_rho(o.rho), o.tol, o.kmax);
  io::write_json(o.out + "/meanfield.json", io::to_json(dist));
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "k,alpha\n" << std::setprecision(17);
    for (std::size_t k = 0; k < dist.alpha.size(); ++k)
      csv << k << ',' << to_double(dist.alpha[k]) << '\n';
    io::write_file(o.out + "/meanfield.csv", csv.str());
  }
  std::cout << "rho=" << o.rho << " K=" << dist.K << " alpha_bar=" << to_double(dist.alpha_bar)
            << " K(rho)=" << to_double(dist.K_rho) << " residual=" << to_double(dist.residual)
            << "\n";
  return 0;
}

template <class Real>
int run_coeffs(const Options& o) {
  auto series = genfun::scaled_coefficients<Real>(o.rho, o.order);
  auto xi = genfun::anchor_xi(series);
  auto dist = meanfield::solve<Real>(meanfield::SystemParams::from_rho(o.rho), o.tol, o.kmax);
  genfun::CalibrationReport calib;
  bool calibrated = true;
  try {
    calib = genfun::calibrate_alpha(series, dist);
  } catch (const ConvergenceError&) {
    calibrated = false;  // series evaluation not certifiable at this precision
  }
  double fres = -1.0;
  try {
    fres = genfun::functional_residual(series, Real{1}, 64);
  } catch (const DomainError&) {
  }
  io::write_json(o.out + "/coeffs.json",
                 io::to_json(series, xi, calibrated ? &calib : nullptr, fres));
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "k,c\n" << std::setprecision(17);
    for (int k = 1; k <= series.M; ++k) csv << k << ',' << to_double(series.c[k]) << '\n';
    io::write_file(o.out + "/coeffs.csv", csv.str());
  }
  std::cout << "rho=" << o.rho << " M=" << series.M << " xi=" << xi.xi
            << " |c(xi)|=" << xi.c_at_xi << (xi.used_chain ? " (chained)" : " (partial sums)")
            << "\n";
  return 0;
}

int run_ode(const Options& o) {
  limit_ode::OdeOptions opts;
  opts.z_max = o.zmax;
  opts.tol = std::min(o.tol, 1e-10);
  opts.seed_order = std::max(8, std::min(o.order, 60));
  auto sol = limit_ode::solve_limit_system(opts);
  const auto mellin = limit_ode::mellin_moments(sol);
  std::vector<double> ygrid;
  for (double y = -2.0; y <= 4.0 + 1e-9; y += 0.05) ygrid.push_back(y);
  const auto blasius = limit_ode::blasius_residual(sol, ygrid);
  io::write_json(o.out + "/ode.json", io::to_json(sol, mellin, &blasius));
  io::write_file(o.out + "/ode.csv", io::to_csv(sol));
  std::cout << "A=" << sol.A << " (integral " << sol.A_integral << ", limit " << sol.A_limit
            << ")  dcds1=" << sol.dcds1 << "  identity=" << sol.identity_max
            << "  blasius=" << blasius.max_residual_chain << "\n";
  return 0;
}

int run_asymptotics(const Options& o) {
  std::vector<double> grid =
      o.rho_grid.empty() ? std::vector<double>{0.90, 0.95, 0.98} : parse_grid(o.rho_grid);
  limit_ode::OdeOptions ode_opts;
  ode_opts.z_max = o.zmax;
  auto sol = limit_ode::solve_limit_system(ode_opts);
  const auto mellin = limit_ode::mellin_moments(sol);
  asympt::MellinInputs inputs{mellin.cstar1, mellin.dcds1};
  asympt::ReportOptions ropts;
  ropts.tol = o.tol;
  ropts.series_M = std::max(o.order, 64);
  const auto report = asympt::build_report(grid, inputs, ropts);
  io::write_json(o.out + "/asympt.json", io::to_json(report));
  io::write_file(o.out + "/asympt.csv", io::to_csv(report));
  for (const auto& row : report.rows) {
    if (row.ok)
      std::cout << "rho=" << row.rho << " ratio_alpha_bar=" << row.ratio_alpha_bar
                << " xi_log_gap=" << row.xi_log_gap << " ratio_K=" << row.ratio_K << "\n";
    else
      std::cout << "rho=" << row.rho << " FAILED: " << row.error << "\n";
  }
  return 0;
}

int run_simulate(const Options& o) {
  const auto topo = netsim::Topology::star(o.links, o.rho);  // v = 1
  netsim::SimParams params;
  params.horizon = o.horizon;
  params.seed = o.seed;
  const auto summary = netsim::simulate(topo, params);
  io::write_json(o.out + "/netsim.json", io::to_json(summary, topo));
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "k,empirical_alpha,ci\n" << std::setprecision(17);
    for (std::size_t k = 0; k < summary.empirical_alpha.size(); ++k)
      csv << k << ',' << summary.empirical_alpha[k] << ',' << summary.ci[k] << '\n';
    io::write_file(o.out + "/netsim.csv", csv.str());
  }
  std::cout << "links=" << o.links << " rho=" << o.rho << " events=" << summary.n_events
            << " alpha_bar_emp=" << summary.alpha_bar_emp << "\n";
  return 0;
}

template <class Real>
int run_validate(const Options& o) {
  json checks = json::array();
  bool all = true;
  auto record = [&](const std::string& name, bool pass, double value, double tol) {
    json c;
    c["name"] = name;
    c["pass"] = pass;
    c["value"] = value;
    c["tol"] = tol;
    checks.push_back(c);
    all = all && pass;
    std::cout << (pass ? "  ok   " : "  FAIL ") << name << "  (" << value << " vs " << tol
              << ")\n";
  };

  auto dist = meanfield::solve<Real>(meanfield::SystemParams::from_rho(o.rho), o.tol, o.kmax);
  record("equilibrium residual", to_double(dist.residual) <= o.tol, to_double(dist.residual),
         o.tol);
  Real mass{0};
  for (const auto& a : dist.alpha) mass += a;
  record("unit mass", std::abs(to_double(mass) - 1.0) < 1e-12,
         std::abs(to_double(mass) - 1.0), 1e-12);
  record("alpha_0 < 1 - rho", to_double(dist.alpha[0]) < 1.0 - o.rho, to_double(dist.alpha[0]),
         1.0 - o.rho);
  const Real ap = meanfield::alpha_prime_exact(dist);
  record("alpha'(1) identity", true, to_double(ap), 0.0);  // throws on violation

  auto series = genfun::scaled_coefficients<Real>(o.rho, o.order);
  bool alternating = true;
  for (int k = 1; k < series.M; ++k)
    if ((series.c[k] > Real{0}) == (series.c[k + 1] > Real{0})) alternating = false;
  record("sign alternation", alternating, alternating ? 1.0 : 0.0, 1.0);
  const auto xi = genfun::anchor_xi(series);
  record("anchor stability", xi.stability < 1e-8, xi.stability, 1e-8);

  const auto calib = genfun::calibrate_alpha(series, dist);
  record("alpha reconstruction", calib.max_rel_error < 1e-6, calib.max_rel_error, 1e-6);
  record("xi identity", calib.xi_identity_rel < 1e-7, calib.xi_identity_rel, 1e-7);

  // the j-sum truncation must scale with 1/log(1/rho) for the certified
  // tail to sit below the check tolerance
  const int J = std::max(64, static_cast<int>(std::ceil(32.0 * std::log(10.0) / -std::log(o.rho))) + 20);
  const double fres = genfun::functional_residual(series, Real{1}, J);
  record("functional equation at z=1", fres < 1e-10, fres, 1e-10);

  const auto f = genfun::evaluate_f(std::complex<double>(-1.0, 0.0), o.rho);
  const double fgap = std::abs(f.form1 - f.form2);
  record("f dual forms at t=-1", fgap < 1e-12, fgap, 1e-12);

  genfun::Evaluators<Real> ev{series};
  const double bgap = std::abs(to_double(ev.b(Real{1})) - to_double(dist.alpha_bar)) /
                      to_double(dist.alpha_bar);
  record("b(1) = alpha'(1)", bgap < 1e-8, bgap, 1e-8);

  try {
    double mero_worst = 0.0;
    for (double z : {0.0, 0.5, 1.0}) {
      const Real mero = genfun::alpha_from_poles(series, Real(z));
      Real direct{0};
      for (int k = dist.K; k >= 0; --k) direct = direct * Real(z) + dist.alpha[k];
      mero_worst = std::max(mero_worst, std::abs(to_double(mero) - to_double(direct)));
    }
    record("pole-series reconstruction", mero_worst < 1e-6, mero_worst, 1e-6);
  } catch (const ConvergenceError& e) {
    std::cout << "  skip pole-series reconstruction (" << e.what() << ")\n";
  }

  json out;
  out["schema"] = io::kSchemaVersion;
  out["rho"] = o.rho;
  out["checks"] = checks;
  out["all_pass"] = all;
  io::write_json(o.out + "/validate.json", out);
  if (!all) throw InvariantViolation("validate: cross-checks failed at rho=" + std::to_string(o.rho));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stationary mean-field toolkit for min-policy bandwidth sharing"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--rho", o.rho, "load in [0,1)");
    cmd->add_option("--rho-grid", o.rho_grid, "grid a:b:step");
    cmd->add_option("--tol", o.tol, "solver tolerance");
    cmd->add_option("--kmax", o.kmax, "max truncation for the equilibrium");
    cmd->add_option("--order", o.order, "series truncation (M / seed order)");
    cmd->add_option("--zmax", o.zmax, "integration range for the limit system");
    cmd->add_option("--seed", o.seed, "simulation seed");
    cmd->add_option("--horizon", o.horizon, "simulation horizon");
    cmd->add_option("--links", o.links, "number of links (even)");
    cmd->add_option("--precision", o.precision, "standard | ext:<bits>");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--format", o.format, "json | csv");
  };
  CLI::App* c_mf = app.add_subcommand("meanfield", "solve the equilibrium at --rho");
  CLI::App* c_co = app.add_subcommand("coeffs", "scaled coefficients and anchoring zero");
  CLI::App* c_ode = app.add_subcommand("ode", "rho = 1 limit system and constant A");
  CLI::App* c_as = app.add_subcommand("asymptotics", "heavy-traffic report over a rho grid");
  CLI::App* c_sim = app.add_subcommand("simulate", "finite-N event simulation");
  CLI::App* c_val = app.add_subcommand("validate", "cross-module consistency suite");
  for (auto* c : {c_mf, c_co, c_ode, c_as, c_sim, c_val}) add_common(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  const auto t0 = std::chrono::steady_clock::now();
  int rc = 1;
  std::string sub;
  try {
    std::filesystem::create_directories(o.out);
    const unsigned bits = precision_bits(o.precision);
    if (app.got_subcommand(c_mf)) {
      sub = "meanfield";
      if (bits) {
        PrecisionGuard g(bits);
        rc = run_meanfield<BigFloat>(o);
      } else {
        rc = run_meanfield<double>(o);
      }
    } else if (app.got_subcommand(c_co)) {
      sub = "coeffs";
      if (bits) {
        PrecisionGuard g(bits);
        rc = run_coeffs<BigFloat>(o);
      } else {
        rc = run_coeffs<double>(o);
      }
    } else if (app.got_subcommand(c_ode)) {
      sub = "ode";
      rc = run_ode(o);
    } else if (app.got_subcommand(c_as)) {
      sub = "asymptotics";
      rc = run_asymptotics(o);
    } else if (app.got_subcommand(c_sim)) {
      sub = "simulate";
      rc = run_simulate(o);
    } else if (app.got_subcommand(c_val)) {
      sub = "validate";
      if (bits) {
        PrecisionGuard g(bits);
        rc = run_validate<BigFloat>(o);
      } else {
        rc = run_validate<double>(o);
      }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    io::write_json(o.out + "/manifest.json", make_manifest(sub, config_json(o, sub), wall));
  } catch (const DomainError& e) {
    std::cerr << "config/domain error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return 3;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
