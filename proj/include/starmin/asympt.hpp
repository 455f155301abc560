// Heavy-traffic predictions near rho = 1 and their comparison against the
// exact per-rho computations.  Every prediction reads the limit solution only
// through the two Mellin moments c*(1,1) and dc*(1,1)/ds -- that restriction
// is the point of the MellinInputs interface.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "starmin/genfun.hpp"
#include "starmin/kernels.hpp"
#include "starmin/meanfield.hpp"

namespace starmin::asympt {

struct MellinInputs {
  double cstar1 = 0.0;  // A = c*(1,1)
  double dcds1 = 0.0;   // dc*(1,1)/ds
};

// alpha'(1,rho) ~ 1 / ((log rho)^2 c*(1,1))
inline double predict_alpha_prime(double rho, const MellinInputs& in) {
  const double L = std::log(rho);
  return 1.0 / (L * L * in.cstar1);
}

// rho xi(rho) ~ exp[ -1/(log rho c*(1,1)) - dlog c*(1,1)/ds ]
inline double predict_xi(double rho, const MellinInputs& in) {
  const double L = std::log(rho);
  return std::exp(-1.0 / (L * in.cstar1) - in.dcds1 / in.cstar1) / rho;
}

// lim_k rho^{-k} alpha_k ~ (1-rho) B exp[ 1/((1-rho) A) ], B fitted
inline double predict_tail_constant(double rho, const MellinInputs& in, double B_fit) {
  return (1.0 - rho) * B_fit * std::exp(1.0 / ((1.0 - rho) * in.cstar1));
}

struct Row {
  double rho = 0.0;
  double alpha_bar_exact = 0.0, alpha_bar_pred = 0.0;
  double xi_exact = 0.0, xi_pred = 0.0;
  double K_exact = 0.0, K_pred = 0.0;
  double ratio_alpha_bar = 0.0;  // exact/pred; equals abar * log^2(rho) * A
  double xi_log_gap = 0.0;       // |log(rho xi_exact) - log(rho xi_pred)|
  double ratio_K = 0.0;
  bool ok = false;
  std::string error;
};

struct Report {
  std::vector<Row> rows;
  MellinInputs inputs;
  double B_fit = 0.0;
};

struct ReportOptions {
  double tol = 1e-12;
  int series_M = 160;
  // mantissa widths for the equilibrium solve as rho approaches 1
  unsigned bits_for(double rho) const {
    if (rho < 0.95) return 0;  // plain double
    if (rho < 0.985) return 128;
    return 192;
  }
  bool parallel = true;
};

struct ExactPoint {
  double alpha_bar = 0.0, K = 0.0, xi = 0.0;
};

// Exact values at one load: equilibrium solve (precision chosen by rho) and
// the anchoring zero of the scaled series.
inline ExactPoint exact_point(double rho, const ReportOptions& opts) {
  ExactPoint p;
  const unsigned bits = opts.bits_for(rho);
  if (bits == 0) {
    auto dist = meanfield::solve<double>(meanfield::SystemParams::from_rho(rho), opts.tol);
    p.alpha_bar = dist.alpha_bar;
    p.K = dist.K_rho;
  } else {
    PrecisionGuard guard(bits);
    auto dist = meanfield::solve<BigFloat>(meanfield::SystemParams::from_rho(rho), opts.tol);
    p.alpha_bar = to_double(dist.alpha_bar);
    p.K = to_double(dist.K_rho);
  }
  // the chained evaluator only consumes the leading coefficients, which are
  // cancellation-free in double
  auto series = genfun::scaled_coefficients<double>(rho, opts.series_M);
  const auto rep = genfun::anchor_xi(series, genfun::XiMethod::automatic);
  p.xi = rep.xi;
  return p;
}

// B of the tail byproduct, fitted on the lowest loads of the grid (geometric
// mean of the per-point estimates); the paper defines B only through an
// approximation, so it has to come from data.
inline double fit_B(std::span<const Row> rows, const MellinInputs& in, int use = 2) {
  double acc = 0.0;
  int n = 0;
  for (const Row& r : rows) {
    if (!r.ok) continue;
    const double shape = (1.0 - r.rho) * std::exp(1.0 / ((1.0 - r.rho) * in.cstar1));
    acc += std::log(r.K_exact / shape);
    if (++n == use) break;
  }
  if (n == 0) throw DomainError("fit_B: no successful rows");
  return std::exp(acc / n);
}

inline Report build_report(std::span<const double> rho_grid, const MellinInputs& inputs,
                           ReportOptions opts = {}) {
  Report rep;
  rep.inputs = inputs;
  rep.rows.resize(rho_grid.size());
  kernels::for_each_index(
      rho_grid.size(),
      [&](std::size_t g) {
        Row& row = rep.rows[g];
        row.rho = rho_grid[g];
        try {
          const ExactPoint p = exact_point(row.rho, opts);
          row.alpha_bar_exact = p.alpha_bar;
          row.K_exact = p.K;
          row.xi_exact = p.xi;
          row.alpha_bar_pred = predict_alpha_prime(row.rho, inputs);
          row.xi_pred = predict_xi(row.rho, inputs);
          row.ratio_alpha_bar = row.alpha_bar_exact / row.alpha_bar_pred;
          row.xi_log_gap =
              std::abs(std::log(row.rho * row.xi_exact) - std::log(row.rho * row.xi_pred));
          row.ok = true;
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
      },
      opts.parallel ? kernels::Exec::parallel : kernels::Exec::serial);

  // rows sorted by construction (grid order); B from the lowest loads
  const bool any_ok =
      std::any_of(rep.rows.begin(), rep.rows.end(), [](const Row& r) { return r.ok; });
  if (!any_ok) return rep;
  rep.B_fit = fit_B(rep.rows, inputs);
  for (Row& row : rep.rows) {
    if (!row.ok) continue;
    row.K_pred = predict_tail_constant(row.rho, inputs, rep.B_fit);
    row.ratio_K = row.K_exact / row.K_pred;
  }
  return rep;
}

}  // namespace starmin::asympt
