// JSON/CSV serialization of result types.  Schemas are versioned and field
// order is fixed (nlohmann::json orders keys lexicographically), so reruns
// with the same config produce byte-identical payloads; anything
// time-dependent lives in the run manifest, never here.

#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "starmin/asympt.hpp"
#include "starmin/genfun.hpp"
#include "starmin/limit_ode.hpp"
#include "starmin/meanfield.hpp"
#include "starmin/netsim.hpp"

namespace starmin::io {

inline constexpr const char* kSchemaVersion = "1";

using nlohmann::json;

template <class Real>
json to_json(const meanfield::Distribution<Real>& d) {
  json j;
  j["schema"] = kSchemaVersion;
  j["rho"] = d.rho;
  j["K"] = d.K;
  json alpha = json::array();
  for (const auto& a : d.alpha) alpha.push_back(to_double(a));
  j["alpha"] = std::move(alpha);
  j["alpha_bar"] = to_double(d.alpha_bar);
  j["K_rho"] = to_double(d.K_rho);
  j["residual"] = to_double(d.residual);
  return j;
}

template <class Real>
json to_json(const genfun::ScaledSeries<Real>& s, const genfun::XiReport& xi,
             const genfun::CalibrationReport* calib = nullptr,
             double functional_resid = -1.0) {
  json j;
  j["schema"] = kSchemaVersion;
  j["rho"] = s.rho;
  j["M"] = s.M;
  json c = json::array();
  for (int k = 1; k <= s.M; ++k) c.push_back(to_double(s.c[k]));
  j["c"] = std::move(c);
  j["xi"] = to_double(s.xi);
  j["a1"] = to_double(s.a1);
  j["alpha_prime"] = to_double(s.alpha_prime);
  json res;
  res["anchor_abs_c"] = xi.c_at_xi;
  res["anchor_stability"] = xi.stability;
  res["anchor_used_chain"] = xi.used_chain;
  if (calib) {
    res["reconstruction_max_rel"] = calib->max_rel_error;
    res["reconstruction_worst_k"] = calib->worst_k;
    res["xi_identity_rel"] = calib->xi_identity_rel;
  }
  if (functional_resid >= 0) res["functional_eq"] = functional_resid;
  j["residuals"] = std::move(res);
  return j;
}

inline json to_json(const limit_ode::LimitSolution& sol,
                    const limit_ode::MellinData& mellin,
                    const limit_ode::BlasiusReport* blasius = nullptr) {
  json j;
  j["schema"] = kSchemaVersion;
  j["A"] = sol.A;
  j["A_integral"] = sol.A_integral;
  j["A_limit"] = sol.A_limit;
  j["dcds1"] = mellin.dcds1;
  j["dcds1_err"] = mellin.err_dcds1;
  j["cstar1_err"] = mellin.err_cstar1;
  j["identity_max"] = sol.identity_max;
  j["eq16_residual"] = sol.eq16_residual;
  json tail;
  tail["halfA"] = sol.tail.half_A;
  tail["B"] = sol.tail.B_c;
  tail["A_v"] = sol.tail.A_v;
  tail["B_v"] = sol.tail.B_v;
  tail["D"] = sol.tail.D;
  tail["D_used"] = sol.tail.D_used;
  j["tail"] = std::move(tail);
  json grid;
  grid["points"] = sol.ys.size();
  grid["z0"] = sol.z0;
  grid["z_max"] = sol.z_max;
  j["grid"] = std::move(grid);
  if (blasius) {
    json b;
    b["chain_rule_max"] = blasius->max_residual_chain;
    b["finite_difference_max"] = blasius->max_residual_fd;
    j["blasius"] = std::move(b);
  }
  return j;
}

inline std::string to_csv(const limit_ode::LimitSolution& sol) {
  std::ostringstream out;
  out << "z,c,v,vprime\n";
  out << std::setprecision(17);
  for (const auto& g : sol.grid())
    out << g.z << ',' << g.c << ',' << g.v << ',' << g.vprime << '\n';
  return out.str();
}

inline json to_json(const asympt::Report& r) {
  json j;
  j["schema"] = kSchemaVersion;
  j["cstar1"] = r.inputs.cstar1;
  j["dcds1"] = r.inputs.dcds1;
  j["B_fit"] = r.B_fit;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json jr;
    jr["rho"] = row.rho;
    jr["ok"] = row.ok;
    if (row.ok) {
      jr["alpha_bar_exact"] = row.alpha_bar_exact;
      jr["alpha_bar_pred"] = row.alpha_bar_pred;
      jr["xi_exact"] = row.xi_exact;
      jr["xi_pred"] = row.xi_pred;
      jr["K_exact"] = row.K_exact;
      jr["K_pred"] = row.K_pred;
      jr["ratio_alpha_bar"] = row.ratio_alpha_bar;
      jr["xi_log_gap"] = row.xi_log_gap;
      jr["ratio_K"] = row.ratio_K;
    } else {
      jr["error"] = row.error;
    }
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline std::string to_csv(const asympt::Report& r) {
  std::ostringstream out;
  out << "rho,alpha_bar_exact,alpha_bar_pred,xi_exact,xi_pred,K_exact,K_pred,"
         "ratio_alpha_bar,xi_log_gap,ratio_K\n";
  out << std::setprecision(17);
  for (const auto& row : r.rows) {
    if (!row.ok) continue;
    out << row.rho << ',' << row.alpha_bar_exact << ',' << row.alpha_bar_pred << ','
        << row.xi_exact << ',' << row.xi_pred << ',' << row.K_exact << ',' << row.K_pred << ','
        << row.ratio_alpha_bar << ',' << row.xi_log_gap << ',' << row.ratio_K << '\n';
  }
  return out.str();
}

inline json to_json(const netsim::Topology& t) {
  json j;
  j["n_in"] = t.n_in;
  j["n_out"] = t.n_out;
  j["per_route_rate"] = t.per_route_rate;
  return j;
}

inline json to_json(const netsim::SimSummary& s, const netsim::Topology& topo) {
  json j;
  j["schema"] = kSchemaVersion;
  j["topology"] = to_json(topo);
  j["rho"] = s.rho_in;
  j["seed"] = s.seed;
  j["horizon"] = s.horizon;
  j["warmup"] = s.warmup;
  j["n_events"] = s.n_events;
  j["empirical_alpha"] = s.empirical_alpha;
  j["alpha_bar_emp"] = s.alpha_bar_emp;
  j["ci"] = s.ci;
  return j;
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot open for writing: " + path);
  out << contents;
}

inline void write_json(const std::string& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

}  // namespace starmin::io
