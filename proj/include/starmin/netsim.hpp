// Finite-N star network under the min policy: exact-jump stochastic
// simulation plus a brute-force stationary solve for tiny instances.
//
// The network is bipartite: every route pairs one "in" link with one "out"
// link.  A connection on route (i,j) receives bandwidth min(1/X_i, 1/X_j)
// where X is the number of active connections on a link, and carries an
// exponential volume with mean v, so a route with c_r connections departs at
// rate c_r * min(1/X_i, 1/X_j) / v.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "starmin/errors.hpp"

namespace starmin::netsim {

struct Topology {
  int n_in = 0, n_out = 0;
  double per_route_rate = 0.0;

  // Symmetric star with N links split into N/2 "in" and N/2 "out"; the
  // per-route rate 2*lambda/N makes the total arrival rate on every link
  // exactly lambda.
  static Topology star(int n_links, double lambda) {
    if (n_links < 2 || n_links % 2 != 0)
      throw DomainError("Topology::star: need an even number of links >= 2");
    Topology t;
    t.n_in = n_links / 2;
    t.n_out = n_links / 2;
    t.per_route_rate = 2.0 * lambda / n_links;
    return t;
  }

  // Arbitrary bipartite instance with an explicit per-route rate (used for
  // tiny oracle-checked cases where the two sides carry different loads).
  static Topology bipartite(int n_in, int n_out, double per_route_rate) {
    if (n_in < 1 || n_out < 1 || !(per_route_rate >= 0.0))
      throw DomainError("Topology::bipartite: bad arguments");
    Topology t;
    t.n_in = n_in;
    t.n_out = n_out;
    t.per_route_rate = per_route_rate;
    return t;
  }

  int routes() const { return n_in * n_out; }
  int links() const { return n_in + n_out; }
  int route_index(int i, int j) const { return i * n_out + j; }
  double in_link_arrival_rate() const { return n_out * per_route_rate; }
  double out_link_arrival_rate() const { return n_in * per_route_rate; }
};

struct SimState {
  std::vector<int> c;            // connections per route, row-major (i, j)
  std::vector<int> X_in, X_out;  // per-link totals
  double t = 0.0;
  std::mt19937_64 rng;
};

SimState make_state(const Topology& topo, std::uint64_t seed);

// Audit of the per-route transition rates for a given state.
struct RateCatalogue {
  double arrival_per_route = 0.0;
  double total_arrival = 0.0;
  std::vector<double> departure;  // per route
  double total_departure = 0.0;
};

RateCatalogue transition_rates(const SimState& state, const Topology& topo, double v);

struct SimParams {
  double v = 1.0;
  double horizon = 0.0;
  double warmup = -1.0;  // <0: defaults to 20% of the horizon
  std::uint64_t seed = 1;
  int batches = 20;
  std::uint64_t check_interval = 200'000;  // full rate recomputation cadence
  bool per_link = false;                   // also collect per-link histograms
};

struct SimSummary {
  std::vector<double> empirical_alpha;  // time-averaged over all links
  double alpha_bar_emp = 0.0;
  std::vector<double> ci;  // batch-means half-widths per bin
  std::uint64_t n_events = 0;
  double horizon = 0.0, warmup = 0.0;
  std::uint64_t seed = 0;
  double rho_in = 0.0, rho_out = 0.0;  // per-side link loads
  std::vector<std::vector<double>> per_link_alpha;  // when requested
};

SimSummary simulate(const Topology& topo, const SimParams& params);

// Independent replicas (distinct seeds); results keyed by seed order.
std::vector<SimSummary> simulate_replicas(const Topology& topo, const SimParams& base,
                                          std::span<const std::uint64_t> seeds,
                                          bool parallel = true);

struct OracleResult {
  std::vector<double> pi;              // stationary law over truncated states
  std::vector<double> link_occupancy;  // marginal occupancy averaged over links
  double boundary_mass = 0.0;          // stationary mass with any c_r at the cap
  int cap = 0;
};

// Stationary law of the truncated chain over per-route counts 0..cap, by a
// direct sparse linear solve of the generator equations.
OracleResult exact_oracle(const Topology& topo, double v, int cap);

double tv_distance(std::span<const double> p, std::span<const double> q);

}  // namespace starmin::netsim
