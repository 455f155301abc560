#include "starmin/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "starmin/kernels.hpp"

namespace starmin::netsim {

namespace {

// uniform in (0,1], 53-bit; avoids 0 so -log(u) is always finite
inline double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

inline double exponential(std::mt19937_64& rng, double rate) {
  return -std::log(uniform_open(rng)) / rate;
}

inline double dep_rate(int c, int Xi, int Xj, double v) {
  if (c == 0) return 0.0;
  return static_cast<double>(c) / (static_cast<double>(std::max(Xi, Xj)) * v);
}

// t-distribution 97.5% quantiles for small dof; ~1.96 beyond
inline double t_quantile_975(int dof) {
  static const double q[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                             2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                             2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                             2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) return 12.706;
  if (dof <= 30) return q[dof - 1];
  return 1.96;
}

}  // namespace

SimState make_state(const Topology& topo, std::uint64_t seed) {
  SimState st;
  st.c.assign(topo.routes(), 0);
  st.X_in.assign(topo.n_in, 0);
  st.X_out.assign(topo.n_out, 0);
  st.rng.seed(seed);
  return st;
}

RateCatalogue transition_rates(const SimState& state, const Topology& topo, double v) {
  RateCatalogue cat;
  cat.arrival_per_route = topo.per_route_rate;
  cat.total_arrival = topo.per_route_rate * topo.routes();
  cat.departure.assign(topo.routes(), 0.0);
  for (int i = 0; i < topo.n_in; ++i)
    for (int j = 0; j < topo.n_out; ++j) {
      const int r = topo.route_index(i, j);
      cat.departure[r] = dep_rate(state.c[r], state.X_in[i], state.X_out[j], v);
      cat.total_departure += cat.departure[r];
    }
  return cat;
}

namespace {

// Time-weighted occupancy accounting with lazy per-link flushing.  Batches
// share the accumulators; all links are flushed at batch boundaries.
struct OccupancyTally {
  std::vector<std::vector<double>> batch_hist;  // batch -> occupancy -> time
  std::vector<std::vector<double>> link_hist;   // link -> occupancy -> time (optional)
  std::vector<double> last_flush_in, last_flush_out;
  int batch = 0;
  bool per_link = false;

  void init(int n_in, int n_out, int batches, bool per_link_on) {
    batch_hist.assign(batches, {});
    per_link = per_link_on;
    if (per_link) link_hist.assign(n_in + n_out, {});
    last_flush_in.assign(n_in, 0.0);
    last_flush_out.assign(n_out, 0.0);
  }
  void add(int link, int occupancy, double dt) {
    auto& h = batch_hist[batch];
    if (occupancy >= static_cast<int>(h.size())) h.resize(occupancy + 1, 0.0);
    h[occupancy] += dt;
    if (per_link) {
      auto& lh = link_hist[link];
      if (occupancy >= static_cast<int>(lh.size())) lh.resize(occupancy + 1, 0.0);
      lh[occupancy] += dt;
    }
  }
  void flush_in(int i, int X, double now) {
    add(i, X, now - last_flush_in[i]);
    last_flush_in[i] = now;
  }
  void flush_out(int j, int X, double now) {
    add(static_cast<int>(last_flush_in.size()) + j, X, now - last_flush_out[j]);
    last_flush_out[j] = now;
  }
  void flush_all(const SimState& st, double now) {
    for (std::size_t i = 0; i < last_flush_in.size(); ++i) flush_in(static_cast<int>(i), st.X_in[i], now);
    for (std::size_t j = 0; j < last_flush_out.size(); ++j) flush_out(static_cast<int>(j), st.X_out[j], now);
  }
  void reset(double now) {
    for (auto& h : batch_hist) h.assign(h.size(), 0.0);
    for (auto& h : link_hist) h.assign(h.size(), 0.0);
    std::fill(last_flush_in.begin(), last_flush_in.end(), now);
    std::fill(last_flush_out.begin(), last_flush_out.end(), now);
    batch = 0;
  }
};

}  // namespace

SimSummary simulate(const Topology& topo, const SimParams& params) {
  if (!(params.horizon > 0)) throw DomainError("simulate: horizon must be positive");
  const double warmup = params.warmup < 0 ? 0.2 * params.horizon : params.warmup;
  if (warmup >= params.horizon) throw DomainError("simulate: horizon must exceed warmup");
  if (params.batches < 2) throw DomainError("simulate: need at least 2 batches");
  const double v = params.v;
  const int n_in = topo.n_in, n_out = topo.n_out, R = topo.routes();

  SimState st = make_state(topo, params.seed);
  std::vector<double> dep(R, 0.0);        // per-route departure rates
  std::vector<double> dep_row(n_in, 0.0); // per-in-link sums of dep
  double total_dep = 0.0;
  const double total_arr = topo.per_route_rate * R;

  OccupancyTally tally;
  tally.init(n_in, n_out, params.batches, params.per_link);
  const double batch_len = (params.horizon - warmup) / params.batches;
  bool in_measurement = false;

  auto recompute_row = [&](int i) {
    double s = 0.0;
    for (int j = 0; j < n_out; ++j) {
      const int r = topo.route_index(i, j);
      dep[r] = dep_rate(st.c[r], st.X_in[i], st.X_out[j], v);
      s += dep[r];
    }
    total_dep += s - dep_row[i];
    dep_row[i] = s;
  };
  auto update_entry = [&](int i, int j) {
    const int r = topo.route_index(i, j);
    const double nd = dep_rate(st.c[r], st.X_in[i], st.X_out[j], v);
    const double delta = nd - dep[r];
    dep[r] = nd;
    dep_row[i] += delta;
    total_dep += delta;
  };

  std::uint64_t n_events = 0;
  std::uint64_t since_check = 0;
  for (;;) {
    const double total = total_arr + total_dep;
    const double dt = exponential(st.rng, total);
    double t_next = st.t + dt;
    if (!in_measurement && t_next >= warmup) {
      tally.reset(warmup);  // discard the warmup phase entirely
      in_measurement = true;
    }
    if (in_measurement) {
      // close batches crossed by this jump interval
      while (tally.batch < params.batches - 1 &&
             t_next >= warmup + (tally.batch + 1) * batch_len) {
        const double edge = warmup + (tally.batch + 1) * batch_len;
        tally.flush_all(st, edge);
        ++tally.batch;
      }
    }
    if (t_next >= params.horizon) {
      tally.flush_all(st, params.horizon);
      st.t = params.horizon;
      break;
    }
    st.t = t_next;

    int i, j;
    const double pick = uniform_open(st.rng) * total;
    if (pick <= total_arr) {  // arrival on a uniformly random route
      const auto r = static_cast<int>(
          std::min<std::uint64_t>(R - 1, static_cast<std::uint64_t>(uniform_open(st.rng) * R)));
      i = r / n_out;
      j = r % n_out;
      if (in_measurement) {
        tally.flush_in(i, st.X_in[i], st.t);
        tally.flush_out(j, st.X_out[j], st.t);
      }
      ++st.c[topo.route_index(i, j)];
      ++st.X_in[i];
      ++st.X_out[j];
    } else {  // departure: pick the in-link row, then the route inside it
      double target = pick - total_arr;
      i = n_in - 1;
      for (int ii = 0; ii < n_in; ++ii) {
        if (target <= dep_row[ii]) {
          i = ii;
          break;
        }
        target -= dep_row[ii];
      }
      j = n_out - 1;
      for (int jj = 0; jj < n_out; ++jj) {
        const double d = dep[topo.route_index(i, jj)];
        if (target <= d) {
          j = jj;
          break;
        }
        target -= d;
      }
      const int r = topo.route_index(i, j);
      if (st.c[r] == 0) {
        // numerically exhausted row; retry with fresh randomness
        continue;
      }
      if (in_measurement) {
        tally.flush_in(i, st.X_in[i], st.t);
        tally.flush_out(j, st.X_out[j], st.t);
      }
      --st.c[r];
      --st.X_in[i];
      --st.X_out[j];
    }
    recompute_row(i);
    for (int ii = 0; ii < n_in; ++ii)
      if (ii != i) update_entry(ii, j);
    ++n_events;

    if (++since_check >= params.check_interval) {
      since_check = 0;
      const RateCatalogue fresh = transition_rates(st, topo, v);
      const double drift = std::abs(fresh.total_departure - total_dep) /
                           std::max(1.0, fresh.total_departure);
      if (drift > 1e-9) {
        std::ostringstream msg;
        msg << "simulate: rate bookkeeping drift " << drift << " after " << n_events
            << " events at t=" << st.t;
        throw InvariantViolation(msg.str());
      }
      total_dep = fresh.total_departure;
      dep = fresh.departure;
      for (int ii = 0; ii < n_in; ++ii) {
        double s = 0.0;
        for (int jj = 0; jj < n_out; ++jj) s += dep[topo.route_index(ii, jj)];
        dep_row[ii] = s;
      }
      // capacity compliance on the sampled state: sum of allocated bandwidth
      // through a link never exceeds its unit capacity
      for (int ii = 0; ii < n_in; ++ii) {
        double band = 0.0;
        for (int jj = 0; jj < n_out; ++jj) {
          const int r = topo.route_index(ii, jj);
          if (st.c[r] > 0)
            band += st.c[r] / static_cast<double>(std::max(st.X_in[ii], st.X_out[jj]));
        }
        if (band > 1.0 + 1e-9)
          throw InvariantViolation("simulate: link capacity exceeded (allocation bug)");
      }
    }
  }

  // aggregate batches
  SimSummary out;
  out.n_events = n_events;
  out.horizon = params.horizon;
  out.warmup = warmup;
  out.seed = params.seed;
  out.rho_in = topo.in_link_arrival_rate() * v;
  out.rho_out = topo.out_link_arrival_rate() * v;
  std::size_t maxk = 0;
  for (const auto& h : tally.batch_hist) maxk = std::max(maxk, h.size());
  out.empirical_alpha.assign(maxk, 0.0);
  out.ci.assign(maxk, 0.0);
  const double links = topo.links();
  std::vector<std::vector<double>> props(params.batches, std::vector<double>(maxk, 0.0));
  for (int b = 0; b < params.batches; ++b) {
    for (std::size_t k = 0; k < tally.batch_hist[b].size(); ++k)
      props[b][k] = tally.batch_hist[b][k] / (batch_len * links);
  }
  for (std::size_t k = 0; k < maxk; ++k) {
    double mean = 0.0;
    for (int b = 0; b < params.batches; ++b) mean += props[b][k];
    mean /= params.batches;
    double var = 0.0;
    for (int b = 0; b < params.batches; ++b)
      var += (props[b][k] - mean) * (props[b][k] - mean);
    var /= (params.batches - 1);
    out.empirical_alpha[k] = mean;
    out.ci[k] = t_quantile_975(params.batches - 1) * std::sqrt(var / params.batches);
  }
  // normalize away the tiny drift from batch-edge rounding
  const double mass = std::accumulate(out.empirical_alpha.begin(), out.empirical_alpha.end(), 0.0);
  if (mass > 0)
    for (auto& a : out.empirical_alpha) a /= mass;
  for (std::size_t k = 0; k < maxk; ++k) out.alpha_bar_emp += k * out.empirical_alpha[k];
  if (params.per_link) {
    const double span = params.horizon - warmup;
    out.per_link_alpha.resize(tally.link_hist.size());
    for (std::size_t l = 0; l < tally.link_hist.size(); ++l) {
      out.per_link_alpha[l].assign(tally.link_hist[l].size(), 0.0);
      for (std::size_t k = 0; k < tally.link_hist[l].size(); ++k)
        out.per_link_alpha[l][k] = tally.link_hist[l][k] / span;
    }
  }
  return out;
}

std::vector<SimSummary> simulate_replicas(const Topology& topo, const SimParams& base,
                                          std::span<const std::uint64_t> seeds, bool parallel) {
  std::vector<SimSummary> out(seeds.size());
  kernels::for_each_index(
      seeds.size(),
      [&](std::size_t i) {
        SimParams p = base;
        p.seed = seeds[i];
        out[i] = simulate(topo, p);
      },
      parallel ? kernels::Exec::parallel : kernels::Exec::serial);
  return out;
}

OracleResult exact_oracle(const Topology& topo, double v, int cap) {
  const int R = topo.routes();
  if (cap < 1) throw DomainError("exact_oracle: cap must be >= 1");
  double sz = 1;
  for (int r = 0; r < R; ++r) {
    sz *= cap + 1;
    if (sz > 1e6) throw DomainError("exact_oracle: state space exceeds 1e6 states");
  }
  const int S = static_cast<int>(sz);
  const double a = topo.per_route_rate;

  std::vector<int> counts(R), X_in(topo.n_in), X_out(topo.n_out);
  auto decode = [&](int s) {
    std::fill(X_in.begin(), X_in.end(), 0);
    std::fill(X_out.begin(), X_out.end(), 0);
    for (int r = 0; r < R; ++r) {
      counts[r] = s % (cap + 1);
      s /= (cap + 1);
      X_in[r / topo.n_out] += counts[r];
      X_out[r % topo.n_out] += counts[r];
    }
  };
  std::vector<int> stride(R);
  stride[0] = 1;
  for (int r = 1; r < R; ++r) stride[r] = stride[r - 1] * (cap + 1);

  // assemble Q^T as triplets: column s holds the outflows of state s
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(S) * (2 * R + 1));
  for (int s = 0; s < S; ++s) {
    decode(s);
    double out_rate = 0.0;
    for (int r = 0; r < R; ++r) {
      const int i = r / topo.n_out, j = r % topo.n_out;
      if (counts[r] < cap) {
        trip.emplace_back(s + stride[r], s, a);
        out_rate += a;
      }
      if (counts[r] > 0) {
        const double d = dep_rate(counts[r], X_in[i], X_out[j], v);
        trip.emplace_back(s - stride[r], s, d);
        out_rate += d;
      }
    }
    trip.emplace_back(s, s, -out_rate);
  }
  Eigen::SparseMatrix<double> A(S + 1, S);
  // normalization row sum(pi) = 1 appended; solved in least-squares sense via
  // the square system formed by replacing the last balance equation
  std::vector<Eigen::Triplet<double>> trip2;
  trip2.reserve(trip.size() + S);
  for (const auto& t : trip)
    if (t.row() != S - 1) trip2.emplace_back(t.row(), t.col(), t.value());
  for (int s = 0; s < S; ++s) trip2.emplace_back(S - 1, s, 1.0);
  Eigen::SparseMatrix<double> Asq(S, S);
  Asq.setFromTriplets(trip2.begin(), trip2.end());
  Asq.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Asq);
  if (lu.info() != Eigen::Success) throw ConvergenceError("exact_oracle: factorization failed");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  b(S - 1) = 1.0;
  Eigen::VectorXd pi = lu.solve(b);

  OracleResult res;
  res.cap = cap;
  res.pi.assign(pi.data(), pi.data() + S);
  double mass = 0.0;
  for (auto& p : res.pi) {
    if (p < 0 && p > -1e-12) p = 0;
    mass += p;
  }
  for (auto& p : res.pi) p /= mass;

  int max_occ = 0;
  for (int s = 0; s < S; ++s) {
    decode(s);
    for (int i = 0; i < topo.n_in; ++i) max_occ = std::max(max_occ, X_in[i]);
    for (int j = 0; j < topo.n_out; ++j) max_occ = std::max(max_occ, X_out[j]);
    for (int r = 0; r < R; ++r)
      if (counts[r] == cap) {
        res.boundary_mass += res.pi[s];
        break;
      }
  }
  if (res.boundary_mass > 1e-8)
    throw DomainError("exact_oracle: truncated boundary mass " +
                      std::to_string(res.boundary_mass) + " above 1e-8; increase cap");
  res.link_occupancy.assign(max_occ + 1, 0.0);
  for (int s = 0; s < S; ++s) {
    decode(s);
    for (int i = 0; i < topo.n_in; ++i) res.link_occupancy[X_in[i]] += res.pi[s];
    for (int j = 0; j < topo.n_out; ++j) res.link_occupancy[X_out[j]] += res.pi[s];
  }
  for (auto& p : res.link_occupancy) p /= topo.links();
  return res;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = i < p.size() ? p[i] : 0.0;
    const double qi = i < q.size() ? q[i] : 0.0;
    s += std::abs(pi - qi);
  }
  return 0.5 * s;
}

}  // namespace starmin::netsim
