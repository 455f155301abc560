// Data-parallel kernels with a serial reference implementation.
//
// Every kernel here is deterministic: the OpenMP variants split work into
// fixed-size chunks whose partial results are combined in index order, so the
// result is bit-identical for any thread count, and identical to the serial
// reference (which uses the same chunking).  tests/test_parallel.cpp holds the
// serial-vs-parallel comparisons and tools/bench.cpp times them.

#pragma once

#include <cstddef>
#include <vector>

#include "starmin/real.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace starmin::kernels {

enum class Exec { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline constexpr std::size_t kChunk = 256;

namespace serial {

// Reference reduction: chunked exactly like the parallel version.
template <class Real, class Term>
Real chunked_sum(std::size_t n, Term&& term) {
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  Real total{0};
  for (std::size_t c = 0; c < nchunks; ++c) {
    const std::size_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
    Real partial{0};
    for (std::size_t i = lo; i < hi; ++i) partial += term(i);
    total += partial;
  }
  return total;
}

template <class Body>
void for_each_index(std::size_t n, Body&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace serial

template <class Real, class Term>
Real chunked_sum(std::size_t n, Term&& term, Exec exec = Exec::parallel) {
#ifdef _OPENMP
  if (exec == Exec::parallel && n >= 4 * kChunk && max_threads() > 1) {
    const std::size_t nchunks = (n + kChunk - 1) / kChunk;
    std::vector<Real> partial(nchunks, Real{0});
    [[maybe_unused]] const unsigned digits = BigFloat::default_precision();
#pragma omp parallel
    {
      if constexpr (is_bigfloat_v<Real>) BigFloat::default_precision(digits);
#pragma omp for schedule(static)
      for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(n, lo + kChunk);
        Real acc{0};
        for (std::size_t i = lo; i < hi; ++i) acc += term(i);
        partial[static_cast<std::size_t>(c)] = acc;
      }
    }
    Real total{0};
    for (const Real& p : partial) total += p;  // fixed combine order
    return total;
  }
#endif
  (void)exec;
  return serial::chunked_sum<Real>(n, term);
}

// Independent-iteration loop (each index writes to its own slot).
template <class Body>
void for_each_index(std::size_t n, Body&& body, Exec exec = Exec::parallel) {
#ifdef _OPENMP
  if (exec == Exec::parallel && max_threads() > 1 && n > 1) {
    [[maybe_unused]] const unsigned digits = BigFloat::default_precision();
#pragma omp parallel
    {
      BigFloat::default_precision(digits);
#pragma omp for schedule(dynamic, 1)
      for (long long i = 0; i < static_cast<long long>(n); ++i)
        body(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  (void)exec;
  serial::for_each_index(n, body);
}

}  // namespace starmin::kernels
