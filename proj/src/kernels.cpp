#include "soupforge/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace soupforge::kernels {

namespace {
std::atomic<bool> g_parallel{true};

inline std::size_t block_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int thread_count() {
#ifdef _OPENMP
  return parallel_enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

// ---- serial references ----

namespace serial {

double sum(const double* x, std::size_t n) {
  double total = 0.0;
  for (std::size_t c0 = 0; c0 < n; c0 += kChunk) {
    const std::size_t c1 = std::min(n, c0 + kChunk);
    double part = 0.0;
    for (std::size_t i = c0; i < c1; ++i) part += x[i];
    total += part;
  }
  return total;
}

double dot(const double* a, const double* b, std::size_t n) {
  double total = 0.0;
  for (std::size_t c0 = 0; c0 < n; c0 += kChunk) {
    const std::size_t c1 = std::min(n, c0 + kChunk);
    double part = 0.0;
    for (std::size_t i = c0; i < c1; ++i) part += a[i] * b[i];
    total += part;
  }
  return total;
}

void combine(const double* base, const double* const* vecs, const double* coefs,
             std::size_t nterms, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = base[i];
    for (std::size_t j = 0; j < nterms; ++j) acc += coefs[j] * vecs[j][i];
    out[i] = acc;
  }
}

void add_scaled(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void sub_inplace(double* y, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] -= x[i];
}

void scale(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void mean_update(double* acc, const double* x, double count, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += (x[i] - acc[i]) / count;
}

void dense_forward(const double* w, const double* bias, std::size_t fan_out,
                   std::size_t fan_in, const double* in, std::size_t rows, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in + r * fan_in;
    double* yr = out + r * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double* wo = w + o * fan_in;
      double acc = bias[o];
      for (std::size_t i = 0; i < fan_in; ++i) acc += wo[i] * xr[i];
      yr[o] = acc;
    }
  }
}

void dense_grad_params(const double* delta, const double* in, std::size_t fan_out,
                       std::size_t fan_in, std::size_t rows, double* dw, double* db) {
  for (std::size_t o = 0; o < fan_out; ++o) {
    double bacc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) bacc += delta[r * fan_out + o];
    db[o] = bacc;
    double* dwo = dw + o * fan_in;
    for (std::size_t i = 0; i < fan_in; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
        acc += delta[r * fan_out + o] * in[r * fan_in + i];
      dwo[i] = acc;
    }
  }
}

void dense_grad_input(const double* delta, const double* w, std::size_t fan_out,
                      std::size_t fan_in, std::size_t rows, double* dprev) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dr = delta + r * fan_out;
    double* pr = dprev + r * fan_in;
    for (std::size_t i = 0; i < fan_in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < fan_out; ++o) acc += dr[o] * w[o * fan_in + i];
      pr[i] = acc;
    }
  }
}

}  // namespace serial

// ---- OpenMP front ends ----

double sum(const double* x, std::size_t n) {
  const std::size_t nb = block_count(n);
  if (!parallel_enabled() || nb < 2) return serial::sum(x, n);
  std::vector<double> parts(nb);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(nb); ++c) {
    const std::size_t c0 = static_cast<std::size_t>(c) * kChunk;
    const std::size_t c1 = std::min(n, c0 + kChunk);
    double part = 0.0;
    for (std::size_t i = c0; i < c1; ++i) part += x[i];
    parts[static_cast<std::size_t>(c)] = part;
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

double dot(const double* a, const double* b, std::size_t n) {
  const std::size_t nb = block_count(n);
  if (!parallel_enabled() || nb < 2) return serial::dot(a, b, n);
  std::vector<double> parts(nb);
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(nb); ++c) {
    const std::size_t c0 = static_cast<std::size_t>(c) * kChunk;
    const std::size_t c1 = std::min(n, c0 + kChunk);
    double part = 0.0;
    for (std::size_t i = c0; i < c1; ++i) part += a[i] * b[i];
    parts[static_cast<std::size_t>(c)] = part;
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

void combine(const double* base, const double* const* vecs, const double* coefs,
             std::size_t nterms, double* out, std::size_t n) {
  if (!parallel_enabled()) return serial::combine(base, vecs, coefs, nterms, out, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    double acc = base[i];
    for (std::size_t j = 0; j < nterms; ++j) acc += coefs[j] * vecs[j][i];
    out[i] = acc;
  }
}

void add_scaled(double* y, double a, const double* x, std::size_t n) {
  if (!parallel_enabled()) return serial::add_scaled(y, a, x, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) y[i] += a * x[i];
}

void sub_inplace(double* y, const double* x, std::size_t n) {
  if (!parallel_enabled()) return serial::sub_inplace(y, x, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) y[i] -= x[i];
}

void scale(double* y, double a, std::size_t n) {
  if (!parallel_enabled()) return serial::scale(y, a, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) y[i] *= a;
}

void mean_update(double* acc, const double* x, double count, std::size_t n) {
  if (!parallel_enabled()) return serial::mean_update(acc, x, count, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    acc[i] += (x[i] - acc[i]) / count;
}

void dense_forward(const double* w, const double* bias, std::size_t fan_out,
                   std::size_t fan_in, const double* in, std::size_t rows, double* out) {
  if (!parallel_enabled())
    return serial::dense_forward(w, bias, fan_out, fan_in, in, rows, out);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double* xr = in + static_cast<std::size_t>(r) * fan_in;
    double* yr = out + static_cast<std::size_t>(r) * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double* wo = w + o * fan_in;
      double acc = bias[o];
      for (std::size_t i = 0; i < fan_in; ++i) acc += wo[i] * xr[i];
      yr[o] = acc;
    }
  }
}

void dense_grad_params(const double* delta, const double* in, std::size_t fan_out,
                       std::size_t fan_in, std::size_t rows, double* dw, double* db) {
  if (!parallel_enabled())
    return serial::dense_grad_params(delta, in, fan_out, fan_in, rows, dw, db);
  // Each (o, i) entry reduces over rows in index order; entries are
  // independent, so the split across threads cannot change results.
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(fan_out); ++o) {
    const std::size_t oo = static_cast<std::size_t>(o);
    double bacc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) bacc += delta[r * fan_out + oo];
    db[oo] = bacc;
    double* dwo = dw + oo * fan_in;
    for (std::size_t i = 0; i < fan_in; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
        acc += delta[r * fan_out + oo] * in[r * fan_in + i];
      dwo[i] = acc;
    }
  }
}

void dense_grad_input(const double* delta, const double* w, std::size_t fan_out,
                      std::size_t fan_in, std::size_t rows, double* dprev) {
  if (!parallel_enabled())
    return serial::dense_grad_input(delta, w, fan_out, fan_in, rows, dprev);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double* dr = delta + static_cast<std::size_t>(r) * fan_out;
    double* pr = dprev + static_cast<std::size_t>(r) * fan_in;
    for (std::size_t i = 0; i < fan_in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < fan_out; ++o) acc += dr[o] * w[o * fan_in + i];
      pr[i] = acc;
    }
  }
}

}  // namespace soupforge::kernels
