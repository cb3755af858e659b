#pragma once

#include <cstddef>

namespace soupforge::kernels {

// Reductions use a fixed chunked order: partial sums over consecutive
// kChunk-element blocks, combined in block order. The OpenMP paths compute
// the per-block partials concurrently and fold them in the same order, so
// every kernel below is bitwise-equal to its serial counterpart for any
// thread count. Elementwise kernels parallelize over independent outputs
// and are bitwise-trivially identical.
inline constexpr std::size_t kChunk = 4096;

bool parallel_enabled();
void set_parallel(bool on);
int thread_count();

double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

// out[i] = base[i] + sum_j coefs[j] * vecs[j][i], j evaluated in order.
void combine(const double* base, const double* const* vecs, const double* coefs,
             std::size_t nterms, double* out, std::size_t n);

void add_scaled(double* y, double a, const double* x, std::size_t n);  // y += a*x
void sub_inplace(double* y, const double* x, std::size_t n);           // y -= x
void scale(double* y, double a, std::size_t n);

// Incremental mean: acc += (x - acc) / count. Exact when x == acc, which is
// what makes mean-of-identical-vectors reproduce the input bit-for-bit.
void mean_update(double* acc, const double* x, double count, std::size_t n);

// Dense layers. Weights are row-major (fan_out x fan_in); activations are
// row-major (rows x dim).
//   out[r][o] = bias[o] + sum_i w[o][i] * in[r][i]
void dense_forward(const double* w, const double* bias, std::size_t fan_out,
                   std::size_t fan_in, const double* in, std::size_t rows, double* out);
//   dw[o][i] = sum_r delta[r][o] * in[r][i];  db[o] = sum_r delta[r][o]
void dense_grad_params(const double* delta, const double* in, std::size_t fan_out,
                       std::size_t fan_in, std::size_t rows, double* dw, double* db);
//   dprev[r][i] = sum_o delta[r][o] * w[o][i]
void dense_grad_input(const double* delta, const double* w, std::size_t fan_out,
                      std::size_t fan_in, std::size_t rows, double* dprev);

// Reference implementations: plain loops, same canonical evaluation order.
// Kept for the equivalence tests and the kernel benchmark.
namespace serial {
double sum(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void combine(const double* base, const double* const* vecs, const double* coefs,
             std::size_t nterms, double* out, std::size_t n);
void add_scaled(double* y, double a, const double* x, std::size_t n);
void sub_inplace(double* y, const double* x, std::size_t n);
void scale(double* y, double a, std::size_t n);
void mean_update(double* acc, const double* x, double count, std::size_t n);
void dense_forward(const double* w, const double* bias, std::size_t fan_out,
                   std::size_t fan_in, const double* in, std::size_t rows, double* out);
void dense_grad_params(const double* delta, const double* in, std::size_t fan_out,
                       std::size_t fan_in, std::size_t rows, double* dw, double* db);
void dense_grad_input(const double* delta, const double* w, std::size_t fan_out,
                      std::size_t fan_in, std::size_t rows, double* dprev);
}  // namespace serial

}  // namespace soupforge::kernels
