#include <doctest.h>

#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "soupforge/kernels.hpp"
#include "soupforge/rng.hpp"

using namespace soupforge;

namespace {

std::vector<double> random_vec(rng::Stream& s, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = s.normal();
  return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct ThreadGuard {
  int saved;
  explicit ThreadGuard(int n) {
#ifdef _OPENMP
    saved = omp_get_max_threads();
    omp_set_num_threads(n);
#else
    saved = n;
#endif
  }
  ~ThreadGuard() {
#ifdef _OPENMP
    omp_set_num_threads(saved);
#endif
  }
};

}  // namespace

TEST_CASE("parallel kernels match serial references bitwise") {
  ThreadGuard threads(3);
  rng::Stream s(2024);
  // sizes straddle chunk boundaries, including a ragged tail
  for (std::size_t n : {std::size_t{1}, std::size_t{17}, kernels::kChunk,
                        2 * kernels::kChunk + 37, 3 * kernels::kChunk - 1}) {
    const auto a = random_vec(s, n);
    const auto b = random_vec(s, n);
    const auto c = random_vec(s, n);

    CHECK(kernels::dot(a.data(), b.data(), n) ==
          kernels::serial::dot(a.data(), b.data(), n));
    CHECK(kernels::sum(a.data(), n) == kernels::serial::sum(a.data(), n));

    const double coefs[2] = {0.37, -2.25};
    const double* vecs[2] = {b.data(), c.data()};
    std::vector<double> o1(n), o2(n);
    kernels::combine(a.data(), vecs, coefs, 2, o1.data(), n);
    kernels::serial::combine(a.data(), vecs, coefs, 2, o2.data(), n);
    CHECK(bits_equal(o1, o2));

    std::vector<double> y1 = a, y2 = a;
    kernels::add_scaled(y1.data(), 1.7, b.data(), n);
    kernels::serial::add_scaled(y2.data(), 1.7, b.data(), n);
    CHECK(bits_equal(y1, y2));

    y1 = a;
    y2 = a;
    kernels::mean_update(y1.data(), b.data(), 3.0, n);
    kernels::serial::mean_update(y2.data(), b.data(), 3.0, n);
    CHECK(bits_equal(y1, y2));
  }
}

TEST_CASE("dense kernels match serial references bitwise") {
  ThreadGuard threads(3);
  rng::Stream s(99);
  const std::size_t rows = 13, fan_in = 11, fan_out = 7;
  const auto w = random_vec(s, fan_out * fan_in);
  const auto bias = random_vec(s, fan_out);
  const auto in = random_vec(s, rows * fan_in);
  const auto delta = random_vec(s, rows * fan_out);

  std::vector<double> f1(rows * fan_out), f2(rows * fan_out);
  kernels::dense_forward(w.data(), bias.data(), fan_out, fan_in, in.data(), rows, f1.data());
  kernels::serial::dense_forward(w.data(), bias.data(), fan_out, fan_in, in.data(), rows,
                                 f2.data());
  CHECK(bits_equal(f1, f2));

  std::vector<double> dw1(fan_out * fan_in), db1(fan_out);
  std::vector<double> dw2(fan_out * fan_in), db2(fan_out);
  kernels::dense_grad_params(delta.data(), in.data(), fan_out, fan_in, rows, dw1.data(),
                             db1.data());
  kernels::serial::dense_grad_params(delta.data(), in.data(), fan_out, fan_in, rows,
                                     dw2.data(), db2.data());
  CHECK(bits_equal(dw1, dw2));
  CHECK(bits_equal(db1, db2));

  std::vector<double> p1(rows * fan_in), p2(rows * fan_in);
  kernels::dense_grad_input(delta.data(), w.data(), fan_out, fan_in, rows, p1.data());
  kernels::serial::dense_grad_input(delta.data(), w.data(), fan_out, fan_in, rows,
                                    p2.data());
  CHECK(bits_equal(p1, p2));
}

TEST_CASE("disabling parallel mode falls back to the serial path") {
  rng::Stream s(7);
  const std::size_t n = 2 * kernels::kChunk + 5;
  const auto a = random_vec(s, n);
  const auto b = random_vec(s, n);
  kernels::set_parallel(false);
  const double off = kernels::dot(a.data(), b.data(), n);
  kernels::set_parallel(true);
  const double on = kernels::dot(a.data(), b.data(), n);
  CHECK(off == on);
}

TEST_CASE("mean_update of identical vectors is a no-op") {
  rng::Stream s(3);
  std::vector<double> v = random_vec(s, 257);
  std::vector<double> acc = v;
  for (double count : {2.0, 3.0, 10.0}) {
    kernels::mean_update(acc.data(), v.data(), count, v.size());
    CHECK(bits_equal(acc, v));
  }
}
