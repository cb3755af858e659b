// Times the OpenMP kernels against their serial references and checks that
// both produce bitwise-identical results. Run with --smoke for a fast pass
// at small sizes (used by ctest).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "soupforge/kernels.hpp"
#include "soupforge/rng.hpp"

using namespace soupforge;

namespace {

using Clock = std::chrono::steady_clock;

double time_best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

std::vector<double> random_vec(rng::Stream& s, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = s.normal();
  return v;
}

struct Row {
  std::string name;
  std::size_t n;
  double serial_ms;
  double omp_ms;
  bool bitwise_equal;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-22s %12s %12s %12s %10s %8s\n", "kernel", "n", "serial_ms", "omp_ms",
              "speedup", "bitwise");
  for (const auto& r : rows) {
    std::printf("%-22s %12zu %12.3f %12.3f %9.2fx %8s\n", r.name.c_str(), r.n,
                r.serial_ms, r.omp_ms, r.serial_ms / r.omp_ms,
                r.bitwise_equal ? "yes" : "NO");
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool smoke = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--smoke") == 0) smoke = true;

  const std::size_t n = smoke ? (1u << 14) : (1u << 22);
  const std::size_t rows_n = smoke ? 64 : 512;
  const std::size_t dim = smoke ? 64 : 384;
  const int reps = smoke ? 3 : 7;

#ifdef _OPENMP
  std::printf("openmp: %d thread(s)\n", omp_get_max_threads());
#else
  std::printf("openmp: not compiled in\n");
#endif

  rng::Stream s(42);
  const std::vector<double> a = random_vec(s, n);
  const std::vector<double> b = random_vec(s, n);
  const std::vector<double> c = random_vec(s, n);
  const std::vector<double> d = random_vec(s, n);
  std::vector<double> out_serial(n), out_omp(n);

  std::vector<Row> rows;

  {  // dot
    double r_serial = 0, r_omp = 0;
    const double t_serial = time_best_ms(
        reps, [&] { r_serial = kernels::serial::dot(a.data(), b.data(), n); });
    const double t_omp =
        time_best_ms(reps, [&] { r_omp = kernels::dot(a.data(), b.data(), n); });
    rows.push_back({"dot", n, t_serial, t_omp, r_serial == r_omp});
  }
  {  // sum
    double r_serial = 0, r_omp = 0;
    const double t_serial =
        time_best_ms(reps, [&] { r_serial = kernels::serial::sum(a.data(), n); });
    const double t_omp = time_best_ms(reps, [&] { r_omp = kernels::sum(a.data(), n); });
    rows.push_back({"sum", n, t_serial, t_omp, r_serial == r_omp});
  }
  {  // combine, 3 terms
    const double coefs[3] = {0.25, -1.5, 0.75};
    const double* vecs[3] = {b.data(), c.data(), d.data()};
    const double t_serial = time_best_ms(reps, [&] {
      kernels::serial::combine(a.data(), vecs, coefs, 3, out_serial.data(), n);
    });
    const double t_omp = time_best_ms(
        reps, [&] { kernels::combine(a.data(), vecs, coefs, 3, out_omp.data(), n); });
    rows.push_back({"combine(3 terms)", n, t_serial, t_omp,
                    std::memcmp(out_serial.data(), out_omp.data(), n * 8) == 0});
  }
  {  // dense forward
    const std::vector<double> w = random_vec(s, dim * dim);
    const std::vector<double> bias = random_vec(s, dim);
    const std::vector<double> in = random_vec(s, rows_n * dim);
    std::vector<double> o1(rows_n * dim), o2(rows_n * dim);
    const double t_serial = time_best_ms(reps, [&] {
      kernels::serial::dense_forward(w.data(), bias.data(), dim, dim, in.data(), rows_n,
                                     o1.data());
    });
    const double t_omp = time_best_ms(reps, [&] {
      kernels::dense_forward(w.data(), bias.data(), dim, dim, in.data(), rows_n,
                             o2.data());
    });
    rows.push_back({"dense_forward", rows_n * dim, t_serial, t_omp,
                    std::memcmp(o1.data(), o2.data(), o1.size() * 8) == 0});
  }
  {  // dense grad params
    const std::vector<double> delta = random_vec(s, rows_n * dim);
    const std::vector<double> in = random_vec(s, rows_n * dim);
    std::vector<double> dw1(dim * dim), db1(dim), dw2(dim * dim), db2(dim);
    const double t_serial = time_best_ms(reps, [&] {
      kernels::serial::dense_grad_params(delta.data(), in.data(), dim, dim, rows_n,
                                         dw1.data(), db1.data());
    });
    const double t_omp = time_best_ms(reps, [&] {
      kernels::dense_grad_params(delta.data(), in.data(), dim, dim, rows_n, dw2.data(),
                                 db2.data());
    });
    rows.push_back({"dense_grad_params", dim * dim, t_serial, t_omp,
                    std::memcmp(dw1.data(), dw2.data(), dw1.size() * 8) == 0 &&
                        std::memcmp(db1.data(), db2.data(), db1.size() * 8) == 0});
  }

  print_rows(rows);

  for (const auto& r : rows) {
    if (!r.bitwise_equal) {
      std::printf("FAIL: %s differs between serial and OpenMP paths\n", r.name.c_str());
      return 1;
    }
  }
  std::printf("all kernels bitwise-equal across serial and OpenMP paths\n");
  return 0;
}
