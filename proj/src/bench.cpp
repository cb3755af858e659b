#include "soupforge/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>

#include "soupforge/csv.hpp"
#include "soupforge/kernels.hpp"

namespace soupforge {

namespace {

std::string method_summary(SoupMethod method, const SoupResult& r) {
  if (method == SoupMethod::Uniform) return "uniform";
  if (method == SoupMethod::Greedy) {
    std::string s = "members=";
    for (std::size_t i = 0; i < r.members.size(); ++i) {
      if (i) s += '|';
      s += std::to_string(r.members[i]);
    }
    return s;
  }
  double lo = r.alpha.values[0], hi = r.alpha.values[0];
  for (double x : r.alpha.values) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return "alpha_min=" + fmt_real(lo) + ";alpha_max=" + fmt_real(hi);
}

}  // namespace

BenchReport run_bench(SoupMethod method, const CheckpointStore& store,
                      const ModelSpec& spec, const Dataset& val, const Dataset& test,
                      const SoupTrainConfig& cfg) {
  BenchReport rep;
  rep.method = to_string(method);
  rep.k_count = store.count();
  rep.model_batch = cfg.model_batch;
  rep.outer = cfg.outer;
  rep.inner = cfg.inner;

  store.reset_peak();
  const auto t0 = std::chrono::steady_clock::now();
  const SoupResult result = run_soup_method(method, store, spec, val, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  rep.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  rep.peak_resident_vectors = store.peak_resident();
  rep.val_acc = accuracy(spec, result.soup, val);
  rep.test_acc = accuracy(spec, result.soup, test);
  rep.summary = method_summary(method, result);
  return rep;
}

std::vector<TrendPoint> convergence_trace(const CheckpointStore& store,
                                          const ModelSpec& spec, const Dataset& val,
                                          const SoupTrainConfig& cfg,
                                          std::span<const int> outer_list,
                                          std::span<const std::uint64_t> seeds) {
  if (!spec.hidden_dims.empty())
    throw ConfigError("convergence trace requires a linear (no hidden layer) model");
  if (outer_list.empty()) throw ConfigError("convergence trace needs at least one T");
  int max_outer = 0;
  for (int t : outer_list) {
    if (t < 1) throw ConfigError("outer iteration counts must be >= 1");
    max_outer = std::max(max_outer, t);
  }

  std::vector<TrendPoint> out;
  for (std::uint64_t seed : seeds) {
    for (int t_count : outer_list) {
      SoupTrainConfig run = cfg;
      run.seed = seed;
      run.outer = t_count;
      // Shared horizon: run T is the exact prefix of run max(T).
      run.schedule_total_steps = max_outer * cfg.inner;
      const SoupResult r = mehl_soup(store, spec, val, run, /*layerwise=*/false);
      double best = r.trace.empty() ? 0.0 : r.trace[0].grad_norm_sq;
      for (const TraceEntry& e : r.trace) best = std::min(best, e.grad_norm_sq);
      out.push_back({seed, t_count, best});
    }
  }
  return out;
}

double trend_loglog_slope(std::span<const TrendPoint> points) {
  // Fit per seed, then average the slopes.
  std::vector<std::uint64_t> seeds;
  for (const auto& p : points)
    if (std::find(seeds.begin(), seeds.end(), p.seed) == seeds.end())
      seeds.push_back(p.seed);

  double slope_sum = 0.0;
  int fitted = 0;
  for (std::uint64_t seed : seeds) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& p : points) {
      if (p.seed != seed) continue;
      const double x = std::log(static_cast<double>(p.outer));
      const double y = std::log(std::max(p.min_grad_norm_sq, 1e-300));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    if (n < 2) continue;
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) continue;
    slope_sum += (n * sxy - sx * sy) / denom;
    ++fitted;
  }
  if (fitted == 0) throw Error("not enough trend points to fit a slope");
  return slope_sum / fitted;
}

CosineReport cosine_report(const CheckpointStore& store) {
  const int k_count = store.count();
  if (k_count < 2) throw ConfigError("cosine report needs at least two checkpoints");

  const ParamVector mean = store.mean_vector();
  CheckpointStore::Lease mean_lease = store.stage("cosine mean");

  CosineReport rep;
  double raw_sum = 0.0, centered_sum = 0.0;
  for (int j = 1; j <= k_count; ++j) {
    const CheckpointStore::Handle hj = store.acquire(j);
    for (int k = j + 1; k <= k_count; ++k) {
      const CheckpointStore::Handle hk = store.acquire(k);
      const std::size_t n = hj->size();

      const double raw_jk = kernels::dot(hj->data(), hk->data(), n);
      const double raw_jj = kernels::dot(hj->data(), hj->data(), n);
      const double raw_kk = kernels::dot(hk->data(), hk->data(), n);
      if (raw_jj > 0.0 && raw_kk > 0.0) {
        raw_sum += raw_jk / (std::sqrt(raw_jj) * std::sqrt(raw_kk));
        ++rep.pairs_raw;
      } else {
        std::cerr << "warning: zero-norm checkpoint pair (" << j << "," << k
                  << ") excluded from raw cosine\n";
        ++rep.excluded;
      }

      // Centered values on the fly; no extra full vectors.
      double cjk = 0.0, cjj = 0.0, ckk = 0.0;
      {
        const double* a = hj->data();
        const double* b = hk->data();
        const double* m = mean.data();
        double pjk = 0.0, pjj = 0.0, pkk = 0.0;
        for (std::size_t c0 = 0; c0 < n; c0 += kernels::kChunk) {
          const std::size_t c1 = std::min(n, c0 + kernels::kChunk);
          double qjk = 0, qjj = 0, qkk = 0;
          for (std::size_t i = c0; i < c1; ++i) {
            const double dj = a[i] - m[i];
            const double dk = b[i] - m[i];
            qjk += dj * dk;
            qjj += dj * dj;
            qkk += dk * dk;
          }
          pjk += qjk;
          pjj += qjj;
          pkk += qkk;
        }
        cjk = pjk;
        cjj = pjj;
        ckk = pkk;
      }
      if (cjj > 0.0 && ckk > 0.0) {
        centered_sum += cjk / (std::sqrt(cjj) * std::sqrt(ckk));
        ++rep.pairs_centered;
      } else {
        std::cerr << "warning: zero-norm centered pair (" << j << "," << k
                  << ") excluded from centered cosine\n";
        ++rep.excluded;
      }
    }
  }
  rep.mean_raw = rep.pairs_raw ? raw_sum / rep.pairs_raw : 0.0;
  rep.mean_centered = rep.pairs_centered ? centered_sum / rep.pairs_centered : 0.0;
  return rep;
}

std::vector<SensitivityRow> sensitivity_study(const CheckpointStore& store,
                                              const ModelSpec& spec, const Dataset& val,
                                              const Dataset& test,
                                              std::span<const int> drops,
                                              const SoupTrainConfig& cfg) {
  const int k_count = store.count();
  for (std::size_t i = 0; i < drops.size(); ++i) {
    if (drops[i] < 0 || drops[i] >= k_count)
      throw ConfigError("drop count must be in [0, K)");
    if (i > 0 && drops[i] <= drops[i - 1])
      throw ConfigError("drop counts must be strictly increasing");
  }

  // Rank once; every drop level reuses the same pool and ordering.
  std::vector<double> accs(static_cast<std::size_t>(k_count));
  for (int id = 1; id <= k_count; ++id) {
    const CheckpointStore::Handle h = store.acquire(id);
    accs[static_cast<std::size_t>(id - 1)] = accuracy(spec, *h, val);
  }
  std::vector<int> ranked(static_cast<std::size_t>(k_count));
  std::iota(ranked.begin(), ranked.end(), 1);
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    const double aa = accs[static_cast<std::size_t>(a - 1)];
    const double ab = accs[static_cast<std::size_t>(b - 1)];
    if (aa != ab) return aa > ab;
    return a < b;
  });

  std::vector<SensitivityRow> rows;
  for (int drop : drops) {
    // Survivors keep their original manifest order.
    std::vector<int> keep(ranked.begin() + drop, ranked.end());
    std::sort(keep.begin(), keep.end());
    const CheckpointStore pool = store.subset(keep);

    SoupTrainConfig run = cfg;
    run.model_batch = std::min(cfg.model_batch, pool.count());

    const SoupResult greedy = greedy_soup(pool, spec, val);
    const SoupResult mehl = mehl_soup(pool, spec, val, run, /*layerwise=*/true);
    rows.push_back({drop, accuracy(spec, greedy.soup, test),
                    accuracy(spec, mehl.soup, test)});
  }
  return rows;
}

void write_bench_csv(const std::filesystem::path& path, std::span<const BenchReport> rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({r.method, std::to_string(r.k_count), std::to_string(r.model_batch),
                   std::to_string(r.outer), std::to_string(r.inner),
                   fmt_real(r.wall_seconds), std::to_string(r.peak_resident_vectors),
                   fmt_real(r.val_acc), fmt_real(r.test_acc), r.summary});
  write_csv(path,
            {"method", "K", "b", "T", "J", "wall_seconds", "peak_resident_vectors",
             "val_acc", "test_acc", "summary"},
            out);
}

void write_sensitivity_csv(const std::filesystem::path& path,
                           std::span<const SensitivityRow> rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({std::to_string(r.drop), fmt_real(r.greedy_acc),
                   fmt_real(r.mehl_plus_acc)});
  write_csv(path, {"drop", "greedy_test_acc", "mehl_plus_test_acc"}, out);
}

void write_cosine_csv(const std::filesystem::path& path, const CosineReport& report) {
  write_csv(path,
            {"mean_raw_cos", "mean_centered_cos", "pairs_raw", "pairs_centered",
             "excluded_pairs"},
            {{fmt_real(report.mean_raw), fmt_real(report.mean_centered),
              std::to_string(report.pairs_raw), std::to_string(report.pairs_centered),
              std::to_string(report.excluded)}});
}

void write_trend_csv(const std::filesystem::path& path, std::span<const TrendPoint> rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows)
    out.push_back({std::to_string(r.seed), std::to_string(r.outer),
                   fmt_real(r.min_grad_norm_sq)});
  write_csv(path, {"seed", "T", "min_grad_norm_sq"}, out);
}

}  // namespace soupforge
