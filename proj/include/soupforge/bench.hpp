#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "soupforge/soup.hpp"

namespace soupforge {

// One soup-construction run: wall time (monotonic clock, construction only),
// the store's peak residency, and accuracies of the resulting soup.
struct BenchReport {
  std::string method;
  int k_count = 0;
  int model_batch = 0;
  int outer = 0;
  int inner = 0;
  double wall_seconds = 0.0;
  int peak_resident_vectors = 0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::string summary;  // members or coefficient range; no commas
};

BenchReport run_bench(SoupMethod method, const CheckpointStore& store,
                      const ModelSpec& spec, const Dataset& val, const Dataset& test,
                      const SoupTrainConfig& cfg);

struct TrendPoint {
  std::uint64_t seed = 0;
  int outer = 0;  // T
  double min_grad_norm_sq = 0.0;
};

// Runs the block-coordinate trainer once per (seed, T) on a convex
// surrogate (model must have no hidden layers) and reports the minimum
// boundary gradient norm. All runs of one seed share the schedule horizon
// max(T) * J, so a shorter run is an exact prefix of a longer one.
std::vector<TrendPoint> convergence_trace(const CheckpointStore& store,
                                          const ModelSpec& spec, const Dataset& val,
                                          const SoupTrainConfig& cfg,
                                          std::span<const int> outer_list,
                                          std::span<const std::uint64_t> seeds);

// Least-squares slope of log(min_grad_norm_sq) vs log(T), fitted per seed
// and averaged.
double trend_loglog_slope(std::span<const TrendPoint> points);

struct CosineReport {
  double mean_raw = 0.0;       // mean pairwise cosine of raw checkpoints
  double mean_centered = 0.0;  // same after subtracting the pool mean
  int pairs_raw = 0;
  int pairs_centered = 0;
  int excluded = 0;  // zero-norm pairs skipped (with a warning)
};

CosineReport cosine_report(const CheckpointStore& store);

struct SensitivityRow {
  int drop = 0;
  double greedy_acc = 0.0;
  double mehl_plus_acc = 0.0;
};

// Sorts the pool by validation accuracy, removes the top n models for each
// n in drops, and compares greedy against the layer-wise block-coordinate
// soup on the surviving pool.
std::vector<SensitivityRow> sensitivity_study(const CheckpointStore& store,
                                              const ModelSpec& spec, const Dataset& val,
                                              const Dataset& test,
                                              std::span<const int> drops,
                                              const SoupTrainConfig& cfg);

void write_bench_csv(const std::filesystem::path& path, std::span<const BenchReport> rows);
void write_sensitivity_csv(const std::filesystem::path& path,
                           std::span<const SensitivityRow> rows);
void write_cosine_csv(const std::filesystem::path& path, const CosineReport& report);
void write_trend_csv(const std::filesystem::path& path, std::span<const TrendPoint> rows);

}  // namespace soupforge
