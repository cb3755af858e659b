#pragma once

#include <cstdint>
#include <vector>

#include "soupforge/model.hpp"

namespace soupforge {

struct HyperParams {
  double learning_rate = 0.03;
  double weight_decay = 0.0;
  int epochs = 3;
  double label_smoothing = 0.0;
  std::uint64_t seed = 1;
};

// Synthetic Gaussian-blob classification data. Class centers are drawn once
// from a unit Gaussian (seeded); samples are center + stddev * noise with
// round-robin labels, so classes are balanced within one sample per split.
struct DataSpec {
  int num_classes = 3;
  int input_dim = 8;
  double stddev = 2.0;
  int n_train = 1000;
  int n_val = 512;
  int n_test = 4000;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct SplitDatasets {
  Dataset train, val, test;
  std::vector<double> centers;  // num_classes x input_dim
};

SplitDatasets generate_dataset(const DataSpec& spec);

// Seeded Glorot-style init: weights uniform(-s, s) with
// s = sqrt(6 / (fan_in + fan_out)), biases zero.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Plain SGD with decoupled weight decay: theta <- theta - lr*(g + wd*theta).
// Mini-batches are contiguous slices of a fresh seeded permutation each
// epoch. Throws DivergedError if parameters go non-finite.
ParamVector train_sgd(const ModelSpec& spec, ParamVector params, const Dataset& train,
                      const HyperParams& h, int batch_size);

ParamVector pretrain(const ModelSpec& spec, const Dataset& train, const HyperParams& h,
                     int batch_size);

ParamVector finetune_one(const ModelSpec& spec, const ParamVector& theta0,
                         const Dataset& train, const HyperParams& h, int batch_size);

struct SearchGrids {
  std::vector<double> learning_rate{0.003, 0.01, 0.03, 0.1};
  std::vector<double> weight_decay{0.0, 1e-4, 1e-3, 1e-2};
  std::vector<int> epochs{2, 5, 10};
  std::vector<double> label_smoothing{0.0, 0.05, 0.1};

  void validate() const;
};

// n configurations drawn uniformly from the grids; per-config seeds come
// from the master seed via the "finetune/<k>" substream (k = 1..n).
std::vector<HyperParams> random_search(int n, std::uint64_t master_seed,
                                       const SearchGrids& grids = {});

}  // namespace soupforge
