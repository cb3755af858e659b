#pragma once

#include <cstdint>
#include <filesystem>

#include "soupforge/finetune.hpp"

namespace soupforge {

// Ingredient factory output layout:
//   <dir>/pretrained.ckpt          shared starting point
//   <dir>/model_001.ckpt ...       one checkpoint per configuration
//   <dir>/manifest.txt             K lines, checkpoint filenames in id order
struct PoolOptions {
  int k = 16;
  int train_batch = 64;
  double pretrain_lr = 0.03;
  double pretrain_weight_decay = 0.0;
  int pretrain_epochs = 1;
  double pretrain_label_smoothing = 0.0;
  SearchGrids grids;
  int jobs = 1;  // fine-tunes are independent; each owns a derived seed
};

// Pre-trains the shared starting point, fine-tunes k variants under a
// seeded hyperparameter search, and writes everything to `dir`. Returns the
// manifest path. Output is a pure function of (spec, train, master_seed,
// options), regardless of the worker count.
std::filesystem::path build_pool(const std::filesystem::path& dir, const ModelSpec& spec,
                                 const Dataset& train, std::uint64_t master_seed,
                                 const PoolOptions& options);

}  // namespace soupforge
