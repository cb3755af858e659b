#include "soupforge/pool.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include "soupforge/rng.hpp"

namespace soupforge {

namespace {

std::string model_filename(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "model_%03d.ckpt", id);
  return buf;
}

}  // namespace

std::filesystem::path build_pool(const std::filesystem::path& dir, const ModelSpec& spec,
                                 const Dataset& train, std::uint64_t master_seed,
                                 const PoolOptions& options) {
  if (options.k < 1) throw ConfigError("pool size must be >= 1");
  if (options.jobs < 1) throw ConfigError("jobs must be >= 1");
  std::filesystem::create_directories(dir);

  const LayerMap lmap = spec.layer_map();

  HyperParams pre;
  pre.learning_rate = options.pretrain_lr;
  pre.weight_decay = options.pretrain_weight_decay;
  pre.epochs = options.pretrain_epochs;
  pre.label_smoothing = options.pretrain_label_smoothing;
  pre.seed = rng::derive_seed(master_seed, "pretrain");
  const ParamVector theta0 = pretrain(spec, train, pre, options.train_batch);
  write_checkpoint(lmap, theta0, dir / "pretrained.ckpt");

  const std::vector<HyperParams> configs = random_search(options.k, master_seed, options.grids);

  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= options.k) return;
      try {
        const ParamVector theta_k =
            finetune_one(spec, theta0, train, configs[static_cast<std::size_t>(i)],
                         options.train_batch);
        write_checkpoint(lmap, theta_k, dir / model_filename(i + 1));
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (options.jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < options.jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  const std::filesystem::path manifest = dir / "manifest.txt";
  std::ofstream os(manifest, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::OpenFailed, "cannot write manifest");
  for (int id = 1; id <= options.k; ++id) os << model_filename(id) << '\n';
  os.flush();
  if (!os) throw IoError(IoError::Kind::WriteFailed, "manifest write failed");
  return manifest;
}

}  // namespace soupforge
