#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "soupforge/pool.hpp"
#include "soupforge/rng.hpp"
#include "soupforge/store.hpp"

namespace testsupport {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("soupforge-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

inline bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

// Writes the given vectors as a checkpoint pool and opens a store over it.
inline soupforge::CheckpointStore make_store(const fs::path& dir,
                                             const soupforge::LayerMap& map,
                                             const std::vector<soupforge::ParamVector>& vecs) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    const std::string name = "m" + std::to_string(i + 1) + ".ckpt";
    soupforge::write_checkpoint(map, vecs[i], dir / name);
    manifest << name << '\n';
  }
  manifest.close();
  return soupforge::CheckpointStore::open(dir / "manifest.txt");
}

struct SmallPool {
  soupforge::DataSpec dspec;
  soupforge::ModelSpec mspec;
  soupforge::SplitDatasets data;
  soupforge::CheckpointStore store;
};

// Fast trained pool for soup tests: 3 classes, 6 features, one hidden layer.
inline SmallPool small_pool(const fs::path& dir, std::uint64_t seed, int k,
                            int hidden = 8) {
  SmallPool p;
  p.dspec.num_classes = 3;
  p.dspec.input_dim = 6;
  p.dspec.stddev = 1.5;
  p.dspec.n_train = 360;
  p.dspec.n_val = 150;
  p.dspec.n_test = 200;
  p.dspec.seed = soupforge::rng::derive_seed(seed, "test/data");
  p.mspec.input_dim = p.dspec.input_dim;
  if (hidden > 0) p.mspec.hidden_dims = {hidden};
  p.mspec.num_classes = p.dspec.num_classes;
  p.data = generate_dataset(p.dspec);
  soupforge::PoolOptions opts;
  opts.k = k;
  opts.pretrain_epochs = 2;
  const fs::path manifest = build_pool(dir, p.mspec, p.data.train, seed, opts);
  p.store = soupforge::CheckpointStore::open(manifest);
  return p;
}

}  // namespace testsupport
