#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <cstdio>

#include "soupforge/bench.hpp"
#include "soupforge/finetune.hpp"
#include "soupforge/kernels.hpp"
#include "test_support.hpp"

using namespace soupforge;
using testsupport::TempDir;

TEST_CASE("dataset generation is deterministic") {
  TempDir tmp("gen");
  DataSpec spec;
  spec.seed = 31;
  const SplitDatasets a = generate_dataset(spec);
  const SplitDatasets b = generate_dataset(spec);
  write_dataset_csv(a.train, tmp.path / "a.csv");
  write_dataset_csv(b.train, tmp.path / "b.csv");
  CHECK(testsupport::read_file(tmp.path / "a.csv") ==
        testsupport::read_file(tmp.path / "b.csv"));
}

TEST_CASE("labels are balanced within one sample per class") {
  DataSpec spec;
  spec.num_classes = 3;
  spec.n_train = 100;  // not divisible by 3
  const SplitDatasets d = generate_dataset(spec);
  int counts[3] = {0, 0, 0};
  for (int y : d.train.labels) ++counts[y];
  const int lo = std::min({counts[0], counts[1], counts[2]});
  const int hi = std::max({counts[0], counts[1], counts[2]});
  CHECK(hi - lo <= 1);
}

TEST_CASE("degenerate data specs are rejected") {
  DataSpec spec;
  spec.num_classes = 1;
  CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
  spec.num_classes = 3;
  spec.input_dim = 0;
  CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
  spec.input_dim = 4;
  spec.n_val = 0;
  CHECK_THROWS_AS(generate_dataset(spec), ConfigError);
}

TEST_CASE("nearest-center oracle brackets the achievable accuracy") {
  DataSpec spec;
  spec.num_classes = 3;
  spec.input_dim = 8;
  spec.stddev = 1.5;
  spec.n_test = 1000;
  spec.seed = 77;
  const SplitDatasets d = generate_dataset(spec);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const double* x = d.test.row(i);
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < 3; ++c) {
      double dist = 0.0;
      for (int j = 0; j < 8; ++j) {
        const double diff = x[j] - d.centers[static_cast<std::size_t>(c) * 8 + j];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    hits += best == d.test.labels[i];
  }
  const double oracle_acc = static_cast<double>(hits) / static_cast<double>(d.test.size());
  CHECK(oracle_acc >= 0.5);
  CHECK(oracle_acc <= 1.0);
}

TEST_CASE("pretrain") {
  DataSpec dspec;
  dspec.n_train = 300;
  dspec.n_val = 60;
  dspec.n_test = 60;
  dspec.input_dim = 6;
  dspec.seed = 5;
  const SplitDatasets data = generate_dataset(dspec);
  ModelSpec spec{6, {8}, 3, Activation::Relu};

  SUBCASE("zero epochs returns the seeded initialization") {
    HyperParams h;
    h.epochs = 0;
    h.seed = 99;
    const ParamVector got = pretrain(spec, data.train, h, 64);
    CHECK(testsupport::same_bits(got, init_params(spec, 99)));
  }
  SUBCASE("same config twice is bit-identical") {
    HyperParams h;
    h.epochs = 2;
    h.seed = 3;
    const ParamVector a = pretrain(spec, data.train, h, 64);
    const ParamVector b = pretrain(spec, data.train, h, 64);
    CHECK(testsupport::same_bits(a, b));
  }
  SUBCASE("training improves train accuracy over the initialization") {
    HyperParams h;
    h.epochs = 4;
    h.seed = 3;
    const ParamVector init = init_params(spec, h.seed);
    const ParamVector trained = pretrain(spec, data.train, h, 64);
    CHECK(accuracy(spec, trained, data.train) > accuracy(spec, init, data.train));
  }
  SUBCASE("biases start at zero and weights within the init bound") {
    const ParamVector p = init_params(spec, 1);
    const LayerMap m = spec.layer_map();
    const double bound0 = std::sqrt(6.0 / (6 + 8));
    for (std::size_t i = 0; i < 6 * 8; ++i) CHECK(std::abs(p[i]) <= bound0);
    for (std::size_t i = 0; i < 8; ++i) CHECK(p[m.layers[1].offset + i] == 0.0);
  }
}

TEST_CASE("finetune_one") {
  DataSpec dspec;
  dspec.n_train = 240;
  dspec.n_val = 60;
  dspec.n_test = 60;
  dspec.input_dim = 5;
  dspec.seed = 6;
  const SplitDatasets data = generate_dataset(dspec);
  ModelSpec spec{5, {6}, 3, Activation::Relu};
  HyperParams pre;
  pre.epochs = 1;
  pre.seed = 1;
  const ParamVector theta0 = pretrain(spec, data.train, pre, 64);

  SUBCASE("zero learning rate keeps the starting point exactly") {
    HyperParams h;
    h.learning_rate = 0.0;
    h.epochs = 3;
    h.seed = 2;
    CHECK(testsupport::same_bits(finetune_one(spec, theta0, data.train, h, 64), theta0));
  }
  SUBCASE("distinct seeds give distinct checkpoints") {
    HyperParams h1;
    h1.epochs = 2;
    h1.seed = 10;
    HyperParams h2 = h1;
    h2.seed = 11;
    const ParamVector a = finetune_one(spec, theta0, data.train, h1, 64);
    const ParamVector b = finetune_one(spec, theta0, data.train, h2, 64);
    double dist = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dist += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(dist > 0.0);
  }
  SUBCASE("an absurd learning rate is reported as divergence") {
    HyperParams h;
    h.learning_rate = 1e8;
    h.epochs = 10;
    h.seed = 4;
    CHECK_THROWS_AS(finetune_one(spec, theta0, data.train, h, 64), DivergedError);
  }
  SUBCASE("larger weight decay shrinks the final parameter norm") {
    double norm_small = 0.0, norm_large = 0.0;
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      HyperParams h;
      h.learning_rate = 0.05;
      h.epochs = 4;
      h.seed = seed;
      h.weight_decay = 0.0;
      const ParamVector a = finetune_one(spec, theta0, data.train, h, 64);
      h.weight_decay = 0.02;
      const ParamVector b = finetune_one(spec, theta0, data.train, h, 64);
      norm_small += std::sqrt(kernels::dot(a.data(), a.data(), a.size()));
      norm_large += std::sqrt(kernels::dot(b.data(), b.data(), b.size()));
    }
    CHECK(norm_large < norm_small);
  }
}

TEST_CASE("raw ingredients are more aligned than their centered deviations") {
  TempDir tmp("cospool");
  auto pool = testsupport::small_pool(tmp.path, 101, 8);
  const CosineReport rep = cosine_report(pool.store);
  CHECK(rep.mean_raw > rep.mean_centered);
}

TEST_CASE("the worker count does not change the pool") {
  DataSpec dspec;
  dspec.n_train = 200;
  dspec.n_val = 30;
  dspec.n_test = 30;
  dspec.input_dim = 4;
  dspec.seed = 8;
  const SplitDatasets data = generate_dataset(dspec);
  ModelSpec spec{4, {5}, 3, Activation::Relu};

  auto build = [&](int jobs, const char* tag) {
    TempDir tmp(tag);
    PoolOptions opts;
    opts.k = 6;
    opts.jobs = jobs;
    opts.pretrain_epochs = 1;
    build_pool(tmp.path, spec, data.train, 12, opts);
    std::vector<std::string> files;
    for (int id = 1; id <= 6; ++id) {
      char name[32];
      std::snprintf(name, sizeof(name), "model_%03d.ckpt", id);
      files.push_back(testsupport::read_file(tmp.path / name));
    }
    return files;
  };
  CHECK(build(1, "jobs1") == build(3, "jobs3"));
}

TEST_CASE("random_search") {
  SUBCASE("same master seed reproduces the list") {
    const auto a = random_search(16, 7);
    const auto b = random_search(16, 7);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].learning_rate == b[i].learning_rate);
      CHECK(a[i].weight_decay == b[i].weight_decay);
      CHECK(a[i].epochs == b[i].epochs);
      CHECK(a[i].label_smoothing == b[i].label_smoothing);
      CHECK(a[i].seed == b[i].seed);
    }
  }
  SUBCASE("every draw belongs to its grid") {
    const SearchGrids grids;
    for (const HyperParams& h : random_search(100, 3)) {
      CHECK(std::count(grids.learning_rate.begin(), grids.learning_rate.end(),
                       h.learning_rate) == 1);
      CHECK(std::count(grids.weight_decay.begin(), grids.weight_decay.end(),
                       h.weight_decay) == 1);
      CHECK(std::count(grids.epochs.begin(), grids.epochs.end(), h.epochs) == 1);
      CHECK(std::count(grids.label_smoothing.begin(), grids.label_smoothing.end(),
                       h.label_smoothing) == 1);
    }
  }
  SUBCASE("learning rates appear with roughly uniform frequency") {
    const SearchGrids grids;
    std::map<double, int> counts;
    for (const HyperParams& h : random_search(1000, 9)) ++counts[h.learning_rate];
    for (double lr : grids.learning_rate)
      CHECK(std::abs(counts[lr] / 1000.0 - 0.25) < 0.05);
  }
  SUBCASE("per-config seeds are distinct") {
    std::set<std::uint64_t> seeds;
    for (const HyperParams& h : random_search(64, 1)) seeds.insert(h.seed);
    CHECK(seeds.size() == 64);
  }
  SUBCASE("n must be positive") { CHECK_THROWS_AS(random_search(0, 1), ConfigError); }
}
