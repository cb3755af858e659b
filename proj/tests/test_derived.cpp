#include <doctest.h>

#include <cmath>

#include "soupforge/bench.hpp"
#include "soupforge/rng.hpp"
#include "test_support.hpp"

// Desk-scale behavioral checks on the default pipeline: these exercise the
// trained system end to end rather than single operations.

using namespace soupforge;
using testsupport::TempDir;

namespace {

struct Pipeline {
  DataSpec dspec;
  ModelSpec mspec;
  SplitDatasets data;
  CheckpointStore store;
};

Pipeline default_pipeline(const std::filesystem::path& dir, std::uint64_t seed) {
  Pipeline p;
  p.dspec.num_classes = 3;
  p.dspec.input_dim = 8;
  p.dspec.stddev = 2.0;
  p.dspec.n_train = 1000;
  p.dspec.n_val = 512;
  p.dspec.n_test = 4000;
  p.dspec.seed = rng::derive_seed(seed, "derived/data");
  p.mspec.input_dim = 8;
  p.mspec.hidden_dims = {16};
  p.mspec.num_classes = 3;
  p.data = generate_dataset(p.dspec);
  PoolOptions opts;
  opts.k = 16;
  p.store = CheckpointStore::open(build_pool(dir, p.mspec, p.data.train, seed, opts));
  return p;
}

SoupTrainConfig default_cfg(std::uint64_t seed) {
  SoupTrainConfig cfg;
  cfg.model_batch = 4;
  cfg.outer = 4;
  cfg.inner = 250;
  cfg.data_batch = 64;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("full-batch training lowers the validation loss from the uniform start") {
  TempDir tmp("hl-loss");
  Pipeline p = default_pipeline(tmp.path, 301);
  const ParamVector mean = p.store.mean_vector();
  const double initial =
      eval_loss(p.mspec, mean, p.data.val, all_rows(p.data.val), 0.0).value;

  bool any_extrapolated = false;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SoupTrainConfig cfg = default_cfg(seed);
    const SoupResult r = hl_soup(p.store, p.mspec, p.data.val, cfg, true);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].val_loss <= initial);

    // the hyperplane formulation may leave the convex hull
    const MixCoefficients eff = effective_coefficients(r.alpha);
    for (double x : eff.values) any_extrapolated = any_extrapolated || x < 0.0 || x > 1.0;
  }
  CHECK(any_extrapolated);
}

TEST_CASE("greedy degrades as top models are eliminated; the learned soup resists") {
  int greedy_monotone = 0;
  int mehl_resists = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TempDir tmp("sens");
    Pipeline p = default_pipeline(tmp.path, seed);
    SoupTrainConfig cfg = default_cfg(rng::derive_seed(seed, "derived/soup"));
    const int drops[] = {0, 2, 6};
    const auto rows =
        sensitivity_study(p.store, p.mspec, p.data.val, p.data.test, drops, cfg);
    REQUIRE(rows.size() == 3);
    if (rows[0].greedy_acc >= rows[1].greedy_acc &&
        rows[1].greedy_acc >= rows[2].greedy_acc)
      ++greedy_monotone;
    const double greedy_drop = rows[0].greedy_acc - rows[1].greedy_acc;
    const double mehl_drop = rows[0].mehl_plus_acc - rows[1].mehl_plus_acc;
    if (mehl_drop <= greedy_drop) ++mehl_resists;
  }
  CHECK(greedy_monotone >= 4);
  CHECK(mehl_resists >= 3);
}
