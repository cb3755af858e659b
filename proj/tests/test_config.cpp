#include <doctest.h>

#include <fstream>

#include "soupforge/config.hpp"
#include "test_support.hpp"

using namespace soupforge;
using testsupport::TempDir;

namespace {
std::filesystem::path write_config(const TempDir& tmp, const std::string& text) {
  const auto p = tmp.path / "run.ini";
  std::ofstream(p, std::ios::binary) << text;
  return p;
}
}  // namespace

TEST_CASE("defaults are a valid configuration") {
  const RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.data.num_classes == 3);
  CHECK(cfg.soup.lr == 0.01);
  CHECK(cfg.soup.weight_decay == 0.1);
  CHECK(cfg.softmax_lr == 0.05);
  CHECK(cfg.softmax_wd == 0.0);
  CHECK_NOTHROW(cfg.model_spec().validate());
}

TEST_CASE("softmax methods get their own optimizer defaults") {
  const RunConfig cfg = RunConfig::defaults();
  CHECK(cfg.soup_config_for(SoupMethod::Mehl).lr == 0.01);
  CHECK(cfg.soup_config_for(SoupMethod::Mehl).weight_decay == 0.1);
  CHECK(cfg.soup_config_for(SoupMethod::LearnedSoftmax).lr == 0.05);
  CHECK(cfg.soup_config_for(SoupMethod::LearnedSoftmaxPlus).weight_decay == 0.0);
}

TEST_CASE("a full config file parses") {
  TempDir tmp("cfg");
  const auto p = write_config(tmp, R"(# comment
[data]
num_classes = 4
input_dim = 5
stddev = 2.0
n_train = 100
n_val = 20
n_test = 30

[model]
hidden_dims = 12, 6
activation = tanh

[finetune]
k = 7
lr_grid = 0.1, 0.2

[soup]
model_batch = 3
inner = 11
reset_adam_per_block = true

[bench]
drops = 0, 1

[paths]
data_dir = my_data
)");
  const RunConfig cfg = RunConfig::load(p);
  CHECK(cfg.data.num_classes == 4);
  CHECK(cfg.data.input_dim == 5);
  CHECK(cfg.data.stddev == 2.0);
  CHECK(cfg.hidden_dims == std::vector<int>{12, 6});
  CHECK(cfg.activation == Activation::Tanh);
  CHECK(cfg.finetune_k == 7);
  CHECK(cfg.grids.learning_rate == std::vector<double>{0.1, 0.2});
  CHECK(cfg.soup.model_batch == 3);
  CHECK(cfg.soup.inner == 11);
  CHECK(cfg.soup.reset_adam_per_block == true);
  CHECK(cfg.drops == std::vector<int>{0, 1});
  // relative paths resolve against the config file's directory
  CHECK(cfg.data_dir == tmp.path / "my_data");
  CHECK(cfg.models_dir == tmp.path / "models");
}

TEST_CASE("strict parsing") {
  TempDir tmp("strict");
  SUBCASE("unknown key") {
    const auto p = write_config(tmp, "[soup]\nlearning_rate_typo = 0.1\n");
    try {
      RunConfig::load(p);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("learning_rate_typo") != std::string::npos);
    }
  }
  SUBCASE("unknown section") {
    const auto p = write_config(tmp, "[soupy]\nlr = 0.1\n");
    CHECK_THROWS_AS(RunConfig::load(p), ConfigError);
  }
  SUBCASE("duplicate key") {
    const auto p = write_config(tmp, "[soup]\nlr = 0.1\nlr = 0.2\n");
    CHECK_THROWS_AS(RunConfig::load(p), ConfigError);
  }
  SUBCASE("key outside a section") {
    const auto p = write_config(tmp, "lr = 0.1\n");
    CHECK_THROWS_AS(RunConfig::load(p), ConfigError);
  }
  SUBCASE("malformed value") {
    const auto p = write_config(tmp, "[soup]\ninner = eleven\n");
    CHECK_THROWS_AS(RunConfig::load(p), ConfigError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(RunConfig::load(tmp.path / "nope.ini"), ConfigError);
  }
}
