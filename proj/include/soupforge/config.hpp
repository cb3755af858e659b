#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "soupforge/finetune.hpp"
#include "soupforge/soup.hpp"

namespace soupforge {

// INI-style file: [section] headers, key = value lines, '#' or ';'
// comments, UTF-8. Parsing is strict: an unknown section or key is an
// error, since a silently ignored typo in a hyperparameter name is the
// easiest way to invalidate a run.
struct IniFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static IniFile parse_file(const std::filesystem::path& path);  // throws ConfigError
};

// Every field has a default, so an empty config file is a valid run
// configuration. Path values resolve relative to the config file location.
struct RunConfig {
  DataSpec data;
  std::vector<int> hidden_dims{16};
  Activation activation = Activation::Relu;

  int finetune_k = 16;
  int train_batch = 64;
  double pretrain_lr = 0.03;
  double pretrain_weight_decay = 0.0;
  int pretrain_epochs = 1;
  double pretrain_label_smoothing = 0.0;
  SearchGrids grids;

  SoupTrainConfig soup;
  double softmax_lr = 0.05;  // softmax baseline trains with its own optimum
  double softmax_wd = 0.0;

  int bench_seeds = 5;
  std::vector<int> drops{0, 2, 6};
  std::vector<int> trend_outer{4, 16, 64, 256};
  int trend_seeds = 3;
  int trend_inner = 25;
  double trend_lr = 0.05;
  double trend_weight_decay = 0.0;
  int trend_pool = 8;
  int trend_model_batch = 2;
  int trend_data_batch = 64;

  std::filesystem::path data_dir = "data";
  std::filesystem::path models_dir = "models";
  std::filesystem::path soups_dir = "soups";
  std::filesystem::path reports_dir = "reports";

  ModelSpec model_spec() const;
  SoupTrainConfig soup_config_for(SoupMethod method) const;

  static RunConfig defaults() { return RunConfig{}; }
  static RunConfig load(const std::filesystem::path& path);  // throws ConfigError
};

}  // namespace soupforge
