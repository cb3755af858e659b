#include "soupforge/config.hpp"

#include <fstream>
#include <set>

#include "soupforge/csv.hpp"

namespace soupforge {

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

IniFile IniFile::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  IniFile ini;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                          ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                          ": empty section name");
      ini.sections[section];  // may stay empty
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    if (section.empty())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": key outside any [section]");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    if (!ini.sections[section].emplace(key, value).second)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
  }
  return ini;
}

namespace {

// Tracks which keys were consumed so anything left over is an error.
class SectionReader {
 public:
  SectionReader(const IniFile& ini, const std::string& name) : name_(name) {
    auto it = ini.sections.find(name);
    if (it != ini.sections.end()) pairs_ = &it->second;
  }

  bool has(const std::string& key) {
    if (!pairs_) return false;
    return pairs_->count(key) > 0;
  }

  std::string raw(const std::string& key) {
    used_.insert(key);
    return pairs_->at(key);
  }

  void get(const std::string& key, int& out) {
    if (!has(key)) return;
    const std::string v = raw(key);
    try {
      std::size_t used = 0;
      out = std::stoi(v, &used);
      if (used != v.size()) throw ConfigError(bad(key, v, "integer"));
    } catch (const std::logic_error&) {
      throw ConfigError(bad(key, v, "integer"));
    }
  }
  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const std::string v = raw(key);
    try {
      std::size_t used = 0;
      out = std::stod(v, &used);
      if (used != v.size()) throw ConfigError(bad(key, v, "number"));
    } catch (const std::logic_error&) {
      throw ConfigError(bad(key, v, "number"));
    }
  }
  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "yes") out = true;
    else if (v == "false" || v == "0" || v == "no") out = false;
    else throw ConfigError(bad(key, v, "boolean"));
  }
  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    out = raw(key);
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (!has(key)) return;
    out = parse_int_list(raw(key));
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    out = parse_real_list(raw(key));
  }

  void finish() const {
    if (!pairs_) return;
    for (const auto& [key, value] : *pairs_)
      if (!used_.count(key))
        throw ConfigError("unknown key '" + key + "' in section [" + name_ + "]");
  }

 private:
  std::string bad(const std::string& key, const std::string& v, const char* kind) const {
    return "[" + name_ + "] " + key + ": '" + v + "' is not a valid " + kind;
  }

  std::string name_;
  const std::map<std::string, std::string>* pairs_ = nullptr;
  std::set<std::string> used_;
};

}  // namespace

ModelSpec RunConfig::model_spec() const {
  ModelSpec spec;
  spec.input_dim = data.input_dim;
  spec.hidden_dims = hidden_dims;
  spec.num_classes = data.num_classes;
  spec.activation = activation;
  return spec;
}

SoupTrainConfig RunConfig::soup_config_for(SoupMethod method) const {
  SoupTrainConfig cfg = soup;
  if (method == SoupMethod::LearnedSoftmax || method == SoupMethod::LearnedSoftmaxPlus) {
    cfg.lr = softmax_lr;
    cfg.weight_decay = softmax_wd;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const IniFile ini = IniFile::parse_file(path);
  static const std::set<std::string> known_sections{"data",  "model", "finetune",
                                                    "soup",  "bench", "paths"};
  for (const auto& [name, keys] : ini.sections)
    if (!known_sections.count(name))
      throw ConfigError("unknown section [" + name + "] in " + path.string());

  RunConfig cfg;

  SectionReader data(ini, "data");
  data.get("num_classes", cfg.data.num_classes);
  data.get("input_dim", cfg.data.input_dim);
  data.get("stddev", cfg.data.stddev);
  data.get("n_train", cfg.data.n_train);
  data.get("n_val", cfg.data.n_val);
  data.get("n_test", cfg.data.n_test);
  data.finish();

  SectionReader model(ini, "model");
  model.get("hidden_dims", cfg.hidden_dims);
  if (model.has("activation")) cfg.activation = activation_from_string(model.raw("activation"));
  model.finish();

  SectionReader ft(ini, "finetune");
  ft.get("k", cfg.finetune_k);
  ft.get("train_batch", cfg.train_batch);
  ft.get("pretrain_lr", cfg.pretrain_lr);
  ft.get("pretrain_weight_decay", cfg.pretrain_weight_decay);
  ft.get("pretrain_epochs", cfg.pretrain_epochs);
  ft.get("pretrain_label_smoothing", cfg.pretrain_label_smoothing);
  ft.get("lr_grid", cfg.grids.learning_rate);
  ft.get("wd_grid", cfg.grids.weight_decay);
  ft.get("epochs_grid", cfg.grids.epochs);
  ft.get("label_smoothing_grid", cfg.grids.label_smoothing);
  ft.finish();

  SectionReader soup(ini, "soup");
  soup.get("model_batch", cfg.soup.model_batch);
  soup.get("outer", cfg.soup.outer);
  soup.get("inner", cfg.soup.inner);
  soup.get("data_batch", cfg.soup.data_batch);
  soup.get("lr", cfg.soup.lr);
  soup.get("weight_decay", cfg.soup.weight_decay);
  soup.get("adam_beta1", cfg.soup.beta1);
  soup.get("adam_beta2", cfg.soup.beta2);
  soup.get("adam_eps", cfg.soup.eps);
  soup.get("label_smoothing", cfg.soup.label_smoothing);
  soup.get("reset_adam_per_block", cfg.soup.reset_adam_per_block);
  soup.get("softmax_lr", cfg.softmax_lr);
  soup.get("softmax_wd", cfg.softmax_wd);
  soup.finish();

  SectionReader bench(ini, "bench");
  bench.get("seeds", cfg.bench_seeds);
  bench.get("drops", cfg.drops);
  bench.get("trend_outer", cfg.trend_outer);
  bench.get("trend_seeds", cfg.trend_seeds);
  bench.get("trend_inner", cfg.trend_inner);
  bench.get("trend_lr", cfg.trend_lr);
  bench.get("trend_weight_decay", cfg.trend_weight_decay);
  bench.get("trend_pool", cfg.trend_pool);
  bench.get("trend_model_batch", cfg.trend_model_batch);
  bench.get("trend_data_batch", cfg.trend_data_batch);
  bench.finish();

  SectionReader paths(ini, "paths");
  const std::filesystem::path base = path.parent_path();
  for (auto [key, target] : {std::pair<const char*, std::filesystem::path*>{"data_dir", &cfg.data_dir},
                             {"models_dir", &cfg.models_dir},
                             {"soups_dir", &cfg.soups_dir},
                             {"reports_dir", &cfg.reports_dir}}) {
    std::string v;
    paths.get(key, v);
    if (!v.empty()) *target = v;
    if (target->is_relative()) *target = base / *target;
  }
  paths.finish();

  return cfg;
}

}  // namespace soupforge
