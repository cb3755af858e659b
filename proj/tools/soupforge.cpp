// soupforge command line: gen | finetune | soup | eval | verify | bench
//
// Exit codes: 0 success, 1 runtime or property failure, 2 usage/config error.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "soupforge/bench.hpp"
#include "soupforge/config.hpp"
#include "soupforge/csv.hpp"
#include "soupforge/pool.hpp"
#include "soupforge/rng.hpp"
#include "soupforge/verify.hpp"

namespace fs = std::filesystem;
using namespace soupforge;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 1;
};

RunConfig load_config(const GlobalArgs& g) {
  if (g.config_path.empty()) return RunConfig::defaults();
  return RunConfig::load(g.config_path);
}

// Inputs named on the command line must exist; anything else is usage error.
void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw ConfigError(std::string(what) + " not found: " + p.string());
}

void write_soup_outputs(const fs::path& out_dir, const CheckpointStore& store,
                        const SoupResult& result, SoupMethod method,
                        bool decentralize) {
  fs::create_directories(out_dir);
  write_checkpoint(store.layer_map(), result.soup, out_dir / "soup.ckpt");

  // alpha.csv: model_id, layer_name, alpha, effective_coef. Global methods
  // write one row per model with layer_name "*".
  const LayerMap& lmap = store.layer_map();
  std::vector<std::vector<std::string>> rows;
  const MixCoefficients& alpha = result.alpha;
  MixCoefficients eff = alpha;
  if (method == SoupMethod::LearnedSoftmax || method == SoupMethod::LearnedSoftmaxPlus) {
    eff = softmax_columns(alpha);
  } else if (method == SoupMethod::Hl || method == SoupMethod::HlPlus ||
             method == SoupMethod::Mehl || method == SoupMethod::MehlPlus) {
    eff = decentralize ? effective_coefficients(alpha) : alpha;
  } else if (method == SoupMethod::Uniform) {
    for (double& x : eff.values) x = 1.0 / store.count();
  } else {  // greedy
    for (int k = 0; k < eff.num_models; ++k) {
      const bool member = std::find(result.members.begin(), result.members.end(),
                                    k + 1) != result.members.end();
      eff.at(k, 0) = member ? 1.0 / static_cast<double>(result.members.size()) : 0.0;
    }
  }
  for (int k = 0; k < alpha.num_models; ++k) {
    for (int col = 0; col < alpha.cols; ++col) {
      const std::string layer = alpha.layerwise
                                    ? lmap.layers[static_cast<std::size_t>(col)].name
                                    : std::string("*");
      rows.push_back({std::to_string(k + 1), layer, fmt_real(alpha.at(k, col)),
                      fmt_real(eff.at(k, col))});
    }
  }
  write_csv(out_dir / "alpha.csv", {"model_id", "layer_name", "alpha", "effective_coef"},
            rows);

  std::vector<std::vector<std::string>> trace_rows;
  for (const TraceEntry& e : result.trace)
    trace_rows.push_back(
        {std::to_string(e.step), fmt_real(e.val_loss), fmt_real(e.grad_norm_sq)});
  write_csv(out_dir / "trace.csv", {"step", "val_loss", "grad_norm_sq"}, trace_rows);
}

int cmd_gen(const GlobalArgs& g, const std::string& out_override) {
  RunConfig cfg = load_config(g);
  cfg.data.seed = rng::derive_seed(g.seed, "data");
  const fs::path out = out_override.empty() ? cfg.data_dir : fs::path(out_override);
  fs::create_directories(out);
  const SplitDatasets data = generate_dataset(cfg.data);
  write_dataset_csv(data.train, out / "train.csv");
  write_dataset_csv(data.val, out / "val.csv");
  write_dataset_csv(data.test, out / "test.csv");
  std::cout << "wrote " << (out / "train.csv").string() << " (" << data.train.size()
            << " rows), val (" << data.val.size() << "), test (" << data.test.size()
            << ")\n";
  return 0;
}

int cmd_finetune(const GlobalArgs& g, int k_override, const std::string& data_dir,
                 const std::string& out_override, int jobs) {
  RunConfig cfg = load_config(g);
  if (k_override >= 0) cfg.finetune_k = k_override;
  if (cfg.finetune_k < 1) throw ConfigError("need at least one fine-tuned model (--k)");

  const fs::path data = data_dir.empty() ? cfg.data_dir : fs::path(data_dir);
  require_exists(data / "train.csv", "training data");
  const Dataset train = read_dataset_csv(data / "train.csv", "train");
  const fs::path out = out_override.empty() ? cfg.models_dir : fs::path(out_override);

  ModelSpec spec = cfg.model_spec();
  if (train.dim != spec.input_dim)
    throw ConfigError("training data dimension does not match [data] input_dim");

  PoolOptions pool;
  pool.k = cfg.finetune_k;
  pool.train_batch = cfg.train_batch;
  pool.pretrain_lr = cfg.pretrain_lr;
  pool.pretrain_weight_decay = cfg.pretrain_weight_decay;
  pool.pretrain_epochs = cfg.pretrain_epochs;
  pool.pretrain_label_smoothing = cfg.pretrain_label_smoothing;
  pool.grids = cfg.grids;
  pool.jobs = jobs;
  const fs::path manifest = build_pool(out, spec, train, g.seed, pool);
  std::cout << "wrote " << cfg.finetune_k << " checkpoints and "
            << manifest.string() << "\n";
  return 0;
}

struct SoupArgs {
  std::string method;
  std::string models;
  std::string val;
  std::string out;
  int model_batch = 0;
  int outer = 0;
  int inner = -1;
  int data_batch = 0;
  double lr = 0.0;
  double wd = -1.0;
  bool layerwise = false;
  bool no_decentralize = false;
  bool reset_adam = false;
  bool lr_set = false;
  bool wd_set = false;
};

int cmd_soup(const GlobalArgs& g, const SoupArgs& a) {
  RunConfig cfg = load_config(g);
  const SoupMethod method = soup_method_from_string(a.method);

  const fs::path manifest = a.models.empty() ? cfg.models_dir / "manifest.txt"
                                             : fs::path(a.models);
  require_exists(manifest, "manifest");
  const CheckpointStore store = CheckpointStore::open(manifest);
  const fs::path val_path = a.val.empty() ? cfg.data_dir / "val.csv" : fs::path(a.val);
  require_exists(val_path, "validation data");
  const Dataset val = read_dataset_csv(val_path, "validation");

  ModelSpec spec = cfg.model_spec();
  spec.input_dim = val.dim;  // data file is authoritative for shapes
  if (spec.param_count() != store.layer_map().total_len)
    throw ConfigError("model spec does not match the checkpoint pool; check --config");

  SoupTrainConfig train = cfg.soup_config_for(method);
  train.seed = rng::derive_seed(g.seed, "soup");
  if (a.model_batch > 0) train.model_batch = a.model_batch;
  if (a.outer > 0) train.outer = a.outer;
  if (a.inner >= 0) train.inner = a.inner;
  if (a.data_batch > 0) train.data_batch = a.data_batch;
  if (a.lr_set) train.lr = a.lr;
  if (a.wd_set) train.weight_decay = a.wd;
  train.decentralize = !a.no_decentralize;
  train.reset_adam_per_block = a.reset_adam;

  const bool layerwise = soup_method_layerwise(method) || a.layerwise;
  SoupResult result;
  switch (method) {
    case SoupMethod::Uniform:
      result = uniform_soup(store);
      break;
    case SoupMethod::Greedy:
      result = greedy_soup(store, spec, val);
      break;
    case SoupMethod::LearnedSoftmax:
    case SoupMethod::LearnedSoftmaxPlus:
      result = learned_soup_softmax(store, spec, val, train, layerwise);
      break;
    case SoupMethod::Hl:
    case SoupMethod::HlPlus:
      result = hl_soup(store, spec, val, train, layerwise);
      break;
    case SoupMethod::Mehl:
    case SoupMethod::MehlPlus:
      result = mehl_soup(store, spec, val, train, layerwise);
      break;
  }

  const fs::path out = a.out.empty() ? cfg.soups_dir / a.method : fs::path(a.out);
  write_soup_outputs(out, store, result, method, train.decentralize);
  std::cout << a.method << ": soup written to " << (out / "soup.ckpt").string()
            << ", val accuracy " << fmt_real(accuracy(spec, result.soup, val)) << "\n";
  return 0;
}

int cmd_eval(const GlobalArgs& g, const std::string& model, const std::string& data_path,
             const std::string& split, double label_smoothing) {
  (void)g;
  if (model.empty() || data_path.empty())
    throw ConfigError("eval needs --model and --data");
  require_exists(model, "checkpoint");
  require_exists(data_path, "data file");
  const Dataset data = read_dataset_csv(data_path, split.empty() ? "data" : split);
  const auto [lmap, params] = read_checkpoint(model);

  // Architecture comes from the layer map ("w0","b0",...). The activation
  // only matters for hidden layers; evaluation uses relu unless overridden
  // by a config. Shapes: w_l is (out x in).
  ModelSpec spec;
  spec.input_dim = data.dim;
  spec.num_classes = data.num_classes;
  std::vector<int> hidden;
  for (const auto& layer : lmap.layers) {
    if (layer.name[0] != 'w') continue;
    hidden.push_back(static_cast<int>(layer.shape[0]));
  }
  if (!hidden.empty()) {
    spec.num_classes = hidden.back();
    hidden.pop_back();
  }
  spec.hidden_dims = hidden;
  if (!g.config_path.empty()) spec.activation = load_config(g).activation;

  if (spec.param_count() != params.size())
    throw ConfigError("checkpoint does not look like a classifier for this data");
  if (spec.num_classes < data.num_classes)
    throw ConfigError("checkpoint has fewer classes than the data");

  const auto rows = all_rows(data);
  const LossValue lv = eval_loss(spec, params, data, rows, label_smoothing);
  const double acc =
      static_cast<double>(lv.correct) / static_cast<double>(data.size());
  std::cout << model << ',' << data.role << ',' << data.size() << ',' << fmt_real(acc)
            << ',' << fmt_real(lv.value) << "\n";
  return 0;
}

int cmd_verify(const GlobalArgs& g, bool list_only, bool corrupt_grad) {
  if (list_only) {
    for (const auto& name : verify_property_names()) std::cout << name << "\n";
    return 0;
  }
  VerifyOptions opts;
  opts.seed = g.seed;
  opts.corrupt_grad = corrupt_grad;
  const auto results = run_verification(opts);
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.pass && !r.detail.empty()) std::cout << " -- " << r.detail;
    std::cout << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

int cmd_bench(const GlobalArgs& g, const std::string& models, const std::string& data_dir,
              const std::string& out_dir, const std::string& sensitivity,
              bool skip_trend) {
  RunConfig cfg = load_config(g);
  const fs::path manifest =
      models.empty() ? cfg.models_dir / "manifest.txt" : fs::path(models);
  require_exists(manifest, "manifest");
  const CheckpointStore store = CheckpointStore::open(manifest);
  const fs::path data = data_dir.empty() ? cfg.data_dir : fs::path(data_dir);
  require_exists(data / "val.csv", "validation data");
  require_exists(data / "test.csv", "test data");
  const Dataset val = read_dataset_csv(data / "val.csv", "validation");
  const Dataset test = read_dataset_csv(data / "test.csv", "test");
  const fs::path out = out_dir.empty() ? cfg.reports_dir : fs::path(out_dir);
  fs::create_directories(out);

  ModelSpec spec = cfg.model_spec();
  spec.input_dim = val.dim;
  if (spec.param_count() != store.layer_map().total_len)
    throw ConfigError("model spec does not match the checkpoint pool; check --config");

  std::vector<BenchReport> reports;
  for (const auto& name : soup_method_names()) {
    const SoupMethod method = soup_method_from_string(name);
    SoupTrainConfig train = cfg.soup_config_for(method);
    train.seed = rng::derive_seed(g.seed, "soup");
    reports.push_back(run_bench(method, store, spec, val, test, train));
    std::cout << "bench " << name << ": test acc "
              << fmt_real(reports.back().test_acc) << ", peak resident "
              << reports.back().peak_resident_vectors << "\n";
  }
  write_bench_csv(out / "bench.csv", reports);

  const CosineReport cos = cosine_report(store);
  write_cosine_csv(out / "cosine.csv", cos);
  std::cout << "cosine: raw " << fmt_real(cos.mean_raw) << ", centered "
            << fmt_real(cos.mean_centered) << "\n";

  std::vector<int> drops = cfg.drops;
  if (!sensitivity.empty()) drops = parse_int_list(sensitivity);
  SoupTrainConfig train = cfg.soup;
  train.seed = rng::derive_seed(g.seed, "soup");
  const auto sens = sensitivity_study(store, spec, val, test, drops, train);
  write_sensitivity_csv(out / "sensitivity.csv", sens);
  for (const auto& row : sens)
    std::cout << "sensitivity drop " << row.drop << ": greedy "
              << fmt_real(row.greedy_acc) << ", mehl-plus "
              << fmt_real(row.mehl_plus_acc) << "\n";

  if (!skip_trend) {
    // Convergence trend runs on a convex surrogate: a linear pool trained
    // on the same data.
    ModelSpec linear = spec;
    linear.hidden_dims.clear();
    const Dataset train_data = read_dataset_csv(data / "train.csv", "train");
    PoolOptions pool;
    pool.k = cfg.trend_pool;
    pool.train_batch = cfg.train_batch;
    pool.pretrain_epochs = cfg.pretrain_epochs;
    const fs::path trend_manifest = build_pool(
        out / "trend_pool", linear, train_data,
        rng::derive_seed(g.seed, "bench/trend"), pool);
    const CheckpointStore trend_store = CheckpointStore::open(trend_manifest);

    SoupTrainConfig trend = cfg.soup;
    trend.inner = cfg.trend_inner;
    trend.lr = cfg.trend_lr;
    trend.weight_decay = cfg.trend_weight_decay;
    trend.model_batch = std::min(cfg.trend_model_batch, trend_store.count());
    trend.data_batch = cfg.trend_data_batch;
    std::vector<std::uint64_t> seeds;
    for (int i = 1; i <= cfg.trend_seeds; ++i)
      seeds.push_back(rng::derive_seed(g.seed, rng::stream_path("bench/trend/seed",
                                                                static_cast<std::uint64_t>(i))));
    const auto points = convergence_trace(trend_store, linear, val, trend,
                                          cfg.trend_outer, seeds);
    write_trend_csv(out / "convergence.csv", points);
    std::cout << "convergence: log-log slope " << fmt_real(trend_loglog_slope(points))
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model soup construction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global --config/--seed may follow the subcommand

  GlobalArgs g;
  app.add_option("--config", g.config_path, "INI run configuration");
  app.add_option("--seed", g.seed, "master seed; all streams derive from it");

  auto* gen = app.add_subcommand("gen", "generate train/val/test CSVs");
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory");

  auto* ft = app.add_subcommand("finetune", "pretrain and fine-tune an ingredient pool");
  int ft_k = -1, ft_jobs = 1;
  std::string ft_data, ft_out;
  ft->add_option("--k", ft_k, "number of fine-tuned models");
  ft->add_option("--data", ft_data, "directory with train.csv");
  ft->add_option("--out", ft_out, "output directory for checkpoints");
  ft->add_option("--jobs", ft_jobs, "parallel fine-tune workers");

  auto* soup = app.add_subcommand("soup", "construct a soup from a checkpoint pool");
  SoupArgs sa;
  soup->add_option("--method", sa.method, "one of: uniform greedy learned-softmax "
                                          "learned-softmax-plus hl hl-plus mehl mehl-plus")
      ->required();
  soup->add_option("--models", sa.models, "manifest file");
  soup->add_option("--val", sa.val, "validation CSV");
  soup->add_option("--out", sa.out, "output directory");
  soup->add_option("--model-batch", sa.model_batch, "models loaded per outer iteration");
  soup->add_option("--outer", sa.outer, "outer iterations");
  soup->add_option("--inner", sa.inner, "inner iterations");
  soup->add_option("--data-batch", sa.data_batch, "validation mini-batch size");
  auto* lr_opt = soup->add_option("--lr", sa.lr, "coefficient learning rate");
  auto* wd_opt = soup->add_option("--wd", sa.wd, "coefficient weight decay");
  soup->add_flag("--layerwise", sa.layerwise, "per-layer coefficients");
  soup->add_flag("--no-decentralize", sa.no_decentralize,
                 "mix raw checkpoints instead of deviations from the mean");
  soup->add_flag("--reset-adam-per-block", sa.reset_adam,
                 "reset optimizer state when a model enters a block");

  auto* ev = app.add_subcommand("eval", "accuracy and mean loss of a checkpoint");
  std::string ev_model, ev_data, ev_split;
  double ev_ls = 0.0;
  ev->add_option("--model", ev_model, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "dataset CSV")->required();
  ev->add_option("--split", ev_split, "split name for the output row");
  ev->add_option("--label-smoothing", ev_ls, "label smoothing for the loss");

  auto* vf = app.add_subcommand("verify", "run the invariant suite");
  bool vf_list = false, vf_corrupt = false;
  vf->add_flag("--list", vf_list, "print property names without running");
  vf->add_flag("--corrupt-grad", vf_corrupt, "fault injection: flip one gradient sign");

  auto* bn = app.add_subcommand("bench", "measure all soup methods and write reports");
  std::string bn_models, bn_data, bn_out, bn_sens;
  bool bn_skip_trend = false;
  bn->add_option("--models", bn_models, "manifest file");
  bn->add_option("--data", bn_data, "directory with val.csv/test.csv");
  bn->add_option("--out", bn_out, "report directory");
  bn->add_option("--sensitivity", bn_sens, "comma list of top-model drop counts");
  bn->add_flag("--skip-trend", bn_skip_trend, "skip the convergence trend study");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(g, gen_out);
    if (ft->parsed()) return cmd_finetune(g, ft_k, ft_data, ft_out, ft_jobs);
    if (soup->parsed()) {
      sa.lr_set = lr_opt->count() > 0;
      sa.wd_set = wd_opt->count() > 0;
      return cmd_soup(g, sa);
    }
    if (ev->parsed()) return cmd_eval(g, ev_model, ev_data, ev_split, ev_ls);
    if (vf->parsed()) return cmd_verify(g, vf_list, vf_corrupt);
    if (bn->parsed()) return cmd_bench(g, bn_models, bn_data, bn_out, bn_sens, bn_skip_trend);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
