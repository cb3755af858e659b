#include "soupforge/finetune.hpp"

#include <cmath>

#include "soupforge/kernels.hpp"
#include "soupforge/rng.hpp"

namespace soupforge {

void DataSpec::validate() const {
  if (num_classes < 2) throw ConfigError("data num_classes must be >= 2");
  if (input_dim < 1) throw ConfigError("data input_dim must be >= 1");
  if (stddev < 0.0) throw ConfigError("data stddev must be >= 0");
  if (n_train < num_classes) throw ConfigError("n_train must cover every class");
  if (n_val < 1) throw ConfigError("n_val must be >= 1");
  if (n_test < 1) throw ConfigError("n_test must be >= 1");
}

namespace {

Dataset sample_split(const DataSpec& spec, const std::vector<double>& centers, int n,
                     const char* stream_name, const char* role) {
  Dataset d;
  d.dim = spec.input_dim;
  d.num_classes = spec.num_classes;
  d.role = role;
  d.features.reserve(static_cast<std::size_t>(n) * spec.input_dim);
  d.labels.reserve(static_cast<std::size_t>(n));
  rng::Stream s = rng::Stream::derive(spec.seed, stream_name);
  for (int i = 0; i < n; ++i) {
    const int label = i % spec.num_classes;
    const double* c = centers.data() + static_cast<std::size_t>(label) * spec.input_dim;
    for (int j = 0; j < spec.input_dim; ++j)
      d.features.push_back(c[j] + spec.stddev * s.normal());
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace

SplitDatasets generate_dataset(const DataSpec& spec) {
  spec.validate();
  SplitDatasets out;
  out.centers.resize(static_cast<std::size_t>(spec.num_classes) * spec.input_dim);
  rng::Stream cs = rng::Stream::derive(spec.seed, "data/centers");
  for (double& x : out.centers) x = cs.normal();
  out.train = sample_split(spec, out.centers, spec.n_train, "data/train", "train");
  out.val = sample_split(spec, out.centers, spec.n_val, "data/val", "validation");
  out.test = sample_split(spec, out.centers, spec.n_test, "data/test", "test");
  return out;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p(spec.param_count(), 0.0);
  rng::Stream s = rng::Stream::derive(seed, "init");
  std::size_t off = 0;
  for (auto [in, out] : spec.layer_dims()) {
    const double bound = std::sqrt(6.0 / (in + out));
    const std::size_t wsize = static_cast<std::size_t>(in) * out;
    for (std::size_t i = 0; i < wsize; ++i) p[off + i] = s.uniform(-bound, bound);
    off += wsize + out;  // biases stay zero
  }
  return p;
}

ParamVector train_sgd(const ModelSpec& spec, ParamVector params, const Dataset& train,
                      const HyperParams& h, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (h.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(h.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  train.validate();

  rng::Stream perm_stream = rng::Stream::derive(h.seed, "sgd/perm");
  std::vector<std::size_t> order = all_rows(train);
  const double lr = h.learning_rate;
  const double wd = h.weight_decay;

  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    perm_stream.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(batch_size)) {
      const std::size_t take =
          std::min(order.size() - pos, static_cast<std::size_t>(batch_size));
      std::span<const std::size_t> rows(order.data() + pos, take);
      ParamVector g = backward(spec, params, train, rows, h.label_smoothing);
      for (std::size_t i = 0; i < params.size(); ++i)
        params[i] -= lr * (g[i] + wd * params[i]);
      if (!all_finite(params))
        throw DivergedError("training diverged (non-finite parameters)");
    }
  }
  return params;
}

ParamVector pretrain(const ModelSpec& spec, const Dataset& train, const HyperParams& h,
                     int batch_size) {
  return train_sgd(spec, init_params(spec, h.seed), train, h, batch_size);
}

ParamVector finetune_one(const ModelSpec& spec, const ParamVector& theta0,
                         const Dataset& train, const HyperParams& h, int batch_size) {
  if (theta0.size() != spec.param_count())
    throw ShapeError("pretrained weights do not match model spec");
  return train_sgd(spec, theta0, train, h, batch_size);
}

void SearchGrids::validate() const {
  if (learning_rate.empty() || weight_decay.empty() || epochs.empty() ||
      label_smoothing.empty())
    throw ConfigError("search grids must be non-empty");
  for (double v : learning_rate)
    if (!(v > 0.0)) throw ConfigError("learning rate grid values must be > 0");
  for (double v : weight_decay)
    if (v < 0.0) throw ConfigError("weight decay grid values must be >= 0");
  for (int v : epochs)
    if (v < 1) throw ConfigError("epochs grid values must be >= 1");
  for (double v : label_smoothing)
    if (v < 0.0 || v >= 1.0) throw ConfigError("label smoothing grid values must be in [0,1)");
}

std::vector<HyperParams> random_search(int n, std::uint64_t master_seed,
                                       const SearchGrids& grids) {
  if (n < 1) throw ConfigError("random_search needs n >= 1");
  grids.validate();
  rng::Stream draw = rng::Stream::derive(master_seed, "search");
  std::vector<HyperParams> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    HyperParams h;
    h.learning_rate = grids.learning_rate[draw.below(grids.learning_rate.size())];
    h.weight_decay = grids.weight_decay[draw.below(grids.weight_decay.size())];
    h.epochs = grids.epochs[draw.below(grids.epochs.size())];
    h.label_smoothing = grids.label_smoothing[draw.below(grids.label_smoothing.size())];
    h.seed = rng::derive_seed(master_seed,
                              rng::stream_path("finetune", static_cast<std::uint64_t>(k)));
    out.push_back(h);
  }
  return out;
}

}  // namespace soupforge
