#include "soupforge/soup.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "soupforge/kernels.hpp"
#include "soupforge/rng.hpp"

namespace soupforge {

MixCoefficients MixCoefficients::make(int num_models, bool layerwise, int num_layers,
                                      double fill) {
  MixCoefficients a;
  a.layerwise = layerwise;
  a.num_models = num_models;
  a.cols = layerwise ? num_layers : 1;
  a.values.assign(static_cast<std::size_t>(num_models) * a.cols, fill);
  return a;
}

AdamWState AdamWState::zeros(int num_models, int cols) {
  AdamWState st;
  const std::size_t n = static_cast<std::size_t>(num_models) * cols;
  st.m.assign(n, 0.0);
  st.v.assign(n, 0.0);
  st.steps.assign(n, 0);
  return st;
}

void SoupTrainConfig::validate(int num_models) const {
  if (model_batch < 1 || model_batch > num_models)
    throw ConfigError("model batch must be between 1 and the pool size " +
                      std::to_string(num_models));
  if (outer < 0) throw ConfigError("outer iterations must be >= 0");
  if (inner < 0) throw ConfigError("inner iterations must be >= 0");
  if (data_batch < 1) throw ConfigError("data batch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("soup learning rate must be > 0");
  if (weight_decay < 0.0) throw ConfigError("soup weight decay must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("adam betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam eps must be > 0");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw ConfigError("label smoothing must be in [0, 1)");
  if (!block_schedule.empty() &&
      block_schedule.size() != static_cast<std::size_t>(outer))
    throw ConfigError("block schedule must have one entry per outer iteration");
}

MixCoefficients effective_coefficients(const MixCoefficients& alpha) {
  MixCoefficients out = alpha;
  const int k_count = alpha.num_models;
  for (int col = 0; col < alpha.cols; ++col) {
    double mean = 0.0;
    for (int k = 0; k < k_count; ++k) mean += alpha.at(k, col);
    mean /= static_cast<double>(k_count);
    const double unif = 1.0 / static_cast<double>(k_count);
    for (int k = 0; k < k_count; ++k) out.at(k, col) = unif + alpha.at(k, col) - mean;
  }
  return out;
}

std::vector<double> alpha_gradient(const ParamVector& grad,
                                   std::span<const CheckpointStore::Handle> basis,
                                   const LayerMap& lmap, bool layerwise) {
  if (grad.size() != lmap.total_len)
    throw ShapeError("gradient length does not match layer map");
  const int cols = layerwise ? static_cast<int>(lmap.layer_count()) : 1;
  std::vector<double> out(basis.size() * static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const ParamVector& d = *basis[i];
    if (d.size() != grad.size()) throw ShapeError("basis vector length mismatch");
    if (!layerwise) {
      out[i] = kernels::dot(grad.data(), d.data(), grad.size());
    } else {
      for (std::size_t l = 0; l < lmap.layer_count(); ++l) {
        const auto& layer = lmap.layers[l];
        out[i * static_cast<std::size_t>(cols) + l] =
            kernels::dot(grad.data() + layer.offset, d.data() + layer.offset, layer.size());
      }
    }
  }
  return out;
}

double cosine_lr(double lr, int step, int total_steps) {
  return 0.5 * lr *
         (1.0 + std::cos(std::numbers::pi_v<double> * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

void adamw_cosine_step(MixCoefficients& alpha, AdamWState& st,
                       std::span<const int> active_idx,
                       std::span<const double> active_grads,
                       const SoupTrainConfig& cfg, int total_steps) {
  if (total_steps <= 0) throw ConfigError("total steps must be > 0");
  if (st.global_step >= total_steps)
    throw Error("optimizer stepped past the end of its schedule");
  const std::size_t cols = static_cast<std::size_t>(alpha.cols);
  if (active_grads.size() != active_idx.size() * cols)
    throw ShapeError("gradient block does not match active coefficients");

  const double lr_t = cosine_lr(cfg.lr, st.global_step, total_steps);
  for (std::size_t a = 0; a < active_idx.size(); ++a) {
    const std::size_t row = static_cast<std::size_t>(active_idx[a]);
    for (std::size_t col = 0; col < cols; ++col) {
      const std::size_t i = row * cols + col;
      const double g = active_grads[a * cols + col];
      st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
      st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
      const int t = ++st.steps[i];
      const double mhat = st.m[i] / (1.0 - std::pow(cfg.beta1, t));
      const double vhat = st.v[i] / (1.0 - std::pow(cfg.beta2, t));
      alpha.values[i] -=
          lr_t * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * alpha.values[i]);
    }
  }
  ++st.global_step;
}

namespace {

std::vector<int> all_ids(int k_count) {
  std::vector<int> ids(static_cast<std::size_t>(k_count));
  std::iota(ids.begin(), ids.end(), 1);
  return ids;
}

std::vector<int> to_rows(std::span<const int> ids) {
  std::vector<int> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) rows[i] = ids[i] - 1;
  return rows;
}

// b distinct ids, drawn without replacement, returned ascending so the
// summation order over a block is canonical.
std::vector<int> sample_block(rng::Stream& s, int k_count, int b) {
  std::vector<int> ids = all_ids(k_count);
  for (int i = 0; i < b; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(s.below(static_cast<std::uint64_t>(k_count - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
  }
  ids.resize(static_cast<std::size_t>(b));
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Contiguous slices of a seeded permutation; reshuffles when exhausted.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, int batch, rng::Stream stream)
      : batch_(static_cast<std::size_t>(batch)), stream_(stream) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    stream_.shuffle(order_);
  }

  std::span<const std::size_t> next() {
    if (pos_ >= order_.size()) {
      stream_.shuffle(order_);
      pos_ = 0;
    }
    const std::size_t take = std::min(order_.size() - pos_, batch_);
    std::span<const std::size_t> s(order_.data() + pos_, take);
    pos_ += take;
    return s;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t batch_;
  rng::Stream stream_;
};

// out = base + sign * sum_i coef(rows[i]) * basis[i], per layer column when
// layer-wise. Basis handles and rows are in ascending id order.
void rebuild_soup(const ParamVector& base, std::span<const CheckpointStore::Handle> basis,
                  std::span<const int> rows, const MixCoefficients& alpha, double sign,
                  const LayerMap& lmap, ParamVector& out) {
  const std::size_t n = base.size();
  out.resize(n);
  const std::size_t b = basis.size();
  std::vector<const double*> vecs(b);
  std::vector<double> coefs(b);
  if (!alpha.layerwise) {
    for (std::size_t i = 0; i < b; ++i) {
      vecs[i] = basis[i]->data();
      coefs[i] = sign * alpha.at(rows[i], 0);
    }
    kernels::combine(base.data(), vecs.data(), coefs.data(), b, out.data(), n);
  } else {
    for (std::size_t l = 0; l < lmap.layer_count(); ++l) {
      const auto& layer = lmap.layers[l];
      for (std::size_t i = 0; i < b; ++i) {
        vecs[i] = basis[i]->data() + layer.offset;
        coefs[i] = sign * alpha.at(rows[i], static_cast<int>(l));
      }
      kernels::combine(base.data() + layer.offset, vecs.data(), coefs.data(), b,
                       out.data() + layer.offset, layer.size());
    }
  }
  if (!all_finite(out)) throw DivergedError("soup went non-finite during training");
}

void check_spec_matches(const ModelSpec& spec, const CheckpointStore& store) {
  if (spec.param_count() != store.layer_map().total_len)
    throw ShapeError("model spec does not match the checkpoint pool");
}

void check_alpha_finite(const MixCoefficients& alpha) {
  for (double x : alpha.values)
    if (!std::isfinite(x)) throw DivergedError("mixing coefficients went non-finite");
}

// Full-validation loss and squared gradient norm w.r.t. the mixing
// coefficients, streaming one checkpoint at a time.
TraceEntry alpha_boundary_entry(const CheckpointStore& store, const ModelSpec& spec,
                                const Dataset& val, double label_smoothing,
                                const ParamVector& soup, const ParamVector* center,
                                const LayerMap& lmap, bool layerwise, int step) {
  const auto rows = all_rows(val);
  const LossValue lv = eval_loss(spec, soup, val, rows, label_smoothing);
  if (!std::isfinite(lv.value)) throw DivergedError("validation loss went non-finite");
  const ParamVector grad = backward(spec, soup, val, rows, label_smoothing);
  double norm2 = 0.0;
  for (int id = 1; id <= store.count(); ++id) {
    const CheckpointStore::Handle h =
        center ? store.acquire_diff(id, *center) : store.acquire(id);
    const std::array<CheckpointStore::Handle, 1> one{h};
    const std::vector<double> g = alpha_gradient(grad, one, lmap, layerwise);
    for (double x : g) norm2 += x * x;
  }
  return {step, lv.value, norm2};
}

void notify(const SoupTrainConfig& cfg, int t, int j, std::span<const int> block,
            const MixCoefficients& alpha, const AdamWState& adam) {
  if (cfg.observer) cfg.observer(InnerStepView{t, j, block, alpha, adam});
}

}  // namespace

SoupResult uniform_soup(const CheckpointStore& store) {
  SoupResult r;
  r.soup = store.mean_vector();
  r.alpha = MixCoefficients::make(store.count(), false, 1, 0.0);
  return r;
}

SoupResult greedy_soup(const CheckpointStore& store, const ModelSpec& spec,
                       const Dataset& val) {
  check_spec_matches(spec, store);
  const int k_count = store.count();

  std::vector<double> accs(static_cast<std::size_t>(k_count));
  for (int id = 1; id <= k_count; ++id) {
    const CheckpointStore::Handle h = store.acquire(id);
    accs[static_cast<std::size_t>(id - 1)] = accuracy(spec, *h, val);
  }
  std::vector<int> order = all_ids(k_count);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double aa = accs[static_cast<std::size_t>(a - 1)];
    const double ab = accs[static_cast<std::size_t>(b - 1)];
    if (aa != ab) return aa > ab;
    return a < b;  // ties: lower id first
  });

  SoupResult r;
  r.members.push_back(order[0]);
  CheckpointStore::Lease soup_lease = store.stage("greedy soup");
  r.soup = *store.acquire(order[0]);
  double best = accs[static_cast<std::size_t>(order[0] - 1)];

  // Candidate kept iff the uniform average of members + candidate does not
  // lower validation accuracy (ties keep, which can only grow the soup).
  for (std::size_t i = 1; i < order.size(); ++i) {
    std::vector<int> trial_ids = r.members;
    trial_ids.push_back(order[i]);
    ParamVector trial = store.mean_vector(trial_ids);
    CheckpointStore::Lease trial_lease = store.stage("greedy trial");
    const double trial_acc = accuracy(spec, trial, val);
    if (trial_acc >= best) {
      r.members.push_back(order[i]);
      r.soup = std::move(trial);
      best = trial_acc;
    }
  }
  r.alpha = MixCoefficients::make(k_count, false, 1, 0.0);
  return r;
}

SoupResult hl_soup(const CheckpointStore& store, const ModelSpec& spec, const Dataset& val,
                   const SoupTrainConfig& cfg, bool layerwise) {
  check_spec_matches(spec, store);
  const int k_count = store.count();
  if (cfg.inner < 0) throw ConfigError("inner iterations must be >= 0");
  const LayerMap& lmap = store.layer_map();
  const int num_layers = static_cast<int>(lmap.layer_count());

  // Full-batch method: every checkpoint stays resident for the whole run.
  ScopedCeiling ceiling(store, k_count + 3);
  if (store.ceiling() > 0 && store.ceiling() < k_count + 3)
    throw BudgetError("full-batch soup needs a residency budget of K+3 = " +
                      std::to_string(k_count + 3) + ", ceiling is " +
                      std::to_string(store.ceiling()));

  ParamVector base = cfg.decentralize ? store.mean_vector()
                                      : ParamVector(lmap.total_len, 0.0);
  CheckpointStore::Lease base_lease = store.stage("mixing base");

  const std::vector<int> ids = all_ids(k_count);
  std::vector<CheckpointStore::Handle> basis =
      store.acquire_all(ids, cfg.decentralize ? &base : nullptr);
  const std::vector<int> rows = to_rows(ids);

  MixCoefficients alpha = MixCoefficients::make(
      k_count, layerwise, num_layers,
      cfg.decentralize ? 0.0 : 1.0 / static_cast<double>(k_count));
  AdamWState adam = AdamWState::zeros(k_count, alpha.cols);

  CheckpointStore::Lease soup_lease = store.stage("soup");
  ParamVector soup(lmap.total_len);

  const int total =
      cfg.schedule_total_steps > 0 ? cfg.schedule_total_steps : cfg.inner;
  BatchSampler sampler(val.size(), cfg.data_batch,
                       rng::Stream::derive(cfg.seed, "soup/data"));

  notify(cfg, 1, 0, ids, alpha, adam);
  for (int j = 1; j <= cfg.inner; ++j) {
    rebuild_soup(base, basis, rows, alpha, 1.0, lmap, soup);
    const auto batch = sampler.next();
    const ParamVector grad = backward(spec, soup, val, batch, cfg.label_smoothing);
    const std::vector<double> g = alpha_gradient(grad, basis, lmap, layerwise);
    adamw_cosine_step(alpha, adam, rows, g, cfg, total);
    check_alpha_finite(alpha);
    notify(cfg, 1, j, ids, alpha, adam);
  }
  rebuild_soup(base, basis, rows, alpha, 1.0, lmap, soup);
  basis.clear();

  SoupResult r;
  r.trace.push_back(alpha_boundary_entry(store, spec, val, cfg.label_smoothing, soup,
                                         cfg.decentralize ? &base : nullptr, lmap,
                                         layerwise, cfg.inner));
  r.soup = std::move(soup);
  r.alpha = std::move(alpha);
  r.blocks.push_back(ids);
  return r;
}

SoupResult mehl_soup(const CheckpointStore& store, const ModelSpec& spec,
                     const Dataset& val, const SoupTrainConfig& cfg, bool layerwise) {
  check_spec_matches(spec, store);
  const int k_count = store.count();
  cfg.validate(k_count);
  const LayerMap& lmap = store.layer_map();
  const int num_layers = static_cast<int>(lmap.layer_count());
  const int b = cfg.model_batch;

  // The residency contract: b loaded models plus the three staged vectors
  // (mixing base, frozen part, soup), independent of K.
  ScopedCeiling ceiling(store, b + 3);

  ParamVector base = cfg.decentralize ? store.mean_vector()
                                      : ParamVector(lmap.total_len, 0.0);
  CheckpointStore::Lease base_lease = store.stage("mixing base");

  MixCoefficients alpha = MixCoefficients::make(
      k_count, layerwise, num_layers,
      cfg.decentralize ? 0.0 : 1.0 / static_cast<double>(k_count));
  AdamWState adam = AdamWState::zeros(k_count, alpha.cols);

  CheckpointStore::Lease soup_lease = store.stage("soup");
  ParamVector soup;
  if (cfg.decentralize) {
    soup = base;
  } else {
    // Raw mixing starts from the uniform combination, streamed one model at
    // a time with the same left-to-right order a full rebuild would use.
    soup.assign(lmap.total_len, 0.0);
    const double w = 1.0 / static_cast<double>(k_count);
    for (int id = 1; id <= k_count; ++id) {
      const CheckpointStore::Handle h = store.acquire(id);
      kernels::add_scaled(soup.data(), w, h->data(), soup.size());
    }
  }

  CheckpointStore::Lease fix_lease = store.stage("frozen part");
  ParamVector fix(lmap.total_len);

  const int total = cfg.total_steps();
  BatchSampler sampler(val.size(), cfg.data_batch,
                       rng::Stream::derive(cfg.seed, "soup/data"));
  rng::Stream block_stream = rng::Stream::derive(cfg.seed, "soup/block");

  SoupResult r;
  for (int t = 1; t <= cfg.outer; ++t) {
    std::vector<int> block;
    if (!cfg.block_schedule.empty()) {
      block = cfg.block_schedule[static_cast<std::size_t>(t - 1)];
      std::sort(block.begin(), block.end());
      if (block.size() != static_cast<std::size_t>(b))
        throw ConfigError("block schedule entry size does not match model batch");
      for (std::size_t i = 0; i < block.size(); ++i) {
        if (block[i] < 1 || block[i] > k_count)
          throw ConfigError("block schedule id out of range");
        if (i > 0 && block[i] == block[i - 1])
          throw ConfigError("block schedule entry has duplicate ids");
      }
    } else {
      block = sample_block(block_stream, k_count, b);
    }

    std::vector<CheckpointStore::Handle> basis =
        store.acquire_all(block, cfg.decentralize ? &base : nullptr);
    const std::vector<int> rows = to_rows(block);

    if (cfg.reset_adam_per_block) {
      for (int row : rows) {
        for (int col = 0; col < alpha.cols; ++col) {
          const std::size_t i = static_cast<std::size_t>(row) * alpha.cols + col;
          adam.m[i] = 0.0;
          adam.v[i] = 0.0;
          adam.steps[i] = 0;
        }
      }
    }

    // Freeze everything the active block does not touch: subtract the
    // block's current contribution from the soup.
    rebuild_soup(soup, basis, rows, alpha, -1.0, lmap, fix);
    notify(cfg, t, 0, block, alpha, adam);

    for (int j = 1; j <= cfg.inner; ++j) {
      rebuild_soup(fix, basis, rows, alpha, 1.0, lmap, soup);
      const auto batch = sampler.next();
      const ParamVector grad = backward(spec, soup, val, batch, cfg.label_smoothing);
      const std::vector<double> g = alpha_gradient(grad, basis, lmap, layerwise);
      adamw_cosine_step(alpha, adam, rows, g, cfg, total);
      check_alpha_finite(alpha);
      notify(cfg, t, j, block, alpha, adam);
    }
    rebuild_soup(fix, basis, rows, alpha, 1.0, lmap, soup);
    basis.clear();

    r.trace.push_back(alpha_boundary_entry(store, spec, val, cfg.label_smoothing, soup,
                                           cfg.decentralize ? &base : nullptr, lmap,
                                           layerwise, t * cfg.inner));
    r.blocks.push_back(std::move(block));
  }

  r.soup = std::move(soup);
  r.alpha = std::move(alpha);
  return r;
}

MixCoefficients softmax_columns(const MixCoefficients& logits) {
  MixCoefficients w = logits;
  for (int col = 0; col < logits.cols; ++col) {
    double mx = logits.at(0, col);
    for (int k = 1; k < logits.num_models; ++k) mx = std::max(mx, logits.at(k, col));
    double se = 0.0;
    for (int k = 0; k < logits.num_models; ++k) se += std::exp(logits.at(k, col) - mx);
    for (int k = 0; k < logits.num_models; ++k)
      w.at(k, col) = std::exp(logits.at(k, col) - mx) / se;
  }
  return w;
}

namespace {

// Chain rule through the per-column softmax:
// dL/dz_m = w_m * (dL/dw_m - sum_k w_k dL/dw_k).
std::vector<double> softmax_chain(const MixCoefficients& w, std::span<const double> gw) {
  std::vector<double> gz(gw.size());
  const std::size_t cols = static_cast<std::size_t>(w.cols);
  for (std::size_t col = 0; col < cols; ++col) {
    double inner = 0.0;
    for (int k = 0; k < w.num_models; ++k)
      inner += w.at(k, static_cast<int>(col)) * gw[static_cast<std::size_t>(k) * cols + col];
    for (int k = 0; k < w.num_models; ++k) {
      const std::size_t i = static_cast<std::size_t>(k) * cols + col;
      gz[i] = w.at(k, static_cast<int>(col)) * (gw[i] - inner);
    }
  }
  return gz;
}

}  // namespace

SoupResult learned_soup_softmax(const CheckpointStore& store, const ModelSpec& spec,
                                const Dataset& val, const SoupTrainConfig& cfg,
                                bool layerwise) {
  check_spec_matches(spec, store);
  const int k_count = store.count();
  const LayerMap& lmap = store.layer_map();
  const int num_layers = static_cast<int>(lmap.layer_count());

  ScopedCeiling ceiling(store, k_count + 3);
  if (store.ceiling() > 0 && store.ceiling() < k_count + 3)
    throw BudgetError("full-batch soup needs a residency budget of K+3");

  const std::vector<int> ids = all_ids(k_count);
  std::vector<CheckpointStore::Handle> basis = store.acquire_all(ids, nullptr);
  const std::vector<int> rows = to_rows(ids);

  const ParamVector zero_base(lmap.total_len, 0.0);
  CheckpointStore::Lease base_lease = store.stage("zero base");

  MixCoefficients z = MixCoefficients::make(k_count, layerwise, num_layers, 0.0);
  AdamWState adam = AdamWState::zeros(k_count, z.cols);

  CheckpointStore::Lease soup_lease = store.stage("soup");
  ParamVector soup(lmap.total_len);

  const int total =
      cfg.schedule_total_steps > 0 ? cfg.schedule_total_steps : cfg.inner;
  BatchSampler sampler(val.size(), cfg.data_batch,
                       rng::Stream::derive(cfg.seed, "soup/data"));

  notify(cfg, 1, 0, ids, z, adam);
  for (int j = 1; j <= cfg.inner; ++j) {
    const MixCoefficients w = softmax_columns(z);
    rebuild_soup(zero_base, basis, rows, w, 1.0, lmap, soup);
    const auto batch = sampler.next();
    const ParamVector grad = backward(spec, soup, val, batch, cfg.label_smoothing);
    const std::vector<double> gw = alpha_gradient(grad, basis, lmap, layerwise);
    const std::vector<double> gz = softmax_chain(w, gw);
    adamw_cosine_step(z, adam, rows, gz, cfg, total);
    check_alpha_finite(z);
    notify(cfg, 1, j, ids, z, adam);
  }
  rebuild_soup(zero_base, basis, rows, softmax_columns(z), 1.0, lmap, soup);
  basis.clear();

  // Boundary diagnostics: loss at the final soup and the squared gradient
  // norm w.r.t. the logits, streamed one checkpoint at a time.
  SoupResult r;
  {
    const auto vrows = all_rows(val);
    const LossValue lv = eval_loss(spec, soup, val, vrows, cfg.label_smoothing);
    const ParamVector grad = backward(spec, soup, val, vrows, cfg.label_smoothing);
    std::vector<double> gw(static_cast<std::size_t>(k_count) * z.cols);
    for (int id = 1; id <= k_count; ++id) {
      const CheckpointStore::Handle h = store.acquire(id);
      const std::array<CheckpointStore::Handle, 1> one{h};
      const std::vector<double> g = alpha_gradient(grad, one, lmap, layerwise);
      std::copy(g.begin(), g.end(),
                gw.begin() + static_cast<std::size_t>(id - 1) * z.cols);
    }
    const std::vector<double> gz = softmax_chain(softmax_columns(z), gw);
    double norm2 = 0.0;
    for (double x : gz) norm2 += x * x;
    r.trace.push_back({cfg.inner, lv.value, norm2});
  }
  r.soup = std::move(soup);
  r.alpha = std::move(z);
  r.blocks.push_back(ids);
  return r;
}

const std::vector<std::string>& soup_method_names() {
  static const std::vector<std::string> names{
      "uniform", "greedy",  "learned-softmax", "learned-softmax-plus",
      "hl",      "hl-plus", "mehl",            "mehl-plus"};
  return names;
}

std::string to_string(SoupMethod m) {
  return soup_method_names()[static_cast<std::size_t>(m)];
}

SoupMethod soup_method_from_string(std::string_view s) {
  const auto& names = soup_method_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<SoupMethod>(i);
  std::string msg = "unknown soup method '" + std::string(s) + "'; valid methods:";
  for (const auto& n : names) msg += " " + n;
  throw ConfigError(msg);
}

bool soup_method_layerwise(SoupMethod m) {
  return m == SoupMethod::LearnedSoftmaxPlus || m == SoupMethod::HlPlus ||
         m == SoupMethod::MehlPlus;
}

SoupResult run_soup_method(SoupMethod m, const CheckpointStore& store,
                           const ModelSpec& spec, const Dataset& val,
                           const SoupTrainConfig& cfg) {
  switch (m) {
    case SoupMethod::Uniform:
      return uniform_soup(store);
    case SoupMethod::Greedy:
      return greedy_soup(store, spec, val);
    case SoupMethod::LearnedSoftmax:
      return learned_soup_softmax(store, spec, val, cfg, false);
    case SoupMethod::LearnedSoftmaxPlus:
      return learned_soup_softmax(store, spec, val, cfg, true);
    case SoupMethod::Hl:
      return hl_soup(store, spec, val, cfg, false);
    case SoupMethod::HlPlus:
      return hl_soup(store, spec, val, cfg, true);
    case SoupMethod::Mehl:
      return mehl_soup(store, spec, val, cfg, false);
    case SoupMethod::MehlPlus:
      return mehl_soup(store, spec, val, cfg, true);
  }
  throw ConfigError("unknown soup method");
}

}  // namespace soupforge
