#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "soupforge/model.hpp"
#include "soupforge/store.hpp"

namespace soupforge {

// Mixing coefficients, one row per model. Global mixing uses a single
// column; layer-wise mixing uses one column per named layer.
struct MixCoefficients {
  bool layerwise = false;
  int num_models = 0;
  int cols = 1;
  std::vector<double> values;  // num_models x cols, row-major

  static MixCoefficients make(int num_models, bool layerwise, int num_layers,
                              double fill = 0.0);
  double& at(int model_idx, int col) { return values[static_cast<std::size_t>(model_idx) * cols + col]; }
  double at(int model_idx, int col) const { return values[static_cast<std::size_t>(model_idx) * cols + col]; }

  bool operator==(const MixCoefficients&) const = default;
};

struct SoupTrainConfig;

// Diagnostic hook, called once with inner_index 0 when a model block has
// been loaded and its frozen part staged, then after every inner step.
struct InnerStepView {
  int outer_index;             // t, 1-based
  int inner_index;             // j; 0 = state at block entry
  std::span<const int> block;  // active ids, ascending
  const MixCoefficients& alpha;
  const struct AdamWState& adam;
};

struct SoupTrainConfig {
  int model_batch = 4;  // b, models loaded per outer iteration
  int outer = 4;        // T
  int inner = 250;      // J
  int data_batch = 64;
  double lr = 0.01;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double label_smoothing = 0.0;
  std::uint64_t seed = 1;
  // Mix deviations from the mean (the default) rather than raw checkpoints.
  // With raw mixing the coefficients start at 1/K so the step-0 soup is
  // still the uniform soup.
  bool decentralize = true;
  // Zero a coefficient's optimizer state whenever its model is loaded into
  // a fresh block. Default keeps state across block appearances.
  bool reset_adam_per_block = false;
  // Cosine schedule horizon in steps; 0 means outer * inner.
  int schedule_total_steps = 0;
  // Fixed block schedule (1-based ids, one entry per outer iteration);
  // empty means sample without replacement per iteration.
  std::vector<std::vector<int>> block_schedule;
  std::function<void(const InnerStepView&)> observer;

  int total_steps() const { return schedule_total_steps > 0 ? schedule_total_steps : outer * inner; }
  void validate(int num_models) const;  // throws ConfigError
};

// Per-coefficient AdamW state. `steps` counts updates per coefficient so
// bias correction stays exact for coordinates that sit out some blocks.
struct AdamWState {
  std::vector<double> m, v;
  std::vector<int> steps;
  int global_step = 0;  // schedule position

  static AdamWState zeros(int num_models, int cols);
};

struct TraceEntry {
  int step = 0;
  double val_loss = 0.0;
  double grad_norm_sq = 0.0;
};

struct SoupResult {
  ParamVector soup;
  MixCoefficients alpha;
  std::vector<int> members;               // greedy only; inclusion order
  std::vector<TraceEntry> trace;          // one entry per outer-iteration boundary
  std::vector<std::vector<int>> blocks;   // ids loaded per outer iteration
};

// Implicit per-model weight on the raw checkpoints under centered mixing:
// 1/K + a_k - mean_k(a), per column. Columns sum to one.
MixCoefficients effective_coefficients(const MixCoefficients& alpha);

// Per-column softmax of a logit matrix; the mixing weights of the softmax
// baseline. Every weight lies in (0, 1) and each column sums to one.
MixCoefficients softmax_columns(const MixCoefficients& logits);

// d(loss)/d(alpha_k) = <grad, basis_k>, restricted to each layer's slice in
// the layer-wise case. Returns basis.size() x cols, row-major.
std::vector<double> alpha_gradient(const ParamVector& grad,
                                   std::span<const CheckpointStore::Handle> basis,
                                   const LayerMap& lmap, bool layerwise);

// Cosine learning rate at a given schedule position.
double cosine_lr(double lr, int step, int total_steps);

// One AdamW step with the cosine schedule on the active rows only; inactive
// rows and their optimizer state are untouched. Weight decay is decoupled
// and applied to active coefficients.
void adamw_cosine_step(MixCoefficients& alpha, AdamWState& st,
                       std::span<const int> active_idx,  // 0-based rows, ascending
                       std::span<const double> active_grads,  // active x cols
                       const SoupTrainConfig& cfg, int total_steps);

SoupResult uniform_soup(const CheckpointStore& store);
SoupResult greedy_soup(const CheckpointStore& store, const ModelSpec& spec,
                       const Dataset& val);
// Full-batch trainer over the whole pool; needs K+3 resident vectors.
SoupResult hl_soup(const CheckpointStore& store, const ModelSpec& spec, const Dataset& val,
                   const SoupTrainConfig& cfg, bool layerwise);
// Softmax-parameterized baseline: trains unconstrained logits, mixes with
// per-column softmax weights. Also full-batch.
SoupResult learned_soup_softmax(const CheckpointStore& store, const ModelSpec& spec,
                                const Dataset& val, const SoupTrainConfig& cfg,
                                bool layerwise);
// Block-coordinate trainer: loads b models per outer iteration, keeps the
// rest of the soup frozen, never exceeds b+3 resident vectors.
SoupResult mehl_soup(const CheckpointStore& store, const ModelSpec& spec,
                     const Dataset& val, const SoupTrainConfig& cfg, bool layerwise);

enum class SoupMethod {
  Uniform,
  Greedy,
  LearnedSoftmax,
  LearnedSoftmaxPlus,
  Hl,
  HlPlus,
  Mehl,
  MehlPlus,
};

const std::vector<std::string>& soup_method_names();
std::string to_string(SoupMethod m);
SoupMethod soup_method_from_string(std::string_view s);  // ConfigError lists valid names
bool soup_method_layerwise(SoupMethod m);

SoupResult run_soup_method(SoupMethod m, const CheckpointStore& store,
                           const ModelSpec& spec, const Dataset& val,
                           const SoupTrainConfig& cfg);

}  // namespace soupforge
