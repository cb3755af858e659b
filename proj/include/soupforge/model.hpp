#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "soupforge/params.hpp"

namespace soupforge {

enum class Activation { Relu, Tanh };

Activation activation_from_string(std::string_view s);  // throws ConfigError
std::string to_string(Activation a);

// Fully-connected classifier: input -> hidden layers -> logits (no output
// activation). Weights are row-major (fan_out x fan_in). Weight matrix and
// bias of each layer are separate named entries in the layer map:
// "w0","b0","w1","b1",...
struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;
  Activation activation = Activation::Relu;

  std::size_t param_count() const;
  LayerMap layer_map() const;
  // Per-layer (fan_in, fan_out) pairs, input to output.
  std::vector<std::pair<int, int>> layer_dims() const;
  void validate() const;  // throws ConfigError
};

struct Dataset {
  std::vector<double> features;  // row-major, size() x dim
  std::vector<int> labels;
  int dim = 0;
  int num_classes = 0;
  std::string role;  // "train" / "validation" / "test"

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const { return features.data() + i * static_cast<std::size_t>(dim); }
  void validate() const;
};

// CSV with header f0,...,f{d-1},label; float64 features printed with 17
// significant digits, LF line endings.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, std::string role);

struct LossValue {
  double value = 0.0;
  std::size_t correct = 0;
};

std::vector<std::size_t> all_rows(const Dataset& data);

// Logits for the given rows; (rows.size() x num_classes), row-major.
std::vector<double> forward(const ModelSpec& spec, const ParamVector& params,
                            const Dataset& data, std::span<const std::size_t> rows);

// Mean cross-entropy with label smoothing: the target distribution is
// (1 - eps) * onehot + eps / C. Log-softmax is evaluated with the row max
// subtracted. `correct` counts argmax hits, ties resolved toward the
// smallest class index.
LossValue loss_from_logits(std::span<const double> logits, std::span<const int> labels,
                           int num_classes, double label_smoothing);

LossValue eval_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                    std::span<const std::size_t> rows, double label_smoothing);

// Analytic gradient of the mean loss over the batch w.r.t. every parameter.
ParamVector backward(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                     std::span<const std::size_t> rows, double label_smoothing);

// Central-difference gradient, (loss(p + h e_i) - loss(p - h e_i)) / 2h.
// Independent check on backward; O(D) forward passes.
ParamVector fd_gradient(const ModelSpec& spec, const ParamVector& params,
                        const Dataset& data, std::span<const std::size_t> rows,
                        double label_smoothing, double h);

double accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& data);

// Arithmetic mean of per-model logits.
std::vector<double> ensemble_logits(const ModelSpec& spec,
                                    std::span<const ParamVector> models,
                                    const Dataset& data, std::span<const std::size_t> rows);

}  // namespace soupforge
