#include "soupforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "soupforge/kernels.hpp"

namespace soupforge {

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation: " + std::string(s) + " (expected relu or tanh)");
}

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}

std::vector<std::pair<int, int>> ModelSpec::layer_dims() const {
  std::vector<std::pair<int, int>> dims;
  int prev = input_dim;
  for (int h : hidden_dims) {
    dims.emplace_back(prev, h);
    prev = h;
  }
  dims.emplace_back(prev, num_classes);
  return dims;
}

std::size_t ModelSpec::param_count() const {
  std::size_t n = 0;
  for (auto [in, out] : layer_dims())
    n += static_cast<std::size_t>(in) * static_cast<std::size_t>(out) +
         static_cast<std::size_t>(out);
  return n;
}

LayerMap ModelSpec::layer_map() const {
  validate();
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> shapes;
  const auto dims = layer_dims();
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    shapes.emplace_back("w" + std::to_string(l),
                        std::vector<std::uint32_t>{static_cast<std::uint32_t>(out),
                                                   static_cast<std::uint32_t>(in)});
    shapes.emplace_back("b" + std::to_string(l),
                        std::vector<std::uint32_t>{static_cast<std::uint32_t>(out)});
  }
  return LayerMap::build(shapes);
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model input_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("model num_classes must be >= 2");
  for (int h : hidden_dims)
    if (h < 1) throw ConfigError("model hidden dims must be >= 1");
}

void Dataset::validate() const {
  if (labels.empty()) throw ShapeError("dataset is empty");
  if (dim < 1) throw ShapeError("dataset has no features");
  if (features.size() != labels.size() * static_cast<std::size_t>(dim))
    throw ShapeError("dataset feature matrix does not match label count");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw ShapeError("dataset label out of range");
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::OpenFailed, "cannot open for write: " + path.string());
  for (int j = 0; j < data.dim; ++j) {
    if (j) os << ',';
    os << 'f' << j;
  }
  os << ",label\n";
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* r = data.row(i);
    for (int j = 0; j < data.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", r[j]);
      os << buf << ',';
    }
    os << data.labels[i] << '\n';
  }
  os.flush();
  if (!os) throw IoError(IoError::Kind::WriteFailed, "write failed: " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::string role) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::OpenFailed, "cannot open: " + path.string());
  std::string header;
  if (!std::getline(is, header))
    throw IoError(IoError::Kind::Malformed, path.string() + ": missing header");
  if (!header.empty() && header.back() == '\r') header.pop_back();

  int dim = 0;
  {
    std::stringstream ss(header);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 2 || cols.back() != "label")
      throw IoError(IoError::Kind::Malformed, path.string() + ": bad header");
    dim = static_cast<int>(cols.size()) - 1;
    for (int j = 0; j < dim; ++j)
      if (cols[static_cast<std::size_t>(j)] != "f" + std::to_string(j))
        throw IoError(IoError::Kind::Malformed, path.string() + ": bad header column");
  }

  Dataset data;
  data.dim = dim;
  data.role = std::move(role);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    try {
      for (int j = 0; j < dim; ++j) {
        if (!std::getline(ss, field, ','))
          throw IoError(IoError::Kind::Malformed, path.string() + ": short row");
        data.features.push_back(std::stod(field));
      }
      if (!std::getline(ss, field, ','))
        throw IoError(IoError::Kind::Malformed, path.string() + ": missing label");
      data.labels.push_back(std::stoi(field));
    } catch (const std::logic_error&) {
      throw IoError(IoError::Kind::Malformed, path.string() + ": bad numeric field");
    }
  }
  int max_label = 0;
  for (int y : data.labels) max_label = std::max(max_label, y);
  data.num_classes = max_label + 1;
  data.validate();
  return data;
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

namespace {

void apply_activation(Activation act, std::vector<double>& v) {
  if (act == Activation::Relu) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
  } else {
    for (double& x : v) x = std::tanh(x);
  }
}

// Gathers the selected rows into a contiguous batch matrix.
std::vector<double> gather_rows(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size() * static_cast<std::size_t>(data.dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = data.row(rows[i]);
    std::copy(src, src + data.dim, out.data() + i * static_cast<std::size_t>(data.dim));
  }
  return out;
}

struct ForwardPass {
  // acts[0] is the input batch; acts[l+1] is layer l's output (post
  // activation except for the last layer, which stays linear).
  std::vector<std::vector<double>> acts;
};

ForwardPass run_forward(const ModelSpec& spec, const ParamVector& params,
                        const Dataset& data, std::span<const std::size_t> rows) {
  if (params.size() != spec.param_count())
    throw ShapeError("parameter vector does not match model spec");
  if (data.dim != spec.input_dim) throw ShapeError("dataset dim does not match model spec");
  if (rows.empty()) throw ShapeError("empty batch");

  const auto dims = spec.layer_dims();
  const std::size_t nrows = rows.size();
  ForwardPass fp;
  fp.acts.reserve(dims.size() + 1);
  fp.acts.push_back(gather_rows(data, rows));

  std::size_t off = 0;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    const auto [in, out] = dims[l];
    const double* w = params.data() + off;
    const double* b = params.data() + off + static_cast<std::size_t>(in) * out;
    off += static_cast<std::size_t>(in) * out + out;

    std::vector<double> z(nrows * static_cast<std::size_t>(out));
    kernels::dense_forward(w, b, static_cast<std::size_t>(out),
                           static_cast<std::size_t>(in), fp.acts.back().data(), nrows,
                           z.data());
    if (l + 1 < dims.size()) apply_activation(spec.activation, z);
    fp.acts.push_back(std::move(z));
  }
  return fp;
}

int argmax_row(const double* logits, int c) {
  int best = 0;
  for (int j = 1; j < c; ++j)
    if (logits[j] > logits[best]) best = j;  // ties keep the smaller index
  return best;
}

}  // namespace

std::vector<double> forward(const ModelSpec& spec, const ParamVector& params,
                            const Dataset& data, std::span<const std::size_t> rows) {
  return std::move(run_forward(spec, params, data, rows).acts.back());
}

LossValue loss_from_logits(std::span<const double> logits, std::span<const int> labels,
                           int num_classes, double label_smoothing) {
  if (labels.empty()) throw ShapeError("empty batch");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw ConfigError("label smoothing must be in [0, 1)");
  if (logits.size() != labels.size() * static_cast<std::size_t>(num_classes))
    throw ShapeError("logits shape does not match labels");

  const std::size_t n = labels.size();
  const double eps_c = label_smoothing / num_classes;
  std::vector<double> per_row(n);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data() + i * static_cast<std::size_t>(num_classes);
    const int y = labels[i];
    if (y < 0 || y >= num_classes) throw ShapeError("label out of range");
    double mx = row[0];
    for (int c = 1; c < num_classes; ++c) mx = std::max(mx, row[c]);
    double se = 0.0;
    double logit_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      se += std::exp(row[c] - mx);
      logit_sum += row[c];
    }
    const double lse = std::log(se) + mx;
    // -sum_c target_c * (row[c] - lse) with target = (1-eps)*onehot + eps/C
    per_row[i] = lse - (1.0 - label_smoothing) * row[y] - eps_c * logit_sum;
    if (argmax_row(row, num_classes) == y) ++correct;
  }
  LossValue lv;
  lv.value = kernels::sum(per_row.data(), n) / static_cast<double>(n);
  lv.correct = correct;
  return lv;
}

LossValue eval_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                    std::span<const std::size_t> rows, double label_smoothing) {
  std::vector<double> logits = forward(spec, params, data, rows);
  std::vector<int> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[rows[i]];
  return loss_from_logits(logits, labels, spec.num_classes, label_smoothing);
}

ParamVector backward(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                     std::span<const std::size_t> rows, double label_smoothing) {
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw ConfigError("label smoothing must be in [0, 1)");
  ForwardPass fp = run_forward(spec, params, data, rows);
  const auto dims = spec.layer_dims();
  const std::size_t nrows = rows.size();
  const int c = spec.num_classes;
  const double inv_n = 1.0 / static_cast<double>(nrows);
  const double eps_c = label_smoothing / c;

  // delta at the output: (softmax - target) / n per row.
  std::vector<double> delta(nrows * static_cast<std::size_t>(c));
  const std::vector<double>& logits = fp.acts.back();
  for (std::size_t i = 0; i < nrows; ++i) {
    const double* row = logits.data() + i * static_cast<std::size_t>(c);
    double* drow = delta.data() + i * static_cast<std::size_t>(c);
    const int y = data.labels[rows[i]];
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double se = 0.0;
    for (int j = 0; j < c; ++j) se += std::exp(row[j] - mx);
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(row[j] - mx) / se;
      const double target = (j == y ? 1.0 - label_smoothing : 0.0) + eps_c;
      drow[j] = (p - target) * inv_n;
    }
  }

  ParamVector grad(params.size(), 0.0);
  std::size_t off_end = params.size();
  for (std::size_t l = dims.size(); l-- > 0;) {
    const auto [in, out] = dims[l];
    const std::size_t wsize = static_cast<std::size_t>(in) * out;
    const std::size_t off = off_end - wsize - out;
    double* dw = grad.data() + off;
    double* db = grad.data() + off + wsize;
    kernels::dense_grad_params(delta.data(), fp.acts[l].data(),
                               static_cast<std::size_t>(out), static_cast<std::size_t>(in),
                               nrows, dw, db);
    if (l > 0) {
      const double* w = params.data() + off;
      std::vector<double> dprev(nrows * static_cast<std::size_t>(in));
      kernels::dense_grad_input(delta.data(), w, static_cast<std::size_t>(out),
                                static_cast<std::size_t>(in), nrows, dprev.data());
      // Chain through the activation. acts[l] holds the post-activation
      // values of layer l-1; relu uses subgradient 0 at 0.
      const std::vector<double>& a = fp.acts[l];
      if (spec.activation == Activation::Relu) {
        for (std::size_t i = 0; i < dprev.size(); ++i)
          if (a[i] <= 0.0) dprev[i] = 0.0;
      } else {
        for (std::size_t i = 0; i < dprev.size(); ++i) dprev[i] *= 1.0 - a[i] * a[i];
      }
      delta = std::move(dprev);
    }
    off_end = off;
  }
  return grad;
}

ParamVector fd_gradient(const ModelSpec& spec, const ParamVector& params,
                        const Dataset& data, std::span<const std::size_t> rows,
                        double label_smoothing, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be > 0");
  ParamVector p = params;
  ParamVector grad(params.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double lp = eval_loss(spec, p, data, rows, label_smoothing).value;
    p[i] = orig - h;
    const double lm = eval_loss(spec, p, data, rows, label_smoothing).value;
    p[i] = orig;
    grad[i] = (lp - lm) / (2.0 * h);
  }
  return grad;
}

double accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  data.validate();
  const auto rows = all_rows(data);
  std::vector<double> logits = forward(spec, params, data, rows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* row = logits.data() + i * static_cast<std::size_t>(spec.num_classes);
    if (argmax_row(row, spec.num_classes) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

std::vector<double> ensemble_logits(const ModelSpec& spec,
                                    std::span<const ParamVector> models,
                                    const Dataset& data, std::span<const std::size_t> rows) {
  if (models.empty()) throw ShapeError("ensemble of zero models");
  std::vector<double> acc;
  double seen = 0.0;
  for (const ParamVector& m : models) {
    std::vector<double> logits = forward(spec, m, data, rows);
    if (acc.empty()) {
      acc.assign(logits.size(), 0.0);
    } else if (logits.size() != acc.size()) {
      throw ShapeError("ensemble members produced different logit shapes");
    }
    seen += 1.0;
    kernels::mean_update(acc.data(), logits.data(), seen, acc.size());
  }
  return acc;
}

}  // namespace soupforge
