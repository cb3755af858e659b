#include "soupforge/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>

#include "soupforge/bench.hpp"
#include "soupforge/pool.hpp"
#include "soupforge/rng.hpp"
#include "soupforge/soup.hpp"

namespace soupforge {

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(std::uint64_t seed) {
    path = fs::temp_directory_path() /
           ("soupforge-verify-" + std::to_string(rng::mix64(seed ^ 0x5157u)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

LayerMap random_layer_map(rng::Stream& s) {
  const int layers = 1 + static_cast<int>(s.below(4));
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> shapes;
  for (int l = 0; l < layers; ++l) {
    const int ndim = 1 + static_cast<int>(s.below(3));
    std::vector<std::uint32_t> dims;
    for (int d = 0; d < ndim; ++d)
      dims.push_back(1 + static_cast<std::uint32_t>(s.below(6)));
    shapes.emplace_back("layer" + std::to_string(l), dims);
  }
  return LayerMap::build(shapes);
}

ParamVector random_params(rng::Stream& s, std::size_t n, double scale = 1.0) {
  ParamVector v(n);
  for (double& x : v) x = scale * s.normal();
  return v;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

struct Harness {
  // Small shared pool, built once.
  TempDir tmp;
  DataSpec dspec;
  ModelSpec mspec;
  SplitDatasets data;
  CheckpointStore store;
  VerifyOptions opts;

  explicit Harness(const VerifyOptions& options) : tmp(options.seed), opts(options) {
    dspec.num_classes = 3;
    dspec.input_dim = 6;
    dspec.stddev = 1.5;
    dspec.n_train = 360;
    dspec.n_val = 150;
    dspec.n_test = 150;
    dspec.seed = rng::derive_seed(opts.seed, "verify/data");
    mspec.input_dim = dspec.input_dim;
    mspec.hidden_dims = {8};
    mspec.num_classes = dspec.num_classes;
    mspec.activation = Activation::Relu;
    data = generate_dataset(dspec);
    PoolOptions pool;
    pool.k = 6;
    pool.train_batch = 64;
    pool.pretrain_epochs = 2;
    const fs::path manifest =
        build_pool(tmp.path / "pool", mspec, data.train, opts.seed, pool);
    store = CheckpointStore::open(manifest);
  }

  SoupTrainConfig soup_cfg() const {
    SoupTrainConfig cfg;
    cfg.model_batch = 2;
    cfg.outer = 3;
    cfg.inner = 12;
    cfg.data_batch = 32;
    cfg.seed = rng::derive_seed(opts.seed, "verify/soup");
    return cfg;
  }
};

using PropertyFn = std::function<void(Harness&, PropertyResult&)>;

void check(bool ok, PropertyResult& r, const std::string& detail) {
  if (!ok && r.pass) {
    r.pass = false;
    r.detail = detail;
  }
}

// ---- properties ----

void prop_roundtrip(Harness& h, PropertyResult& r) {
  rng::Stream s = rng::Stream::derive(h.opts.seed, "verify/roundtrip");
  for (int i = 0; i < 30 && r.pass; ++i) {
    const LayerMap m = random_layer_map(s);
    const ParamVector p = random_params(s, m.total_len);
    const fs::path f = h.tmp.path / "roundtrip.ckpt";
    write_checkpoint(m, p, f);
    const auto [m2, p2] = read_checkpoint(f);
    check(m2 == m, r, "layer map changed across round-trip");
    check(p2.size() == p.size() &&
              std::memcmp(p2.data(), p.data(), p.size() * sizeof(double)) == 0,
          r, "payload changed across round-trip");
  }
}

void prop_crc(Harness& h, PropertyResult& r) {
  rng::Stream s = rng::Stream::derive(h.opts.seed, "verify/crc");
  const LayerMap m = random_layer_map(s);
  const ParamVector p = random_params(s, m.total_len);
  const fs::path f = h.tmp.path / "crc.ckpt";
  write_checkpoint(m, p, f);
  // Flip one bit in the last payload byte (just before the 4-byte trailer).
  std::fstream io(f, std::ios::binary | std::ios::in | std::ios::out);
  io.seekg(0, std::ios::end);
  const std::streamoff size = io.tellg();
  io.seekg(size - 5);
  char byte;
  io.read(&byte, 1);
  byte = static_cast<char>(byte ^ 0x01);
  io.seekp(size - 5);
  io.write(&byte, 1);
  io.close();
  try {
    read_checkpoint(f);
    check(false, r, "corrupted payload was not detected");
  } catch (const IoError& e) {
    check(e.kind == IoError::Kind::CrcMismatch, r, "wrong error kind for corruption");
  }
}

void prop_combine_exact(Harness& h, PropertyResult& r) {
  rng::Stream s = rng::Stream::derive(h.opts.seed, "verify/combine");
  for (int rep = 0; rep < 20 && r.pass; ++rep) {
    const std::size_t n = 1 + s.below(300);
    auto rand_ints = [&](double scale) {
      ParamVector v(n);
      for (double& x : v)
        x = static_cast<double>(static_cast<std::int64_t>(s.below(1ULL << 36)) -
                                (1LL << 35)) * scale;
      return v;
    };
    const ParamVector base = rand_ints(1.0);
    const ParamVector v1 = rand_ints(1.0);
    const ParamVector v2 = rand_ints(1.0);
    const double c1 = static_cast<double>(static_cast<std::int64_t>(s.below(7)) - 3);
    const double c2 = static_cast<double>(static_cast<std::int64_t>(s.below(7)) - 3);
    const std::pair<double, const ParamVector*> terms[] = {{c1, &v1}, {c2, &v2}};
    const ParamVector got = linear_combine(base, terms);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = base[i] + c1 * v1[i] + c2 * v2[i];  // exact in int range
      check(got[i] == want, r, "integer combination was not exact");
    }
  }
}

void prop_mean_identity(Harness& h, PropertyResult& r) {
  rng::Stream s = rng::Stream::derive(h.opts.seed, "verify/mean");
  const LayerMap m = random_layer_map(s);
  const ParamVector v = random_params(s, m.total_len);
  const fs::path dir = h.tmp.path / "mean";
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  for (int i = 0; i < 5; ++i) {
    const std::string name = "copy" + std::to_string(i) + ".ckpt";
    write_checkpoint(m, v, dir / name);
    manifest << name << '\n';
  }
  manifest.close();
  const CheckpointStore st = CheckpointStore::open(dir / "manifest.txt");
  const ParamVector mean = st.mean_vector();
  check(std::memcmp(mean.data(), v.data(), v.size() * sizeof(double)) == 0, r,
        "mean of identical vectors is not exact");
}

void prop_gradient_check(Harness& h, PropertyResult& r) {
  rng::Stream s = rng::Stream::derive(h.opts.seed, "verify/grad");
  for (Activation act : {Activation::Relu, Activation::Tanh}) {
    ModelSpec spec = h.mspec;
    spec.activation = act;
    ParamVector p = random_params(s, spec.param_count(), 0.5);
    std::vector<std::size_t> rows;
    for (int i = 0; i < 24; ++i) rows.push_back(s.below(h.data.val.size()));
    ParamVector analytic = backward(spec, p, h.data.val, rows, 0.05);
    if (h.opts.corrupt_grad && !analytic.empty()) analytic[0] = -analytic[0];
    const ParamVector fd = fd_gradient(spec, p, h.data.val, rows, 0.05, 1e-4);
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i)
      worst = std::max(worst, rel_err(analytic[i], fd[i]));
    check(worst < 1e-6, r,
          "gradient mismatch vs finite differences (max rel err " +
              std::to_string(worst) + ")");
  }
}

void prop_alpha_gradient(Harness& h, PropertyResult& r) {
  rng::Stream s = rng::Stream::derive(h.opts.seed, "verify/alphagrad");
  const LayerMap lmap = h.mspec.layer_map();
  const int k_count = h.store.count();
  const ParamVector base = h.store.mean_vector();

  for (bool layerwise : {false, true}) {
    std::vector<int> ids(static_cast<std::size_t>(k_count));
    for (int i = 0; i < k_count; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
    auto basis = h.store.acquire_all(ids, &base);
    MixCoefficients alpha = MixCoefficients::make(
        k_count, layerwise, static_cast<int>(lmap.layer_count()));
    for (double& x : alpha.values) x = 0.3 * s.normal();

    std::vector<std::size_t> rows;
    for (int i = 0; i < 32; ++i) rows.push_back(s.below(h.data.val.size()));

    auto soup_at = [&](const MixCoefficients& a) {
      ParamVector soup = base;
      if (!layerwise) {
        std::vector<std::pair<double, const ParamVector*>> terms;
        for (int k = 0; k < k_count; ++k)
          terms.emplace_back(a.at(k, 0), basis[static_cast<std::size_t>(k)].get());
        soup = linear_combine(base, terms);
      } else {
        for (std::size_t l = 0; l < lmap.layer_count(); ++l) {
          const auto& layer = lmap.layers[l];
          for (int k = 0; k < k_count; ++k) {
            const double* src = basis[static_cast<std::size_t>(k)]->data() + layer.offset;
            const double c = a.at(k, static_cast<int>(l));
            for (std::size_t i = 0; i < layer.size(); ++i)
              soup[layer.offset + i] += c * src[i];
          }
        }
      }
      return soup;
    };
    auto loss_at = [&](const MixCoefficients& a) {
      return eval_loss(h.mspec, soup_at(a), h.data.val, rows, 0.0).value;
    };

    const ParamVector soup = soup_at(alpha);
    const ParamVector grad = backward(h.mspec, soup, h.data.val, rows, 0.0);
    const std::vector<double> analytic = alpha_gradient(grad, basis, lmap, layerwise);

    // Finite differences through the full combination.
    const double fd_h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < alpha.values.size(); ++i) {
      MixCoefficients ap = alpha;
      MixCoefficients am = alpha;
      ap.values[i] += fd_h;
      am.values[i] -= fd_h;
      const double fd = (loss_at(ap) - loss_at(am)) / (2.0 * fd_h);
      worst = std::max(worst, rel_err(analytic[i], fd));
    }
    check(worst < 1e-5, r,
          "coefficient gradient mismatch (max rel err " + std::to_string(worst) + ")");
  }
}

void prop_sum_to_one(Harness& h, PropertyResult& r) {
  const SoupResult res = hl_soup(h.store, h.mspec, h.data.val, h.soup_cfg(), true);
  const MixCoefficients eff = effective_coefficients(res.alpha);
  for (int col = 0; col < eff.cols; ++col) {
    double sum = 0.0;
    for (int k = 0; k < eff.num_models; ++k) sum += eff.at(k, col);
    check(std::abs(sum - 1.0) < 1e-12, r,
          "effective coefficients of a column sum to " + std::to_string(sum));
  }
}

void prop_reduction(Harness& h, PropertyResult& r) {
  for (bool layerwise : {false, true}) {
    SoupTrainConfig cfg = h.soup_cfg();
    cfg.outer = 1;
    cfg.model_batch = h.store.count();
    const SoupResult a = mehl_soup(h.store, h.mspec, h.data.val, cfg, layerwise);
    const SoupResult b = hl_soup(h.store, h.mspec, h.data.val, cfg, layerwise);
    check(a.soup == b.soup, r, "block trainer at b=K differs from full-batch soup");
    check(a.alpha.values == b.alpha.values, r, "coefficients differ at b=K");
    check(a.trace.size() == b.trace.size(), r, "trace lengths differ at b=K");
    for (std::size_t i = 0; i < a.trace.size() && r.pass; ++i) {
      check(a.trace[i].val_loss == b.trace[i].val_loss &&
                a.trace[i].grad_norm_sq == b.trace[i].grad_norm_sq,
            r, "trace entries differ at b=K");
    }
  }
}

void prop_block_isolation(Harness& h, PropertyResult& r) {
  SoupTrainConfig cfg = h.soup_cfg();
  cfg.outer = 3;
  cfg.inner = 8;
  cfg.model_batch = 2;

  struct Snapshot {
    std::vector<double> alpha, m, v;
  };
  std::map<int, std::vector<std::pair<std::vector<int>, Snapshot>>> record;
  cfg.observer = [&](const InnerStepView& view) {
    record[view.outer_index].push_back(
        {std::vector<int>(view.block.begin(), view.block.end()),
         Snapshot{view.alpha.values, view.adam.m, view.adam.v}});
  };
  const SoupResult res = mehl_soup(h.store, h.mspec, h.data.val, cfg, true);
  (void)res;
  const int cols = static_cast<int>(h.mspec.layer_map().layer_count());
  for (const auto& [t, snaps] : record) {
    const auto& block = snaps.front().first;
    const Snapshot& first = snaps.front().second;
    for (const auto& [blk, snap] : snaps) {
      for (int k = 0; k < h.store.count(); ++k) {
        if (std::find(block.begin(), block.end(), k + 1) != block.end()) continue;
        for (int c = 0; c < cols; ++c) {
          const std::size_t i = static_cast<std::size_t>(k) * cols + c;
          check(snap.alpha[i] == first.alpha[i] && snap.m[i] == first.m[i] &&
                    snap.v[i] == first.v[i],
                r, "inactive coefficient state changed inside an outer iteration");
        }
      }
    }
  }
}

void prop_residency(Harness& h, PropertyResult& r) {
  SoupTrainConfig cfg = h.soup_cfg();
  cfg.model_batch = 2;
  cfg.outer = 2;
  cfg.inner = 4;

  h.store.reset_peak();
  mehl_soup(h.store, h.mspec, h.data.val, cfg, true);
  const int peak_full = h.store.peak_resident();
  check(peak_full <= cfg.model_batch + 3, r,
        "peak residency " + std::to_string(peak_full) + " exceeds b+3");

  std::vector<int> few{1, 2, 3, 4};
  const CheckpointStore sub = h.store.subset(few);
  mehl_soup(sub, h.mspec, h.data.val, cfg, true);
  check(sub.peak_resident() == peak_full, r,
        "peak residency depends on the pool size");
}

void prop_greedy(Harness& h, PropertyResult& r) {
  double best = 0.0;
  for (int id = 1; id <= h.store.count(); ++id) {
    const CheckpointStore::Handle m = h.store.acquire(id);
    best = std::max(best, accuracy(h.mspec, *m, h.data.val));
  }
  const SoupResult res = greedy_soup(h.store, h.mspec, h.data.val);
  const double soup_acc = accuracy(h.mspec, res.soup, h.data.val);
  check(soup_acc >= best, r,
        "greedy soup validation accuracy fell below the best individual");
}

void prop_softmax(Harness& h, PropertyResult& r) {
  SoupTrainConfig cfg = h.soup_cfg();
  cfg.weight_decay = 0.0;
  cfg.lr = 0.05;
  const SoupResult res = learned_soup_softmax(h.store, h.mspec, h.data.val, cfg, true);
  const MixCoefficients w = softmax_columns(res.alpha);
  for (int col = 0; col < w.cols; ++col) {
    double sum = 0.0;
    for (int k = 0; k < w.num_models; ++k) {
      const double x = w.at(k, col);
      check(x > 0.0 && x < 1.0, r, "softmax weight escaped (0, 1)");
      sum += x;
    }
    check(std::abs(sum - 1.0) < 1e-12, r, "softmax column does not sum to one");
  }
}

const std::vector<std::pair<std::string, PropertyFn>>& properties() {
  static const std::vector<std::pair<std::string, PropertyFn>> props{
      {"checkpoint-roundtrip", prop_roundtrip},
      {"crc-detects-corruption", prop_crc},
      {"linear-combine-exact", prop_combine_exact},
      {"mean-identity", prop_mean_identity},
      {"gradient-check", prop_gradient_check},
      {"alpha-gradient-check", prop_alpha_gradient},
      {"sum-to-one-identity", prop_sum_to_one},
      {"full-batch-reduction", prop_reduction},
      {"block-isolation", prop_block_isolation},
      {"residency-budget", prop_residency},
      {"greedy-guarantee", prop_greedy},
      {"softmax-simplex", prop_softmax},
  };
  return props;
}

}  // namespace

const std::vector<std::string>& verify_property_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : properties()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<PropertyResult> run_verification(const VerifyOptions& options) {
  Harness h(options);
  std::vector<PropertyResult> results;
  for (const auto& [name, fn] : properties()) {
    PropertyResult r;
    r.name = name;
    r.pass = true;
    try {
      fn(h, r);
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace soupforge
