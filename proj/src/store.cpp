#include "soupforge/store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include "soupforge/kernels.hpp"

namespace soupforge {

struct StoreState {
  std::filesystem::path root;
  std::vector<std::string> files;  // index i holds id i+1
  LayerMap lmap;

  mutable std::mutex mu;
  int resident = 0;
  int peak = 0;
  int ceil = 0;  // 0 = unlimited

  void inc(const char* what) {
    std::lock_guard<std::mutex> lock(mu);
    if (ceil > 0 && resident + 1 > ceil)
      throw BudgetError(std::string("residency budget exceeded acquiring ") + what +
                        ": " + std::to_string(resident) + " resident, ceiling " +
                        std::to_string(ceil));
    ++resident;
    peak = std::max(peak, resident);
  }
  void dec() {
    std::lock_guard<std::mutex> lock(mu);
    --resident;
  }
};

namespace {

// Decrements residency when the last handle copy dies; keeps the state
// alive so a handle may outlive the CheckpointStore value it came from.
struct CountedDeleter {
  std::shared_ptr<StoreState> state;
  void operator()(ParamVector* v) {
    state->dec();
    delete v;
  }
};

}  // namespace

CheckpointStore CheckpointStore::open(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path, std::ios::binary);
  if (!is)
    throw IoError(IoError::Kind::OpenFailed,
                  "cannot open manifest: " + manifest_path.string());
  auto state = std::make_shared<StoreState>();
  state->root = manifest_path.parent_path();
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    state->files.push_back(line);
  }
  if (state->files.empty())
    throw ConfigError("manifest is empty: " + manifest_path.string());

  // All entries must carry the same layer map.
  for (std::size_t i = 0; i < state->files.size(); ++i) {
    LayerMap m = read_layer_map(state->root / state->files[i]);
    if (i == 0) {
      state->lmap = std::move(m);
    } else if (!(m == state->lmap)) {
      throw ShapeError("checkpoint " + state->files[i] +
                       " has a different layer map than " + state->files[0]);
    }
  }
  CheckpointStore s;
  s.state_ = std::move(state);
  return s;
}

int CheckpointStore::count() const { return static_cast<int>(state_->files.size()); }
const LayerMap& CheckpointStore::layer_map() const { return state_->lmap; }
std::filesystem::path CheckpointStore::root() const { return state_->root; }

std::filesystem::path CheckpointStore::file_path(int id) const {
  if (id < 1 || id > count())
    throw NotFoundError("unknown checkpoint id " + std::to_string(id));
  return state_->root / state_->files[static_cast<std::size_t>(id - 1)];
}

CheckpointStore::Handle CheckpointStore::acquire(int id) const {
  const auto path = file_path(id);
  state_->inc("checkpoint");
  try {
    auto [map, params] = read_checkpoint(path);
    if (!(map == state_->lmap))
      throw ShapeError("layer map changed on disk: " + path.string());
    return Handle(new ParamVector(std::move(params)), CountedDeleter{state_});
  } catch (...) {
    state_->dec();
    throw;
  }
}

CheckpointStore::Handle CheckpointStore::acquire_diff(int id,
                                                      const ParamVector& center) const {
  if (center.size() != state_->lmap.total_len)
    throw ShapeError("center length does not match layer map");
  const auto path = file_path(id);
  state_->inc("checkpoint");
  try {
    auto [map, params] = read_checkpoint(path);
    if (!(map == state_->lmap))
      throw ShapeError("layer map changed on disk: " + path.string());
    kernels::sub_inplace(params.data(), center.data(), params.size());
    return Handle(new ParamVector(std::move(params)), CountedDeleter{state_});
  } catch (...) {
    state_->dec();
    throw;
  }
}

std::vector<CheckpointStore::Handle> CheckpointStore::acquire_all(
    std::span<const int> ids, const ParamVector* center) const {
  std::vector<Handle> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(center ? acquire_diff(id, *center) : acquire(id));
  return out;
}

CheckpointStore::Lease::~Lease() { release(); }
CheckpointStore::Lease::Lease(Lease&& other) noexcept : state_(std::move(other.state_)) {
  other.state_.reset();
}
CheckpointStore::Lease& CheckpointStore::Lease::operator=(Lease&& other) noexcept {
  if (this != &other) {
    release();
    state_ = std::move(other.state_);
    other.state_.reset();
  }
  return *this;
}
void CheckpointStore::Lease::release() {
  if (state_) {
    state_->dec();
    state_.reset();
  }
}

CheckpointStore::Lease CheckpointStore::stage(std::string tag) const {
  state_->inc(tag.c_str());
  return Lease(state_);
}

ParamVector CheckpointStore::mean_vector() const {
  std::vector<int> ids(static_cast<std::size_t>(count()));
  for (int i = 0; i < count(); ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  return mean_vector(ids);
}

ParamVector CheckpointStore::mean_vector(std::span<const int> ids) const {
  if (ids.empty()) throw ShapeError("mean over zero checkpoints");
  Lease acc_lease = stage("mean accumulator");
  ParamVector acc(state_->lmap.total_len, 0.0);
  double seen = 0.0;
  for (int id : ids) {
    Handle h = acquire(id);
    seen += 1.0;
    kernels::mean_update(acc.data(), h->data(), seen, acc.size());
  }
  if (!all_finite(acc)) throw Error("mean produced non-finite values");
  return acc;
}

void CheckpointStore::set_ceiling(int max_resident) const {
  std::lock_guard<std::mutex> lock(state_->mu);
  state_->ceil = max_resident;
}
int CheckpointStore::ceiling() const {
  std::lock_guard<std::mutex> lock(state_->mu);
  return state_->ceil;
}
int CheckpointStore::resident() const {
  std::lock_guard<std::mutex> lock(state_->mu);
  return state_->resident;
}
int CheckpointStore::peak_resident() const {
  std::lock_guard<std::mutex> lock(state_->mu);
  return state_->peak;
}
void CheckpointStore::reset_peak() const {
  std::lock_guard<std::mutex> lock(state_->mu);
  state_->peak = state_->resident;
}

CheckpointStore CheckpointStore::subset(std::span<const int> ids) const {
  auto sub = std::make_shared<StoreState>();
  sub->root = state_->root;
  sub->lmap = state_->lmap;
  for (int id : ids) {
    if (id < 1 || id > count())
      throw NotFoundError("unknown checkpoint id " + std::to_string(id));
    sub->files.push_back(state_->files[static_cast<std::size_t>(id - 1)]);
  }
  if (sub->files.empty()) throw ConfigError("subset selects no checkpoints");
  CheckpointStore s;
  s.state_ = std::move(sub);
  return s;
}

ScopedCeiling::ScopedCeiling(const CheckpointStore& store, int ceiling)
    : store_(store), previous_(store.ceiling()) {
  if (previous_ == 0 || ceiling < previous_) store_.set_ceiling(ceiling);
}

ScopedCeiling::~ScopedCeiling() { store_.set_ceiling(previous_); }

}  // namespace soupforge
