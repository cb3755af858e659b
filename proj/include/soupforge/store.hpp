#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "soupforge/params.hpp"

namespace soupforge {

// Disk-backed collection of K checkpoints sharing one LayerMap (validated
// when the manifest is opened). Checkpoint ids are 1..K in manifest order.
//
// Residency accounting: every full-size vector that is alive because of the
// store is counted -- acquired checkpoints, the accumulator inside
// mean_vector, and any staging buffer a training loop registers via stage()
// (soup, mean, frozen part). Transient work buffers inside a single forward
// or backward call are not parameter storage and are not counted. An
// optional ceiling turns over-residency into a BudgetError at acquire time.
class CheckpointStore {
 public:
  CheckpointStore() = default;

  // Manifest: one checkpoint filename per line, UTF-8, LF-terminated;
  // paths are relative to the manifest's directory.
  static CheckpointStore open(const std::filesystem::path& manifest_path);

  int count() const;  // K
  const LayerMap& layer_map() const;
  std::filesystem::path root() const;
  std::filesystem::path file_path(int id) const;  // 1-based id

  // Read-only view of a loaded vector; residency drops when the last copy
  // of the handle is destroyed. The store must outlive its handles.
  using Handle = std::shared_ptr<const ParamVector>;

  Handle acquire(int id) const;
  // Loaded checkpoint minus `center` (formed in place during the load, so
  // only one counted vector exists for the handle).
  Handle acquire_diff(int id, const ParamVector& center) const;
  std::vector<Handle> acquire_all(std::span<const int> ids,
                                  const ParamVector* center = nullptr) const;

  // Counts one externally owned full-size buffer against the budget.
  class Lease {
   public:
    Lease() = default;
    ~Lease();
    Lease(Lease&&) noexcept;
    Lease& operator=(Lease&&) noexcept;
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    void release();

   private:
    friend class CheckpointStore;
    explicit Lease(std::shared_ptr<struct StoreState> s) : state_(std::move(s)) {}
    std::shared_ptr<struct StoreState> state_;
  };
  Lease stage(std::string tag) const;

  // Streaming mean over the given ids (default: whole manifest). At most
  // two counted vectors are alive at any point during the pass.
  ParamVector mean_vector() const;
  ParamVector mean_vector(std::span<const int> ids) const;

  void set_ceiling(int max_resident) const;  // 0 = unlimited
  int ceiling() const;
  int resident() const;
  int peak_resident() const;
  void reset_peak() const;

  // New store over a subset of the manifest (fresh counters, same files).
  // Ids in the subset are renumbered 1..n in the given order.
  CheckpointStore subset(std::span<const int> ids) const;

 private:
  std::shared_ptr<struct StoreState> state_;
};

// Tightens the ceiling for a scope; restores the previous value on exit.
// Only ever lowers it: an existing stricter ceiling stays in force.
class ScopedCeiling {
 public:
  ScopedCeiling(const CheckpointStore& store, int ceiling);
  ~ScopedCeiling();
  ScopedCeiling(const ScopedCeiling&) = delete;
  ScopedCeiling& operator=(const ScopedCeiling&) = delete;

 private:
  const CheckpointStore& store_;
  int previous_;
};

}  // namespace soupforge
