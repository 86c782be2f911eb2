// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <coroutine>
#include <vector>

#include "pgaslab/fabric/fabric.hpp"
#include "pgaslab/sim/latency.hpp"

namespace pgaslab::fabric {

// Fabric over the discrete-event engine. Every one-sided operation completes
// at issue time + its sampled component cost (+ hot-spot delay for atomics);
// its effect on the target segment is applied at that same instant.
class SimFabric final : public Fabric {
 public:
  SimFabric(sim::Engine& engine, sim::LatencyConfig config, int ranks, std::size_t segment_bytes);

  int size() const noexcept override { return static_cast<int>(segments_.size()); }
  std::size_t segment_bytes() const noexcept override { return segment_bytes_; }
  bool timed() const noexcept override { return true; }

  Task<void> rput(Rank self, GlobalAddress dst, std::span<const std::byte> data) override;
  Task<Bytes> rget(Rank self, GlobalAddress src, std::size_t length) override;
  Task<std::uint64_t> cas(Rank self, GlobalAddress addr, std::uint64_t expected, std::uint64_t desired) override;
  Task<std::uint64_t> fao(Rank self, GlobalAddress addr, FaoOp op, std::uint64_t operand) override;
  Task<void> barrier(Rank self) override;
  Task<void> local_work(Rank self, std::size_t count) override;
  Task<void> backoff(Rank self, Duration d) override;
  Duration cost_of_fao() const noexcept override { return config_.fao; }

  void local_write(Rank owner, std::uint64_t offset, std::span<const std::byte> data) override;
  void local_read(Rank owner, std::uint64_t offset, std::span<std::byte> out) const override;

  void run_spmd(const std::function<Task<void>(Rank)>& program) override;
  OpCounts counts(Rank r) const override { return counts_.at(static_cast<std::size_t>(r)); }

  sim::Engine& engine() noexcept { return engine_; }
  const sim::LatencyConfig& config() const noexcept { return config_; }
  sim::HotspotTracker& hotspot() noexcept { return hotspot_; }

 private:
  Duration atomic_cost(const GlobalAddress& addr, sim::Component c);
  std::uint64_t read_word(const GlobalAddress& a) const;
  void write_word(const GlobalAddress& a, std::uint64_t v);

  struct BarrierEpoch {
    int arrived = 0;
    std::vector<std::coroutine_handle<>> waiting;
  };

  sim::Engine& engine_;
  sim::LatencyConfig config_;
  std::size_t segment_bytes_;
  std::vector<Bytes> segments_;
  std::vector<OpCounts> counts_;
  sim::HotspotTracker hotspot_;
  BarrierEpoch barrier_;
};

}  // namespace pgaslab::fabric
