// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <barrier>
#include <memory>
#include <vector>

#include "pgaslab/fabric/fabric.hpp"

namespace pgaslab::fabric {

// Fabric over one OS thread per rank and shared memory. Atomics are seq_cst
// std::atomic_ref operations on the target word. rput/rget copy aligned
// 8-byte words with release stores / acquire loads, so a reader can see a
// torn transfer across words but never a torn word. No virtual time: every
// operation completes before its co_await returns.
class ThreadFabric final : public Fabric {
 public:
  ThreadFabric(int ranks, std::size_t segment_bytes);

  int size() const noexcept override { return ranks_; }
  std::size_t segment_bytes() const noexcept override { return segment_bytes_; }
  bool timed() const noexcept override { return false; }

  Task<void> rput(Rank self, GlobalAddress dst, std::span<const std::byte> data) override;
  Task<Bytes> rget(Rank self, GlobalAddress src, std::size_t length) override;
  Task<std::uint64_t> cas(Rank self, GlobalAddress addr, std::uint64_t expected, std::uint64_t desired) override;
  Task<std::uint64_t> fao(Rank self, GlobalAddress addr, FaoOp op, std::uint64_t operand) override;
  Task<void> barrier(Rank self) override;
  Task<void> local_work(Rank self, std::size_t count) override;
  Task<void> backoff(Rank self, Duration d) override;
  Duration cost_of_fao() const noexcept override { return Duration{0}; }

  void local_write(Rank owner, std::uint64_t offset, std::span<const std::byte> data) override;
  void local_read(Rank owner, std::uint64_t offset, std::span<std::byte> out) const override;

  void run_spmd(const std::function<Task<void>(Rank)>& program) override;
  OpCounts counts(Rank r) const override;

 private:
  std::byte* base(Rank r) const noexcept { return reinterpret_cast<std::byte*>(segments_[static_cast<std::size_t>(r)].get()); }

  struct alignas(64) PaddedCounts {
    OpCounts counts;
  };

  int ranks_;
  std::size_t segment_bytes_;
  std::vector<std::unique_ptr<std::uint64_t[]>> segments_;
  std::vector<PaddedCounts> counts_;
  std::barrier<> barrier_;
};

}  // namespace pgaslab::fabric
