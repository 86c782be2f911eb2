// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgaslab/sim/engine.hpp"
#include "pgaslab/sim/task.hpp"

namespace pgaslab::fabric {

using Rank = std::int32_t;
using Bytes = std::vector<std::byte>;
using sim::Duration;

// Locator of `width` bytes at `offset` in `rank`'s shared segment. Atomics
// need width 4 or 8 and a naturally aligned offset.
struct GlobalAddress {
  Rank rank = 0;
  std::uint64_t offset = 0;
  std::uint32_t width = 8;

  GlobalAddress operator+(std::uint64_t delta) const noexcept { return {rank, offset + delta, width}; }
  friend bool operator==(const GlobalAddress&, const GlobalAddress&) = default;
};

std::string to_string(const GlobalAddress& a);

enum class FaoOp { add, bit_and, bit_or, bit_xor };

// `old op operand`, truncated to `width` bytes.
std::uint64_t apply_fao(FaoOp op, std::uint64_t old, std::uint64_t operand, std::uint32_t width) noexcept;

struct CasPersistentResult {
  std::uint64_t attempts = 0;
};

// Per-rank count of issued one-sided operations.
struct OpCounts {
  std::uint64_t puts = 0;
  std::uint64_t gets = 0;
  std::uint64_t cas = 0;
  std::uint64_t fao = 0;
  std::uint64_t barriers = 0;
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

// PGAS surface shared by the simulated and the thread backends. Every rank
// owns a zero-initialised segment of segment_bytes(); words are stored
// little-endian. Fabric atomics are atomic only with respect to other fabric
// atomics: code must not touch segment words with raw local stores while
// remote atomics on them may be in flight.
class Fabric {
 public:
  virtual ~Fabric() = default;

  virtual int size() const noexcept = 0;
  virtual std::size_t segment_bytes() const noexcept = 0;
  // True when operations advance virtual time (sim backend).
  virtual bool timed() const noexcept = 0;

  virtual Task<void> rput(Rank self, GlobalAddress dst, std::span<const std::byte> data) = 0;
  virtual Task<Bytes> rget(Rank self, GlobalAddress src, std::size_t length) = 0;
  // Returns the prior value; stores `desired` if it equalled `expected`.
  virtual Task<std::uint64_t> cas(Rank self, GlobalAddress addr, std::uint64_t expected, std::uint64_t desired) = 0;
  // Returns the prior value.
  virtual Task<std::uint64_t> fao(Rank self, GlobalAddress addr, FaoOp op, std::uint64_t operand) = 0;
  // Collective. Deadlocks if not every rank calls it.
  virtual Task<void> barrier(Rank self) = 0;

  // `count` host-local operations at ℓ each (no-op on untimed backends).
  virtual Task<void> local_work(Rank self, std::size_t count) = 0;
  // Retry backoff: sleeps in the simulator, yields the thread otherwise.
  virtual Task<void> backoff(Rank self, Duration d) = 0;
  virtual Duration cost_of_fao() const noexcept = 0;

  // Untimed owner-side access to a segment. Same word-granular atomicity as
  // rput/rget on the thread backend.
  virtual void local_write(Rank owner, std::uint64_t offset, std::span<const std::byte> data) = 0;
  virtual void local_read(Rank owner, std::uint64_t offset, std::span<std::byte> out) const = 0;

  // Runs `program` once per rank to completion (SPMD), rethrowing the first
  // exception. `program` must outlive the call.
  virtual void run_spmd(const std::function<Task<void>(Rank)>& program) = 0;

  virtual OpCounts counts(Rank r) const = 0;

  // cas() repeated until the returned value equals `expected`. Each attempt
  // is a full CAS round trip. Throws LivelockError past `max_attempts`.
  Task<CasPersistentResult> cas_persistent(Rank self, GlobalAddress addr, std::uint64_t expected,
                                           std::uint64_t desired,
                                           std::optional<std::uint64_t> max_attempts = std::nullopt);

  // Symmetric bump allocation: the same offset is reserved on every rank.
  std::uint64_t allocate(std::size_t bytes, std::size_t alignment = 8);
  std::uint64_t allocated_bytes() const noexcept { return next_offset_; }

  std::uint64_t local_load(Rank owner, std::uint64_t offset, std::uint32_t width = 8) const;
  void local_store(Rank owner, std::uint64_t offset, std::uint64_t value, std::uint32_t width = 8);

 protected:
  void check_rank(Rank r) const;
  void check_range(const GlobalAddress& a, std::size_t length) const;
  void check_atomic(const GlobalAddress& a) const;

 private:
  std::uint64_t next_offset_ = 0;
};

}  // namespace pgaslab::fabric
