// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pgaslab/ds/concurrency.hpp"
#include "pgaslab/fabric/fabric.hpp"

namespace pgaslab::ds {

using fabric::Bytes;
using fabric::GlobalAddress;
using fabric::Rank;

// 64-bit mix of a slot payload salted with the slot's unbounded index, so a
// payload left over from an earlier pass around the ring never validates.
std::uint64_t slot_checksum(std::span<const std::byte> payload, std::uint64_t index) noexcept;

struct QueueConfig {
  Rank host = 0;
  std::uint64_t capacity = 1024;  // C slots
  std::size_t slot_bytes = 8;     // payload bytes per slot
  // Each slot carries a trailing checksum word; use push_checksum/pop_checksum.
  bool checksummed = false;
};

// Unbounded counters (slot index = counter mod C).
struct QueueCounters {
  std::uint64_t tail = 0;        // push reservations
  std::uint64_t tail_ready = 0;  // readable frontier
  std::uint64_t head = 0;        // pop reservations
  std::uint64_t head_ready = 0;  // reclaimed frontier
  friend bool operator==(const QueueCounters&, const QueueCounters&) = default;
};

struct PushResult {
  bool success = false;
  std::uint64_t reservation = 0;  // first slot index reserved
  std::uint64_t commit_attempts = 0;
};

struct PopResult {
  std::optional<Bytes> items;  // n * slot_bytes on success
  std::uint64_t reservation = 0;
  std::uint64_t commit_attempts = 0;
  std::uint64_t read_retries = 0;  // checksum mismatches re-read
};

// Circular queue hosted in one rank's segment and operated on by every rank.
//
// Pushes reserve with fao(tail, +n) and pops with fao(head, +n). The fullness
// check uses a per-rank cached head_ready and the emptiness checks a cached
// tail_ready (CRW) or tail (CR); a cache is refreshed with one get only when
// its check fails. A reservation that still does not fit is withdrawn with
// cas(counter, old + n -> old); if a later reservation sits on top, the rank
// re-checks the frontier and either proceeds or keeps trying to withdraw.
//
// phase_barrier() is the collective phase separator: it publishes the
// phasal operations (tail_ready := tail, head_ready := head on the host) and
// refreshes every rank's caches.
class HostedQueue {
 public:
  HostedQueue(fabric::Fabric& fabric, QueueConfig config);

  // CW: reserve, put. CRW: reserve, put, cas_persistent(tail_ready, old -> old+n).
  // CLOCAL: host only, local stores at ℓ per item. `items` holds n slots.
  Task<PushResult> push(Rank self, std::span<const std::byte> items, ConcurrencyLevel level);
  // CR: reserve, get. CRW: reserve, get, cas_persistent(head_ready, old -> old+n).
  // CLOCAL: host only.
  Task<PopResult> pop(Rank self, std::size_t n, ConcurrencyLevel level);

  // Checksummed layout, CRW phases: reserve, one put of payload + checksum
  // per slot, no commit AMO.
  Task<PushResult> push_checksum(Rank self, std::span<const std::byte> items);
  // Reserve against tail, get, re-read until every slot's checksum
  // validates, then cas_persistent(head_ready, old -> old+n).
  Task<PopResult> pop_checksum(Rank self, std::size_t n);

  Task<void> phase_barrier(Rank self);

  // Untimed host-side operations used by active-message handlers. Only valid
  // on the host rank, and only while no fabric operation targets the queue.
  bool host_push(std::span<const std::byte> items);
  std::optional<Bytes> host_pop(std::size_t n);

  QueueCounters counters() const;
  const QueueConfig& config() const noexcept { return config_; }
  std::size_t stored_slot_bytes() const noexcept { return stride_; }

 private:
  struct alignas(64) Cache {
    std::uint64_t head_ready = 0;
    std::uint64_t tail_ready = 0;
    std::uint64_t tail = 0;
  };

  GlobalAddress word(std::size_t i) const noexcept { return {config_.host, control_ + 8 * i, 8}; }
  GlobalAddress tail_addr() const noexcept { return word(0); }
  GlobalAddress tail_ready_addr() const noexcept { return word(1); }
  GlobalAddress head_addr() const noexcept { return word(2); }
  GlobalAddress head_ready_addr() const noexcept { return word(3); }

  // Counter a reservation is checked against.
  enum class Frontier { head_ready, tail_ready, tail };

  std::size_t slot_count(std::span<const std::byte> items) const;
  bool fits(Rank self, Frontier f, std::uint64_t old, std::uint64_t n) const;
  Task<void> refresh(Rank self, Frontier f);
  // Makes [old, old+n) on `ctr` valid against `f`, refreshing once, or
  // withdraws it. Returns false if the reservation was withdrawn.
  Task<bool> settle(Rank self, GlobalAddress ctr, Frontier f, std::uint64_t old, std::uint64_t n);
  Task<void> write_slots(Rank self, std::uint64_t first, std::span<const std::byte> stored);
  Task<Bytes> read_slots(Rank self, std::uint64_t first, std::size_t n);
  Bytes with_checksums(std::span<const std::byte> items, std::uint64_t first) const;
  void check_local(Rank self) const;

  fabric::Fabric& fabric_;
  QueueConfig config_;
  std::size_t stride_;
  std::uint64_t control_;
  std::uint64_t ring_;
  std::vector<Cache> caches_;
};

}  // namespace pgaslab::ds
