// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pgaslab/am/am.hpp"
#include "pgaslab/ds/hash_table.hpp"
#include "pgaslab/ds/queue.hpp"

namespace pgaslab::ds {

// Hash table operated through active messages: the origin hashes the key to
// the owning rank and ships the operation there; the handler probes the
// owner's local block at ℓ per probe beyond the first (the first probe is
// the handler's base cost) and replies. Each rank's block is probed
// linearly within itself.
class AmHashTable {
 public:
  AmHashTable(am::AmEngine& am, HashTableConfig config);

  am::Ticket insert_async(Rank self, std::span<const std::byte> key, std::span<const std::byte> value);
  am::Ticket find_async(Rank self, std::span<const std::byte> key);
  // Decoders for completed tickets.
  static bool insert_succeeded(const am::Ticket& t);
  static std::optional<Bytes> found_value(const am::Ticket& t);

  Task<bool> insert(Rank self, std::span<const std::byte> key, std::span<const std::byte> value);
  Task<std::optional<Bytes>> find(Rank self, std::span<const std::byte> key);

  Rank owner(std::span<const std::byte> key) const noexcept;
  std::uint64_t buckets_per_rank() const noexcept { return per_rank_; }
  // Occupied buckets on `r`.
  std::uint64_t occupancy(Rank r) const;
  // Untimed owner-side lookup, for post-hoc checks.
  std::optional<Bytes> peek(std::span<const std::byte> key) const;
  // Empties `r`'s block. Only while no request is in flight.
  void clear(Rank r);

 private:
  struct Local {
    std::vector<std::uint8_t> used;
    std::vector<std::byte> keys;
    std::vector<std::byte> values;
  };

  void handle_insert(am::HandlerContext& ctx);
  void handle_find(am::HandlerContext& ctx);

  am::AmEngine& am_;
  HashTableConfig config_;
  std::uint64_t per_rank_;
  std::vector<Local> locals_;
  am::HandlerId insert_id_;
  am::HandlerId find_id_;
};

// Queue hosted on one rank and pushed/popped through active messages; the
// handler uses the host-local path at ℓ per item beyond the first.
class AmQueue {
 public:
  AmQueue(am::AmEngine& am, HostedQueue& queue);

  am::Ticket push_async(Rank self, std::span<const std::byte> items);
  am::Ticket pop_async(Rank self, std::size_t n);
  static bool push_succeeded(const am::Ticket& t);
  static std::optional<Bytes> popped_items(const am::Ticket& t);

  Task<bool> push(Rank self, std::span<const std::byte> items);
  Task<std::optional<Bytes>> pop(Rank self, std::size_t n);

  HostedQueue& queue() noexcept { return queue_; }

 private:
  am::AmEngine& am_;
  HostedQueue& queue_;
  am::HandlerId push_id_;
  am::HandlerId pop_id_;
};

}  // namespace pgaslab::ds
