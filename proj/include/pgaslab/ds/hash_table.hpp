// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "pgaslab/ds/concurrency.hpp"
#include "pgaslab/fabric/fabric.hpp"

namespace pgaslab::ds {

using fabric::Bytes;
using fabric::GlobalAddress;
using fabric::Rank;

// Low two flag bits. Bits 2..31 are reader bits.
inline constexpr std::uint32_t flag_free = 0b00;
inline constexpr std::uint32_t flag_reserved = 0b11;
inline constexpr std::uint32_t flag_ready = 0b01;
inline constexpr std::uint32_t flag_state_mask = 0b11;
inline constexpr int first_reader_bit = 2;
inline constexpr int reader_bits = 30;

// FNV-1a 64 over the key bytes.
std::uint64_t hash_key(std::span<const std::byte> key) noexcept;

struct HashTableConfig {
  std::uint64_t buckets = 1024;  // N, total across ranks
  std::size_t key_bytes = 8;
  std::size_t value_bytes = 8;
};

// Bucket wire layout, contiguous in the owner's segment:
//   +0  flag (32-bit), +4 padding, +8 key, then value; each field padded to 8.
struct BucketLayout {
  std::size_t key_offset = 8;
  std::size_t value_offset = 0;
  std::size_t stride = 0;

  static BucketLayout for_sizes(std::size_t key_bytes, std::size_t value_bytes) noexcept;
};

struct InsertResult {
  bool success = false;
  std::uint32_t probes = 0;    // buckets visited
  std::uint32_t attempts = 0;  // reservation CASes issued
  std::uint64_t bucket = 0;    // slot written on success
};

struct FindResult {
  std::optional<Bytes> value;
  std::uint32_t probes = 0;
  std::uint32_t attempts = 0;  // flag AMOs that had to be repeated (RESERVED, reader-bit collision)
};

// Open-addressing hash table with linear probing over N buckets distributed
// block-wise (B = ceil(N / P) per rank). Bucket i lives on rank i / B.
// Duplicate inserts of one key occupy distinct buckets; find returns the
// first in probe order. No deletion.
class HashTable {
 public:
  HashTable(fabric::Fabric& fabric, HashTableConfig config);

  // CW: cas(flag, FREE -> READY) then one put of key and value.
  // CRW: cas(flag, FREE -> RESERVED), put, fao(AND, ~0b10) to publish.
  // Returns success = false after N failed probes (table full).
  Task<InsertResult> insert(Rank self, std::span<const std::byte> key, std::span<const std::byte> value,
                            ConcurrencyLevel level);
  // CR: one get of the whole bucket per probe.
  // CRW: fao(OR, reader bit), get key and value, fao(AND, ~reader bit).
  Task<FindResult> find(Rank self, std::span<const std::byte> key, ConcurrencyLevel level);

  std::uint64_t buckets() const noexcept { return config_.buckets; }
  std::uint64_t buckets_per_rank() const noexcept { return per_rank_; }
  const HashTableConfig& config() const noexcept { return config_; }
  const BucketLayout& layout() const noexcept { return layout_; }

  std::uint64_t home_bucket(std::span<const std::byte> key) const noexcept { return hash_key(key) % config_.buckets; }
  Rank owner(std::uint64_t bucket) const noexcept { return static_cast<Rank>(bucket / per_rank_); }
  GlobalAddress flag_address(std::uint64_t bucket) const noexcept;

  // Untimed owner-side inspection, for post-hoc checks.
  std::uint32_t peek_flag(std::uint64_t bucket) const;
  Bytes peek_key(std::uint64_t bucket) const;
  Bytes peek_value(std::uint64_t bucket) const;
  // Untimed owner-side reset of `owner`'s block to FREE. Only between
  // barriers, with no operation in flight.
  void clear(Rank owner);

 private:
  void check_sizes(std::span<const std::byte> key, std::span<const std::byte> value) const;
  bool key_matches(std::span<const std::byte> bucket_bytes, std::span<const std::byte> key) const;

  fabric::Fabric& fabric_;
  HashTableConfig config_;
  BucketLayout layout_;
  std::uint64_t per_rank_;
  std::uint64_t base_;
};

}  // namespace pgaslab::ds
