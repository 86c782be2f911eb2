// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/ds/hash_table.hpp"

#include <algorithm>
#include <cstring>

#include "pgaslab/error.hpp"

namespace pgaslab::ds {

namespace {

constexpr std::size_t round8(std::size_t n) noexcept { return (n + 7) & ~std::size_t{7}; }

std::uint32_t flag_of(std::span<const std::byte> bucket) noexcept {
  std::uint32_t f = 0;
  std::memcpy(&f, bucket.data(), sizeof f);
  return f;
}

}  // namespace

std::uint64_t hash_key(std::span<const std::byte> key) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : key) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

BucketLayout BucketLayout::for_sizes(std::size_t key_bytes, std::size_t value_bytes) noexcept {
  BucketLayout l;
  l.value_offset = l.key_offset + round8(key_bytes);
  l.stride = l.value_offset + round8(value_bytes);
  return l;
}

HashTable::HashTable(fabric::Fabric& fabric, HashTableConfig config)
    : fabric_(fabric), config_(config), layout_(BucketLayout::for_sizes(config.key_bytes, config.value_bytes)) {
  if (config_.buckets == 0) throw ArgumentError("hash table needs at least one bucket");
  if (config_.key_bytes == 0) throw ArgumentError("hash table keys must be at least one byte");
  const auto ranks = static_cast<std::uint64_t>(fabric_.size());
  per_rank_ = (config_.buckets + ranks - 1) / ranks;
  base_ = fabric_.allocate(per_rank_ * layout_.stride, 8);
}

GlobalAddress HashTable::flag_address(std::uint64_t bucket) const noexcept {
  return {owner(bucket), base_ + (bucket % per_rank_) * layout_.stride, 4};
}

void HashTable::check_sizes(std::span<const std::byte> key, std::span<const std::byte> value) const {
  if (key.size() != config_.key_bytes) {
    throw ArgumentError("key of " + std::to_string(key.size()) + " bytes, table expects " + std::to_string(config_.key_bytes));
  }
  if (value.size() != config_.value_bytes) {
    throw ArgumentError("value of " + std::to_string(value.size()) + " bytes, table expects " +
                        std::to_string(config_.value_bytes));
  }
}

bool HashTable::key_matches(std::span<const std::byte> bucket_bytes, std::span<const std::byte> key) const {
  return std::equal(key.begin(), key.end(), bucket_bytes.begin() + static_cast<std::ptrdiff_t>(layout_.key_offset));
}

Task<InsertResult> HashTable::insert(Rank self, std::span<const std::byte> key, std::span<const std::byte> value,
                                     ConcurrencyLevel level) {
  check_sizes(key, value);
  if (level != ConcurrencyLevel::CRW && level != ConcurrencyLevel::CW) {
    throw ConcurrencyError("hash insert implements CRW and CW, not " + std::string(to_string(level)));
  }
  const bool crw = level == ConcurrencyLevel::CRW;
  const std::uint32_t claim = crw ? flag_reserved : flag_ready;

  Bytes body(layout_.stride - layout_.key_offset);
  std::copy(key.begin(), key.end(), body.begin());
  std::copy(value.begin(), value.end(), body.begin() + static_cast<std::ptrdiff_t>(layout_.value_offset - layout_.key_offset));

  InsertResult result;
  const std::uint64_t home = home_bucket(key);
  for (std::uint64_t i = 0; i < config_.buckets; ++i) {
    const std::uint64_t bucket = (home + i) % config_.buckets;
    const GlobalAddress flag = flag_address(bucket);
    ++result.probes;
    for (;;) {
      ++result.attempts;
      const auto old = static_cast<std::uint32_t>(co_await fabric_.cas(self, flag, flag_free, claim));
      if (old == flag_free) {
        co_await fabric_.rput(self, flag + layout_.key_offset, body);
        if (crw) (void)co_await fabric_.fao(self, flag, fabric::FaoOp::bit_and, ~std::uint64_t{0b10});
        result.success = true;
        result.bucket = bucket;
        co_return result;
      }
      // A reader's transient bit on a FREE bucket: the bucket is still free.
      if ((old & flag_state_mask) == flag_free) {
        co_await fabric_.backoff(self, sim::Duration{0});
        continue;
      }
      break;
    }
  }
  co_return result;
}

Task<FindResult> HashTable::find(Rank self, std::span<const std::byte> key, ConcurrencyLevel level) {
  if (key.size() != config_.key_bytes) {
    throw ArgumentError("key of " + std::to_string(key.size()) + " bytes, table expects " + std::to_string(config_.key_bytes));
  }
  if (level != ConcurrencyLevel::CRW && level != ConcurrencyLevel::CR) {
    throw ConcurrencyError("hash find implements CRW and CR, not " + std::string(to_string(level)));
  }
  FindResult result;
  const std::uint64_t home = home_bucket(key);
  int bit = first_reader_bit + static_cast<int>(static_cast<std::uint32_t>(self) % reader_bits);

  for (std::uint64_t i = 0; i < config_.buckets; ++i) {
    const std::uint64_t bucket = (home + i) % config_.buckets;
    const GlobalAddress flag = flag_address(bucket);
    ++result.probes;

    if (level == ConcurrencyLevel::CR) {
      const Bytes b = co_await fabric_.rget(self, flag, layout_.stride);
      const std::uint32_t state = flag_of(b) & flag_state_mask;
      if (state == flag_free) co_return result;
      if (state == flag_ready && key_matches(b, key)) {
        const auto v = b.begin() + static_cast<std::ptrdiff_t>(layout_.value_offset);
        result.value.emplace(v, v + static_cast<std::ptrdiff_t>(config_.value_bytes));
        co_return result;
      }
      continue;
    }

    for (;;) {
      const std::uint64_t mine = std::uint64_t{1} << bit;
      const auto old = static_cast<std::uint32_t>(co_await fabric_.fao(self, flag, fabric::FaoOp::bit_or, mine));
      if (old & mine) {
        // Another reader holds this bit; it is theirs to clear.
        ++result.attempts;
        bit = first_reader_bit + (bit - first_reader_bit + 1) % reader_bits;
        continue;
      }
      const std::uint32_t state = old & flag_state_mask;
      if (state != flag_ready) {
        (void)co_await fabric_.fao(self, flag, fabric::FaoOp::bit_and, ~mine);
        if (state == flag_free) co_return result;
        ++result.attempts;
        co_await fabric_.backoff(self, fabric_.cost_of_fao());
        continue;
      }
      const Bytes b = co_await fabric_.rget(self, flag + layout_.key_offset, layout_.stride - layout_.key_offset);
      (void)co_await fabric_.fao(self, flag, fabric::FaoOp::bit_and, ~mine);
      if (std::equal(key.begin(), key.end(), b.begin())) {
        const auto v = b.begin() + static_cast<std::ptrdiff_t>(layout_.value_offset - layout_.key_offset);
        result.value.emplace(v, v + static_cast<std::ptrdiff_t>(config_.value_bytes));
        co_return result;
      }
      break;
    }
  }
  co_return result;
}

std::uint32_t HashTable::peek_flag(std::uint64_t bucket) const {
  const auto a = flag_address(bucket);
  return static_cast<std::uint32_t>(fabric_.local_load(a.rank, a.offset, 4));
}

Bytes HashTable::peek_key(std::uint64_t bucket) const {
  const auto a = flag_address(bucket);
  Bytes out(config_.key_bytes);
  fabric_.local_read(a.rank, a.offset + layout_.key_offset, out);
  return out;
}

Bytes HashTable::peek_value(std::uint64_t bucket) const {
  const auto a = flag_address(bucket);
  Bytes out(config_.value_bytes);
  fabric_.local_read(a.rank, a.offset + layout_.value_offset, out);
  return out;
}

void HashTable::clear(Rank owner) {
  const std::uint64_t first = static_cast<std::uint64_t>(owner) * per_rank_;
  if (first >= config_.buckets) return;
  const std::uint64_t count = std::min(per_rank_, config_.buckets - first);
  const Bytes zeros(count * layout_.stride);
  fabric_.local_write(owner, base_, zeros);
}

}  // namespace pgaslab::ds
