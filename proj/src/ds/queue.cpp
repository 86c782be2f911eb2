// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/ds/queue.hpp"

#include <algorithm>
#include <cstring>

#include "pgaslab/error.hpp"

namespace pgaslab::ds {

namespace {

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t word_at(std::span<const std::byte> b, std::size_t offset) noexcept {
  std::uint64_t v = 0;
  std::memcpy(&v, b.data() + offset, 8);
  return v;
}

}  // namespace

std::uint64_t slot_checksum(std::span<const std::byte> payload, std::uint64_t index) noexcept {
  std::uint64_t h = mix64(index ^ 0xA0761D6478BD642FULL);
  for (std::size_t i = 0; i < payload.size(); i += 8) {
    std::uint64_t chunk = 0;
    std::memcpy(&chunk, payload.data() + i, std::min<std::size_t>(8, payload.size() - i));
    h = mix64(h ^ chunk);
  }
  return mix64(h ^ payload.size());
}

HostedQueue::HostedQueue(fabric::Fabric& fabric, QueueConfig config)
    : fabric_(fabric), config_(config), stride_(config.slot_bytes + (config.checksummed ? 8 : 0)),
      caches_(static_cast<std::size_t>(fabric.size())) {
  if (config_.capacity == 0) throw ArgumentError("queue capacity must be positive");
  if (config_.slot_bytes == 0) throw ArgumentError("queue slots must be at least one byte");
  if (config_.checksummed && config_.slot_bytes % 8 != 0) {
    throw ArgumentError("checksummed queue slots must be a multiple of 8 bytes");
  }
  if (config_.host < 0 || config_.host >= fabric_.size()) throw AddressError("queue host outside the fabric");
  control_ = fabric_.allocate(32, 8);
  ring_ = fabric_.allocate(config_.capacity * stride_, 8);
}

std::size_t HostedQueue::slot_count(std::span<const std::byte> items) const {
  if (items.empty() || items.size() % config_.slot_bytes != 0) {
    throw ArgumentError("push of " + std::to_string(items.size()) + " bytes is not a positive multiple of the " +
                        std::to_string(config_.slot_bytes) + "-byte slot");
  }
  const std::size_t n = items.size() / config_.slot_bytes;
  if (n > config_.capacity) throw ArgumentError("push of " + std::to_string(n) + " slots exceeds capacity");
  return n;
}

void HostedQueue::check_local(Rank self) const {
  if (self != config_.host) {
    throw ConcurrencyError("CLOCAL queue operations are host-only (rank " + std::to_string(self) + ", host " +
                           std::to_string(config_.host) + ")");
  }
}

bool HostedQueue::fits(Rank self, Frontier f, std::uint64_t old, std::uint64_t n) const {
  const Cache& c = caches_[static_cast<std::size_t>(self)];
  switch (f) {
    case Frontier::head_ready: return old + n - c.head_ready <= config_.capacity;
    case Frontier::tail_ready: return old + n <= c.tail_ready;
    case Frontier::tail: return old + n <= c.tail;
  }
  return false;
}

Task<void> HostedQueue::refresh(Rank self, Frontier f) {
  Cache& c = caches_[static_cast<std::size_t>(self)];
  const GlobalAddress a = f == Frontier::head_ready ? head_ready_addr() : f == Frontier::tail_ready ? tail_ready_addr() : tail_addr();
  const Bytes b = co_await fabric_.rget(self, a, 8);
  const std::uint64_t v = word_at(b, 0);
  switch (f) {
    case Frontier::head_ready: c.head_ready = v; break;
    case Frontier::tail_ready: c.tail_ready = v; break;
    case Frontier::tail: c.tail = v; break;
  }
}

Task<bool> HostedQueue::settle(Rank self, GlobalAddress ctr, Frontier f, std::uint64_t old, std::uint64_t n) {
  if (fits(self, f, old, n)) co_return true;
  co_await refresh(self, f);
  while (!fits(self, f, old, n)) {
    // Only the topmost reservation can be withdrawn; a blind fetch-and-add
    // of -n would hand out slots twice when reservations interleave.
    const std::uint64_t seen = co_await fabric_.cas(self, ctr, old + n, old);
    if (seen == old + n) co_return false;
    co_await fabric_.backoff(self, fabric_.cost_of_fao());
    co_await refresh(self, f);
  }
  co_return true;
}

Task<void> HostedQueue::write_slots(Rank self, std::uint64_t first, std::span<const std::byte> stored) {
  const std::uint64_t n = stored.size() / stride_;
  const std::uint64_t pos = first % config_.capacity;
  const std::uint64_t head_part = std::min(n, config_.capacity - pos);
  co_await fabric_.rput(self, {config_.host, ring_ + pos * stride_}, stored.first(head_part * stride_));
  if (head_part < n) co_await fabric_.rput(self, {config_.host, ring_}, stored.subspan(head_part * stride_));
}

Task<Bytes> HostedQueue::read_slots(Rank self, std::uint64_t first, std::size_t n) {
  const std::uint64_t pos = first % config_.capacity;
  const std::uint64_t head_part = std::min<std::uint64_t>(n, config_.capacity - pos);
  Bytes out = co_await fabric_.rget(self, {config_.host, ring_ + pos * stride_}, head_part * stride_);
  if (head_part < n) {
    const Bytes rest = co_await fabric_.rget(self, {config_.host, ring_}, (n - head_part) * stride_);
    out.insert(out.end(), rest.begin(), rest.end());
  }
  co_return out;
}

Bytes HostedQueue::with_checksums(std::span<const std::byte> items, std::uint64_t first) const {
  const std::size_t n = items.size() / config_.slot_bytes;
  Bytes out(n * stride_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto payload = items.subspan(i * config_.slot_bytes, config_.slot_bytes);
    std::copy(payload.begin(), payload.end(), out.begin() + static_cast<std::ptrdiff_t>(i * stride_));
    const std::uint64_t sum = slot_checksum(payload, first + i);
    std::memcpy(out.data() + i * stride_ + config_.slot_bytes, &sum, 8);
  }
  return out;
}

Task<PushResult> HostedQueue::push(Rank self, std::span<const std::byte> items, ConcurrencyLevel level) {
  const std::size_t n = slot_count(items);
  if (config_.checksummed) throw ArgumentError("checksummed queue: use push_checksum");
  PushResult result;
  if (level == ConcurrencyLevel::CLOCAL) {
    check_local(self);
    co_await fabric_.local_work(self, n);
    result.success = host_push(items);
    co_return result;
  }
  if (level != ConcurrencyLevel::CRW && level != ConcurrencyLevel::CW) {
    throw ConcurrencyError("queue push implements CRW, CW and CLOCAL, not " + std::string(to_string(level)));
  }
  const std::uint64_t old = co_await fabric_.fao(self, tail_addr(), fabric::FaoOp::add, n);
  result.reservation = old;
  if (!co_await settle(self, tail_addr(), Frontier::head_ready, old, n)) co_return result;
  co_await write_slots(self, old, items);
  if (level == ConcurrencyLevel::CRW) {
    const auto commit = co_await fabric_.cas_persistent(self, tail_ready_addr(), old, old + n);
    result.commit_attempts = commit.attempts;
  }
  result.success = true;
  co_return result;
}

Task<PopResult> HostedQueue::pop(Rank self, std::size_t n, ConcurrencyLevel level) {
  if (n == 0 || n > config_.capacity) throw ArgumentError("pop of " + std::to_string(n) + " slots");
  if (config_.checksummed) throw ArgumentError("checksummed queue: use pop_checksum");
  PopResult result;
  if (level == ConcurrencyLevel::CLOCAL) {
    check_local(self);
    co_await fabric_.local_work(self, n);
    result.items = host_pop(n);
    co_return result;
  }
  if (level != ConcurrencyLevel::CRW && level != ConcurrencyLevel::CR) {
    throw ConcurrencyError("queue pop implements CRW, CR and CLOCAL, not " + std::string(to_string(level)));
  }
  const Frontier frontier = level == ConcurrencyLevel::CRW ? Frontier::tail_ready : Frontier::tail;
  const std::uint64_t old = co_await fabric_.fao(self, head_addr(), fabric::FaoOp::add, n);
  result.reservation = old;
  if (!co_await settle(self, head_addr(), frontier, old, n)) co_return result;
  Bytes items = co_await read_slots(self, old, n);
  if (level == ConcurrencyLevel::CRW) {
    const auto commit = co_await fabric_.cas_persistent(self, head_ready_addr(), old, old + n);
    result.commit_attempts = commit.attempts;
  }
  result.items = std::move(items);
  co_return result;
}

Task<PushResult> HostedQueue::push_checksum(Rank self, std::span<const std::byte> items) {
  const std::size_t n = slot_count(items);
  if (!config_.checksummed) throw ArgumentError("push_checksum needs a checksummed queue");
  PushResult result;
  const std::uint64_t old = co_await fabric_.fao(self, tail_addr(), fabric::FaoOp::add, n);
  result.reservation = old;
  if (!co_await settle(self, tail_addr(), Frontier::head_ready, old, n)) co_return result;
  const Bytes stored = with_checksums(items, old);
  co_await write_slots(self, old, stored);
  result.success = true;
  co_return result;
}

Task<PopResult> HostedQueue::pop_checksum(Rank self, std::size_t n) {
  if (n == 0 || n > config_.capacity) throw ArgumentError("pop of " + std::to_string(n) + " slots");
  if (!config_.checksummed) throw ArgumentError("pop_checksum needs a checksummed queue");
  PopResult result;
  const std::uint64_t old = co_await fabric_.fao(self, head_addr(), fabric::FaoOp::add, n);
  result.reservation = old;
  if (!co_await settle(self, head_addr(), Frontier::tail, old, n)) co_return result;
  Bytes items(n * config_.slot_bytes);
  for (;;) {
    const Bytes raw = co_await read_slots(self, old, n);
    bool valid = true;
    for (std::size_t i = 0; i < n && valid; ++i) {
      const auto payload = std::span(raw).subspan(i * stride_, config_.slot_bytes);
      valid = word_at(raw, i * stride_ + config_.slot_bytes) == slot_checksum(payload, old + i);
      std::copy(payload.begin(), payload.end(), items.begin() + static_cast<std::ptrdiff_t>(i * config_.slot_bytes));
    }
    if (valid) break;
    // The push owning these slots has not landed yet, or was withdrawn.
    ++result.read_retries;
    co_await refresh(self, Frontier::tail);
    if (!co_await settle(self, head_addr(), Frontier::tail, old, n)) co_return result;
    co_await fabric_.backoff(self, sim::Duration{0});
  }
  const auto commit = co_await fabric_.cas_persistent(self, head_ready_addr(), old, old + n);
  result.commit_attempts = commit.attempts;
  result.items = std::move(items);
  co_return result;
}

Task<void> HostedQueue::phase_barrier(Rank self) {
  co_await fabric_.barrier(self);
  if (self == config_.host) {
    fabric_.local_store(config_.host, tail_ready_addr().offset, fabric_.local_load(config_.host, tail_addr().offset));
    fabric_.local_store(config_.host, head_ready_addr().offset, fabric_.local_load(config_.host, head_addr().offset));
  }
  co_await fabric_.barrier(self);
  const Bytes b = co_await fabric_.rget(self, tail_addr(), 32);
  Cache& c = caches_[static_cast<std::size_t>(self)];
  c.tail = word_at(b, 0);
  c.tail_ready = word_at(b, 8);
  c.head_ready = word_at(b, 24);
}

bool HostedQueue::host_push(std::span<const std::byte> items) {
  const std::size_t n = slot_count(items);
  const Rank h = config_.host;
  const std::uint64_t tail = fabric_.local_load(h, tail_addr().offset);
  const std::uint64_t head_ready = fabric_.local_load(h, head_ready_addr().offset);
  if (tail + n - head_ready > config_.capacity) return false;
  const Bytes stored = config_.checksummed ? with_checksums(items, tail) : Bytes(items.begin(), items.end());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t pos = (tail + i) % config_.capacity;
    fabric_.local_write(h, ring_ + pos * stride_, std::span(stored).subspan(i * stride_, stride_));
  }
  fabric_.local_store(h, tail_addr().offset, tail + n);
  fabric_.local_store(h, tail_ready_addr().offset, fabric_.local_load(h, tail_ready_addr().offset) + n);
  return true;
}

std::optional<Bytes> HostedQueue::host_pop(std::size_t n) {
  if (n == 0 || n > config_.capacity) throw ArgumentError("pop of " + std::to_string(n) + " slots");
  const Rank h = config_.host;
  const std::uint64_t head = fabric_.local_load(h, head_addr().offset);
  const std::uint64_t tail_ready = fabric_.local_load(h, tail_ready_addr().offset);
  if (head + n > tail_ready) return std::nullopt;
  Bytes out(n * config_.slot_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t pos = (head + i) % config_.capacity;
    fabric_.local_read(h, ring_ + pos * stride_, std::span(out).subspan(i * config_.slot_bytes, config_.slot_bytes));
  }
  fabric_.local_store(h, head_addr().offset, head + n);
  fabric_.local_store(h, head_ready_addr().offset, fabric_.local_load(h, head_ready_addr().offset) + n);
  return out;
}

QueueCounters HostedQueue::counters() const {
  const Rank h = config_.host;
  return {fabric_.local_load(h, tail_addr().offset), fabric_.local_load(h, tail_ready_addr().offset),
          fabric_.local_load(h, head_addr().offset), fabric_.local_load(h, head_ready_addr().offset)};
}

}  // namespace pgaslab::ds
