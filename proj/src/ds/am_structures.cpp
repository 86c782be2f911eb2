// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/ds/am_structures.hpp"

#include <algorithm>
#include <cstring>

#include "pgaslab/error.hpp"

namespace pgaslab::ds {

namespace {

constexpr std::byte ok{1};
constexpr std::byte failed{0};

std::uint64_t read_u64(std::span<const std::byte> b) {
  std::uint64_t v = 0;
  std::memcpy(&v, b.data(), std::min<std::size_t>(8, b.size()));
  return v;
}

Bytes u64_bytes(std::uint64_t v) {
  Bytes b(8);
  std::memcpy(b.data(), &v, 8);
  return b;
}

}  // namespace

AmHashTable::AmHashTable(am::AmEngine& am, HashTableConfig config) : am_(am), config_(config) {
  if (config_.buckets == 0) throw ArgumentError("hash table needs at least one bucket");
  const auto ranks = static_cast<std::uint64_t>(am_.size());
  per_rank_ = (config_.buckets + ranks - 1) / ranks;
  locals_.resize(static_cast<std::size_t>(ranks));
  for (auto& l : locals_) {
    l.used.assign(per_rank_, 0);
    l.keys.assign(per_rank_ * config_.key_bytes, std::byte{0});
    l.values.assign(per_rank_ * config_.value_bytes, std::byte{0});
  }
  insert_id_ = am_.register_handler([this](am::HandlerContext& ctx) { handle_insert(ctx); });
  find_id_ = am_.register_handler([this](am::HandlerContext& ctx) { handle_find(ctx); });
}

Rank AmHashTable::owner(std::span<const std::byte> key) const noexcept {
  return static_cast<Rank>((hash_key(key) % config_.buckets) / per_rank_);
}

std::uint64_t AmHashTable::occupancy(Rank r) const {
  const auto& u = locals_.at(static_cast<std::size_t>(r)).used;
  return static_cast<std::uint64_t>(std::count(u.begin(), u.end(), 1));
}

std::optional<Bytes> AmHashTable::peek(std::span<const std::byte> key) const {
  if (key.size() != config_.key_bytes) throw ArgumentError("AM hash peek: key size does not match the table");
  const Local& l = locals_[static_cast<std::size_t>(owner(key))];
  const std::uint64_t start = (hash_key(key) % config_.buckets) % per_rank_;
  for (std::uint64_t i = 0; i < per_rank_; ++i) {
    const std::uint64_t b = (start + i) % per_rank_;
    if (!l.used[b]) break;
    const auto k = l.keys.begin() + static_cast<std::ptrdiff_t>(b * config_.key_bytes);
    if (std::equal(key.begin(), key.end(), k)) {
      const auto v = l.values.begin() + static_cast<std::ptrdiff_t>(b * config_.value_bytes);
      return Bytes(v, v + static_cast<std::ptrdiff_t>(config_.value_bytes));
    }
  }
  return std::nullopt;
}

void AmHashTable::clear(Rank r) {
  auto& u = locals_.at(static_cast<std::size_t>(r)).used;
  std::fill(u.begin(), u.end(), std::uint8_t{0});
}

am::Ticket AmHashTable::insert_async(Rank self, std::span<const std::byte> key, std::span<const std::byte> value) {
  if (key.size() != config_.key_bytes || value.size() != config_.value_bytes) {
    throw ArgumentError("AM hash insert: key/value sizes do not match the table");
  }
  Bytes payload(key.begin(), key.end());
  payload.insert(payload.end(), value.begin(), value.end());
  return am_.request(self, owner(key), insert_id_, {}, payload);
}

am::Ticket AmHashTable::find_async(Rank self, std::span<const std::byte> key) {
  if (key.size() != config_.key_bytes) throw ArgumentError("AM hash find: key size does not match the table");
  return am_.request(self, owner(key), find_id_, {}, key);
}

void AmHashTable::handle_insert(am::HandlerContext& ctx) {
  Local& l = locals_[static_cast<std::size_t>(ctx.self())];
  const auto key = ctx.payload().first(config_.key_bytes);
  const auto value = ctx.payload().subspan(config_.key_bytes);
  const std::uint64_t start = (hash_key(key) % config_.buckets) % per_rank_;
  for (std::uint64_t i = 0; i < per_rank_; ++i) {
    const std::uint64_t b = (start + i) % per_rank_;
    if (l.used[b]) continue;
    l.used[b] = 1;
    std::copy(key.begin(), key.end(), l.keys.begin() + static_cast<std::ptrdiff_t>(b * config_.key_bytes));
    std::copy(value.begin(), value.end(), l.values.begin() + static_cast<std::ptrdiff_t>(b * config_.value_bytes));
    ctx.charge(am_.fabric().config().local_op * static_cast<std::int64_t>(i));
    const std::byte status[] = {ok};
    ctx.reply(status);
    return;
  }
  ctx.charge(am_.fabric().config().local_op * static_cast<std::int64_t>(per_rank_ - 1));
  const std::byte status[] = {failed};
  ctx.reply(status);
}

void AmHashTable::handle_find(am::HandlerContext& ctx) {
  const Local& l = locals_[static_cast<std::size_t>(ctx.self())];
  const auto key = ctx.payload();
  const std::uint64_t start = (hash_key(key) % config_.buckets) % per_rank_;
  for (std::uint64_t i = 0; i < per_rank_; ++i) {
    const std::uint64_t b = (start + i) % per_rank_;
    if (!l.used[b]) break;
    const auto k = l.keys.begin() + static_cast<std::ptrdiff_t>(b * config_.key_bytes);
    if (std::equal(key.begin(), key.end(), k)) {
      ctx.charge(am_.fabric().config().local_op * static_cast<std::int64_t>(i));
      Bytes reply{ok};
      const auto v = l.values.begin() + static_cast<std::ptrdiff_t>(b * config_.value_bytes);
      reply.insert(reply.end(), v, v + static_cast<std::ptrdiff_t>(config_.value_bytes));
      ctx.reply(reply);
      return;
    }
    if (i + 1 < per_rank_) ctx.charge(am_.fabric().config().local_op);
  }
  const std::byte status[] = {failed};
  ctx.reply(status);
}

bool AmHashTable::insert_succeeded(const am::Ticket& t) { return t.done() && !t.reply().empty() && t.reply()[0] == ok; }

std::optional<Bytes> AmHashTable::found_value(const am::Ticket& t) {
  if (!t.done() || t.reply().empty() || t.reply()[0] != ok) return std::nullopt;
  return Bytes(t.reply().begin() + 1, t.reply().end());
}

Task<bool> AmHashTable::insert(Rank self, std::span<const std::byte> key, std::span<const std::byte> value) {
  const am::Ticket t = insert_async(self, key, value);
  (void)co_await am_.wait(self, t);
  co_return insert_succeeded(t);
}

Task<std::optional<Bytes>> AmHashTable::find(Rank self, std::span<const std::byte> key) {
  const am::Ticket t = find_async(self, key);
  (void)co_await am_.wait(self, t);
  co_return found_value(t);
}

AmQueue::AmQueue(am::AmEngine& am, HostedQueue& queue) : am_(am), queue_(queue) {
  const auto item_cost = [this](std::size_t n) {
    return am_.fabric().config().local_op * static_cast<std::int64_t>(n > 0 ? n - 1 : 0);
  };
  push_id_ = am_.register_handler([this, item_cost](am::HandlerContext& ctx) {
    const std::size_t n = ctx.payload().size() / queue_.config().slot_bytes;
    ctx.charge(item_cost(n));
    const std::byte status[] = {queue_.host_push(ctx.payload()) ? ok : failed};
    ctx.reply(status);
  });
  pop_id_ = am_.register_handler([this, item_cost](am::HandlerContext& ctx) {
    const auto n = static_cast<std::size_t>(read_u64(ctx.args()));
    ctx.charge(item_cost(n));
    const auto items = queue_.host_pop(n);
    Bytes reply{items ? ok : failed};
    if (items) reply.insert(reply.end(), items->begin(), items->end());
    ctx.reply(reply);
  });
}

am::Ticket AmQueue::push_async(Rank self, std::span<const std::byte> items) {
  const std::size_t slot = queue_.config().slot_bytes;
  if (items.empty() || items.size() % slot != 0) throw ArgumentError("AM push: items are not whole slots");
  return am_.request(self, queue_.config().host, push_id_, {}, items);
}

am::Ticket AmQueue::pop_async(Rank self, std::size_t n) {
  if (n == 0) throw ArgumentError("AM pop of zero slots");
  return am_.request(self, queue_.config().host, pop_id_, u64_bytes(n));
}

bool AmQueue::push_succeeded(const am::Ticket& t) { return t.done() && !t.reply().empty() && t.reply()[0] == ok; }

std::optional<Bytes> AmQueue::popped_items(const am::Ticket& t) {
  if (!t.done() || t.reply().empty() || t.reply()[0] != ok) return std::nullopt;
  return Bytes(t.reply().begin() + 1, t.reply().end());
}

Task<bool> AmQueue::push(Rank self, std::span<const std::byte> items) {
  const am::Ticket t = push_async(self, items);
  (void)co_await am_.wait(self, t);
  co_return push_succeeded(t);
}

Task<std::optional<Bytes>> AmQueue::pop(Rank self, std::size_t n) {
  const am::Ticket t = pop_async(self, n);
  (void)co_await am_.wait(self, t);
  co_return popped_items(t);
}

}  // namespace pgaslab::ds
