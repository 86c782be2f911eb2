// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/fabric/sim_fabric.hpp"

#include <algorithm>
#include <cstring>

#include "pgaslab/error.hpp"

namespace pgaslab::fabric {

using sim::Component;

SimFabric::SimFabric(sim::Engine& engine, sim::LatencyConfig config, int ranks, std::size_t segment_bytes)
    : engine_(engine), config_(config), segment_bytes_(segment_bytes), hotspot_(config.hotspot_penalty) {
  if (ranks < 1) throw ArgumentError("fabric needs at least one rank");
  config_.validate();
  segments_.assign(static_cast<std::size_t>(ranks), Bytes(segment_bytes));
  counts_.resize(static_cast<std::size_t>(ranks));
}

Duration SimFabric::atomic_cost(const GlobalAddress& addr, Component c) {
  Duration cost = sim::sample_latency(c, config_, engine_.rng());
  if (hotspot_.penalty().count() > 0) {
    const sim::WordKey word{addr.rank, addr.offset};
    cost += hotspot_.delay(word, engine_.now());
    hotspot_.record(word, engine_.now() + cost);
  }
  return cost;
}

std::uint64_t SimFabric::read_word(const GlobalAddress& a) const {
  std::uint64_t v = 0;
  std::memcpy(&v, segments_[static_cast<std::size_t>(a.rank)].data() + a.offset, a.width);
  return v;
}

void SimFabric::write_word(const GlobalAddress& a, std::uint64_t v) {
  std::memcpy(segments_[static_cast<std::size_t>(a.rank)].data() + a.offset, &v, a.width);
}

Task<void> SimFabric::rput(Rank self, GlobalAddress dst, std::span<const std::byte> data) {
  check_rank(self);
  check_range(dst, data.size());
  ++counts_[static_cast<std::size_t>(self)].puts;
  const Duration cost = sim::sample_latency(Component::put, config_, engine_.rng());
  std::string tag;
  if (engine_.tracing()) tag = "put r" + std::to_string(self) + " " + to_string(dst) + " len " + std::to_string(data.size());
  co_await engine_.sleep(cost, std::move(tag));
  if (!data.empty()) std::memcpy(segments_[static_cast<std::size_t>(dst.rank)].data() + dst.offset, data.data(), data.size());
}

Task<Bytes> SimFabric::rget(Rank self, GlobalAddress src, std::size_t length) {
  check_rank(self);
  check_range(src, length);
  ++counts_[static_cast<std::size_t>(self)].gets;
  const Duration cost = sim::sample_latency(Component::get, config_, engine_.rng());
  std::string tag;
  if (engine_.tracing()) tag = "get r" + std::to_string(self) + " " + to_string(src) + " len " + std::to_string(length);
  co_await engine_.sleep(cost, std::move(tag));
  const auto* base = segments_[static_cast<std::size_t>(src.rank)].data() + src.offset;
  co_return Bytes(base, base + length);
}

Task<std::uint64_t> SimFabric::cas(Rank self, GlobalAddress addr, std::uint64_t expected, std::uint64_t desired) {
  check_rank(self);
  check_atomic(addr);
  ++counts_[static_cast<std::size_t>(self)].cas;
  const Duration cost = atomic_cost(addr, Component::cas);
  std::string tag;
  if (engine_.tracing()) tag = "cas r" + std::to_string(self) + " " + to_string(addr);
  co_await engine_.sleep(cost, std::move(tag));
  const std::uint64_t old = read_word(addr);
  if (old == (addr.width == 4 ? (expected & 0xFFFF'FFFFULL) : expected)) write_word(addr, desired);
  co_return old;
}

Task<std::uint64_t> SimFabric::fao(Rank self, GlobalAddress addr, FaoOp op, std::uint64_t operand) {
  check_rank(self);
  check_atomic(addr);
  ++counts_[static_cast<std::size_t>(self)].fao;
  const Duration cost = atomic_cost(addr, Component::fao);
  std::string tag;
  if (engine_.tracing()) tag = "fao r" + std::to_string(self) + " " + to_string(addr);
  co_await engine_.sleep(cost, std::move(tag));
  const std::uint64_t old = read_word(addr);
  write_word(addr, apply_fao(op, old, operand, addr.width));
  co_return old;
}

Task<void> SimFabric::barrier(Rank self) {
  check_rank(self);
  ++counts_[static_cast<std::size_t>(self)].barriers;
  sim::Engine::ParkAwaiter park([this](std::coroutine_handle<> h) {
    barrier_.waiting.push_back(h);
    if (++barrier_.arrived < size()) return;
    // The last arrival defines max(entry); everyone leaves barrier_ns later.
    for (auto w : barrier_.waiting) engine_.schedule(config_.barrier, [w] { w.resume(); }, "barrier exit");
    barrier_ = BarrierEpoch{};
  });
  co_await park;
}

Task<void> SimFabric::local_work(Rank self, std::size_t count) {
  check_rank(self);
  Duration total{0};
  for (std::size_t i = 0; i < count; ++i) total += sim::sample_latency(Component::local, config_, engine_.rng());
  co_await engine_.sleep(total);
}

Task<void> SimFabric::backoff(Rank self, Duration d) {
  check_rank(self);
  co_await engine_.sleep(d);
}

void SimFabric::local_write(Rank owner, std::uint64_t offset, std::span<const std::byte> data) {
  check_range(GlobalAddress{owner, offset, 1}, data.size());
  if (!data.empty()) std::memcpy(segments_[static_cast<std::size_t>(owner)].data() + offset, data.data(), data.size());
}

void SimFabric::local_read(Rank owner, std::uint64_t offset, std::span<std::byte> out) const {
  check_range(GlobalAddress{owner, offset, 1}, out.size());
  if (!out.empty()) std::memcpy(out.data(), segments_[static_cast<std::size_t>(owner)].data() + offset, out.size());
}

void SimFabric::run_spmd(const std::function<Task<void>(Rank)>& program) {
  for (Rank r = 0; r < size(); ++r) engine_.spawn(program(r));
  engine_.run();
  if (engine_.live_tasks() != 0) {
    throw Error("simulation stalled with " + std::to_string(engine_.live_tasks()) +
                " unfinished tasks (non-collective barrier or a reply that never came)");
  }
}

}  // namespace pgaslab::fabric
