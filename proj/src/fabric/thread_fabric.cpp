// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/fabric/thread_fabric.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <exception>
#include <mutex>
#include <thread>

#include "pgaslab/error.hpp"

namespace pgaslab::fabric {

static_assert(std::endian::native == std::endian::little, "segments are little-endian");

namespace {

template <typename T>
std::atomic_ref<T> word_at(std::byte* p) {
  return std::atomic_ref<T>(*reinterpret_cast<T*>(p));
}

// Copies `n` bytes into shared memory: whole aligned words with one release
// store each, ragged ends byte by byte.
void store_words(std::byte* dst_base, std::uint64_t offset, const std::byte* src, std::size_t n) {
  std::size_t i = 0;
  while (i < n) {
    const std::uint64_t at = offset + i;
    if (at % 8 == 0 && n - i >= 8) {
      std::uint64_t w;
      std::memcpy(&w, src + i, 8);
      word_at<std::uint64_t>(dst_base + at).store(w, std::memory_order_release);
      i += 8;
    } else {
      word_at<unsigned char>(dst_base + at).store(static_cast<unsigned char>(src[i]), std::memory_order_release);
      ++i;
    }
  }
}

void load_words(std::byte* src_base, std::uint64_t offset, std::byte* dst, std::size_t n) {
  std::size_t i = 0;
  while (i < n) {
    const std::uint64_t at = offset + i;
    if (at % 8 == 0 && n - i >= 8) {
      const std::uint64_t w = word_at<std::uint64_t>(src_base + at).load(std::memory_order_acquire);
      std::memcpy(dst + i, &w, 8);
      i += 8;
    } else {
      dst[i] = static_cast<std::byte>(word_at<unsigned char>(src_base + at).load(std::memory_order_acquire));
      ++i;
    }
  }
}

template <typename T>
T apply_atomic(std::atomic_ref<T> word, FaoOp op, T operand) {
  switch (op) {
    case FaoOp::add: return word.fetch_add(operand);
    case FaoOp::bit_and: return word.fetch_and(operand);
    case FaoOp::bit_or: return word.fetch_or(operand);
    case FaoOp::bit_xor: return word.fetch_xor(operand);
  }
  return T{};
}

}  // namespace

ThreadFabric::ThreadFabric(int ranks, std::size_t segment_bytes)
    : ranks_(ranks), segment_bytes_(segment_bytes), counts_(ranks > 0 ? static_cast<std::size_t>(ranks) : 0),
      barrier_(ranks > 0 ? ranks : 1) {
  if (ranks < 1) throw ArgumentError("fabric needs at least one rank");
  const std::size_t words = (segment_bytes + 7) / 8;
  for (int r = 0; r < ranks; ++r) segments_.push_back(std::make_unique<std::uint64_t[]>(words));
}

Task<void> ThreadFabric::rput(Rank self, GlobalAddress dst, std::span<const std::byte> data) {
  check_rank(self);
  check_range(dst, data.size());
  ++counts_[static_cast<std::size_t>(self)].counts.puts;
  store_words(base(dst.rank), dst.offset, data.data(), data.size());
  co_return;
}

Task<Bytes> ThreadFabric::rget(Rank self, GlobalAddress src, std::size_t length) {
  check_rank(self);
  check_range(src, length);
  ++counts_[static_cast<std::size_t>(self)].counts.gets;
  Bytes out(length);
  load_words(base(src.rank), src.offset, out.data(), length);
  co_return out;
}

Task<std::uint64_t> ThreadFabric::cas(Rank self, GlobalAddress addr, std::uint64_t expected, std::uint64_t desired) {
  check_rank(self);
  check_atomic(addr);
  ++counts_[static_cast<std::size_t>(self)].counts.cas;
  std::byte* p = base(addr.rank) + addr.offset;
  if (addr.width == 4) {
    auto e = static_cast<std::uint32_t>(expected);
    word_at<std::uint32_t>(p).compare_exchange_strong(e, static_cast<std::uint32_t>(desired));
    co_return e;
  }
  std::uint64_t e = expected;
  word_at<std::uint64_t>(p).compare_exchange_strong(e, desired);
  co_return e;
}

Task<std::uint64_t> ThreadFabric::fao(Rank self, GlobalAddress addr, FaoOp op, std::uint64_t operand) {
  check_rank(self);
  check_atomic(addr);
  ++counts_[static_cast<std::size_t>(self)].counts.fao;
  std::byte* p = base(addr.rank) + addr.offset;
  if (addr.width == 4) co_return apply_atomic(word_at<std::uint32_t>(p), op, static_cast<std::uint32_t>(operand));
  co_return apply_atomic(word_at<std::uint64_t>(p), op, operand);
}

Task<void> ThreadFabric::barrier(Rank self) {
  check_rank(self);
  ++counts_[static_cast<std::size_t>(self)].counts.barriers;
  barrier_.arrive_and_wait();
  co_return;
}

Task<void> ThreadFabric::local_work(Rank self, std::size_t) {
  check_rank(self);
  co_return;
}

Task<void> ThreadFabric::backoff(Rank self, Duration) {
  check_rank(self);
  std::this_thread::yield();
  co_return;
}

void ThreadFabric::local_write(Rank owner, std::uint64_t offset, std::span<const std::byte> data) {
  check_range(GlobalAddress{owner, offset, 1}, data.size());
  store_words(base(owner), offset, data.data(), data.size());
}

void ThreadFabric::local_read(Rank owner, std::uint64_t offset, std::span<std::byte> out) const {
  check_range(GlobalAddress{owner, offset, 1}, out.size());
  load_words(base(owner), offset, out.data(), out.size());
}

void ThreadFabric::run_spmd(const std::function<Task<void>(Rank)>& program) {
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(ranks_));
  for (Rank r = 0; r < ranks_; ++r) {
    threads.emplace_back([&, r] {
      try {
        sync_wait(program(r));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

OpCounts ThreadFabric::counts(Rank r) const { return counts_.at(static_cast<std::size_t>(r)).counts; }

}  // namespace pgaslab::fabric
