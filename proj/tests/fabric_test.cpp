// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <vector>

#include "pgaslab/error.hpp"
#include "pgaslab/fabric/sim_fabric.hpp"
#include "pgaslab/fabric/thread_fabric.hpp"

namespace pgaslab::fabric {
namespace {

using sim::LatencyConfig;

Bytes bytes_of(std::initializer_list<int> v) {
  Bytes b;
  for (int x : v) b.push_back(static_cast<std::byte>(x));
  return b;
}

// Owns an engine when the backend needs one.
struct Rig {
  std::unique_ptr<sim::Engine> engine;
  std::unique_ptr<Fabric> fabric;
};

Rig make_rig(bool threaded, int ranks, std::size_t bytes, LatencyConfig cfg = LatencyConfig::defaults()) {
  Rig rig;
  if (threaded) {
    rig.fabric = std::make_unique<ThreadFabric>(ranks, bytes);
  } else {
    rig.engine = std::make_unique<sim::Engine>(cfg.seed);
    rig.fabric = std::make_unique<SimFabric>(*rig.engine, cfg, ranks, bytes);
  }
  return rig;
}

class BothBackends : public ::testing::TestWithParam<bool> {};

TEST_P(BothBackends, PutThenGetRoundTrips) {
  auto rig = make_rig(GetParam(), 2, 256);
  Bytes seen, fresh;
  rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    if (r != 0) co_return;
    fresh = co_await rig.fabric->rget(0, {1, 40}, 8);
    const Bytes data = bytes_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    co_await rig.fabric->rput(0, {1, 13}, data);
    seen = co_await rig.fabric->rget(0, {1, 13}, data.size());
    co_await rig.fabric->rput(0, {1, 200}, Bytes{});
  });
  EXPECT_EQ(fresh, Bytes(8));
  EXPECT_EQ(seen, bytes_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}));
}

TEST_P(BothBackends, CasSemantics) {
  auto rig = make_rig(GetParam(), 1, 64);
  std::vector<std::uint64_t> olds;
  rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    olds.push_back(co_await rig.fabric->cas(r, {0, 8}, 0, 3));
    olds.push_back(co_await rig.fabric->cas(r, {0, 16}, 1, 3));
    olds.push_back(co_await rig.fabric->cas(r, {0, 8, 4}, 3, 0xFFFF'FFFF));
  });
  EXPECT_EQ(olds, (std::vector<std::uint64_t>{0, 0, 3}));
  EXPECT_EQ(rig.fabric->local_load(0, 8), 0xFFFF'FFFFu);
  EXPECT_EQ(rig.fabric->local_load(0, 16), 0u);
}

TEST_P(BothBackends, FaoSemantics) {
  auto rig = make_rig(GetParam(), 1, 64);
  rig.fabric->local_store(0, 0, 5);
  rig.fabric->local_store(0, 8, 0b11, 4);
  rig.fabric->local_store(0, 16, 0xFFFF'FFFF, 4);
  std::vector<std::uint64_t> olds;
  rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    olds.push_back(co_await rig.fabric->fao(r, {0, 0}, FaoOp::add, 3));
    olds.push_back(co_await rig.fabric->fao(r, {0, 8, 4}, FaoOp::bit_and, ~std::uint64_t{0b10}));
    olds.push_back(co_await rig.fabric->fao(r, {0, 16, 4}, FaoOp::add, 1));
    olds.push_back(co_await rig.fabric->fao(r, {0, 24}, FaoOp::bit_or, 0b100));
    olds.push_back(co_await rig.fabric->fao(r, {0, 24}, FaoOp::bit_xor, 0b110));
  });
  EXPECT_EQ(olds, (std::vector<std::uint64_t>{5, 3, 0xFFFF'FFFF, 0, 0b100}));
  EXPECT_EQ(rig.fabric->local_load(0, 0), 8u);
  EXPECT_EQ(rig.fabric->local_load(0, 8, 4), 1u);
  EXPECT_EQ(rig.fabric->local_load(0, 12, 4), 0u);  // 32-bit add wraps without carrying out
  EXPECT_EQ(rig.fabric->local_load(0, 16, 4), 0u);
  EXPECT_EQ(rig.fabric->local_load(0, 24), 0b010u);
}

TEST_P(BothBackends, AddressingErrors) {
  auto rig = make_rig(GetParam(), 2, 64);
  auto expect_address_error = [&](auto op) {
    EXPECT_THROW(rig.fabric->run_spmd([&](Rank r) -> Task<void> {
      if (r == 0) co_await op();
    }),
                 AddressError);
  };
  expect_address_error([&]() -> Task<void> { co_await rig.fabric->rput(0, {1, 60}, Bytes(8)); });
  expect_address_error([&]() -> Task<void> { (void)co_await rig.fabric->rget(0, {2, 0}, 8); });
  expect_address_error([&]() -> Task<void> { (void)co_await rig.fabric->cas(0, {0, 4}, 0, 1); });
  expect_address_error([&]() -> Task<void> { (void)co_await rig.fabric->fao(0, {0, 2, 4}, FaoOp::add, 1); });
  expect_address_error([&]() -> Task<void> { (void)co_await rig.fabric->fao(0, {0, 0, 2}, FaoOp::add, 1); });
  expect_address_error([&]() -> Task<void> { (void)co_await rig.fabric->fao(0, {0, 64}, FaoOp::add, 1); });
}

TEST_P(BothBackends, BarrierOrdersPutBeforeGet) {
  auto rig = make_rig(GetParam(), 2, 64);
  std::uint64_t seen = 0;
  rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      const Bytes v = bytes_of({0x2a, 0, 0, 0, 0, 0, 0, 0});
      co_await rig.fabric->rput(0, {1, 0}, v);
    }
    co_await rig.fabric->barrier(r);
    if (r == 1) {
      const Bytes got = co_await rig.fabric->rget(1, {1, 0}, 8);
      seen = static_cast<std::uint64_t>(got[0]);
    }
  });
  EXPECT_EQ(seen, 0x2au);
}

// Property: N ranks each add 1 k times; the final word is N*k and the
// returned old values are exactly 0..N*k-1.
TEST_P(BothBackends, FetchAddConservation) {
  constexpr int ranks = 8, k = 2000;
  auto rig = make_rig(GetParam(), ranks, 64);
  std::mutex m;
  std::vector<std::uint64_t> olds;
  rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    std::vector<std::uint64_t> mine;
    for (int i = 0; i < k; ++i) mine.push_back(co_await rig.fabric->fao(r, {3 % ranks, 8}, FaoOp::add, 1));
    std::lock_guard lock(m);
    olds.insert(olds.end(), mine.begin(), mine.end());
  });
  EXPECT_EQ(rig.fabric->local_load(3, 8), static_cast<std::uint64_t>(ranks * k));
  std::sort(olds.begin(), olds.end());
  std::vector<std::uint64_t> expected(ranks * k);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(olds, expected);
}

// Property: with distinct positive addends the word is strictly increasing,
// so sorting the returned old values recovers the total order in which the
// atomics applied; each step must be explained by the previous op's addend.
TEST_P(BothBackends, AtomicHistoryIsExplainedByATotalOrder) {
  constexpr int ranks = 6, k = 500;
  auto rig = make_rig(GetParam(), ranks, 64);
  std::mutex m;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> history;  // (old, addend)
  rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    std::mt19937_64 rng(static_cast<std::uint64_t>(r) * 977 + 1);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> mine;
    for (int i = 0; i < k; ++i) {
      const std::uint64_t addend = 1 + rng() % 1000;
      mine.emplace_back(co_await rig.fabric->fao(r, {0, 0}, FaoOp::add, addend), addend);
      if (rng() % 4 == 0) {
        // A CAS that rewrites the value it expects never perturbs the history.
        const std::uint64_t cur = mine.back().first + addend;
        (void)co_await rig.fabric->cas(r, {0, 0}, cur, cur);
      }
    }
    std::lock_guard lock(m);
    history.insert(history.end(), mine.begin(), mine.end());
  });
  std::sort(history.begin(), history.end());
  ASSERT_EQ(history.front().first, 0u);
  for (std::size_t i = 1; i < history.size(); ++i) {
    ASSERT_EQ(history[i].first, history[i - 1].first + history[i - 1].second) << "at step " << i;
  }
  EXPECT_EQ(rig.fabric->local_load(0, 0), history.back().first + history.back().second);
}

TEST_P(BothBackends, CasPersistentUncontended) {
  auto rig = make_rig(GetParam(), 1, 64);
  rig.fabric->local_store(0, 0, 7);
  CasPersistentResult res;
  rig.fabric->run_spmd([&](Rank r) -> Task<void> { res = co_await rig.fabric->cas_persistent(r, {0, 0}, 7, 8); });
  EXPECT_EQ(res.attempts, 1u);
  EXPECT_EQ(rig.fabric->local_load(0, 0), 8u);
}

TEST_P(BothBackends, CasPersistentCapRaisesLivelock) {
  auto rig = make_rig(GetParam(), 1, 64);
  EXPECT_THROW(rig.fabric->run_spmd([&](Rank r) -> Task<void> {
    (void)co_await rig.fabric->cas_persistent(r, {0, 0}, 1, 2, 5);
  }),
               LivelockError);
  EXPECT_EQ(rig.fabric->counts(0).cas, 5u);
}

// Property: a single-rank program observes identical data on both backends.
TEST(BackendEquivalence, SingleRankProgramSeesSameData) {
  auto program = [](Fabric& f, std::vector<std::uint64_t>& out) {
    f.run_spmd([&](Rank r) -> Task<void> {
      std::mt19937_64 rng(1234);
      for (int i = 0; i < 3000; ++i) {
        const std::uint64_t off = 8 * (rng() % 32);
        switch (rng() % 4) {
          case 0: {
            const auto op = static_cast<FaoOp>(rng() % 4);
            out.push_back(co_await f.fao(r, {0, off}, op, rng()));
            break;
          }
          case 1: {
            const std::uint64_t expected = (rng() % 2 == 0 || out.empty()) ? 0 : out.back();
            out.push_back(co_await f.cas(r, {0, off}, expected, rng()));
            break;
          }
          case 2: {
            Bytes b(1 + rng() % 20);
            for (auto& x : b) x = static_cast<std::byte>(rng());
            co_await f.rput(r, {0, 1 + rng() % 200}, b);
            break;
          }
          default: {
            const Bytes b = co_await f.rget(r, {0, rng() % 200}, 1 + rng() % 40);
            for (auto x : b) out.push_back(static_cast<std::uint64_t>(x));
          }
        }
      }
    });
  };
  auto sim_rig = make_rig(false, 1, 256);
  auto thr_rig = make_rig(true, 1, 256);
  std::vector<std::uint64_t> a, b;
  program(*sim_rig.fabric, a);
  program(*thr_rig.fabric, b);
  EXPECT_EQ(a.size(), b.size());
  EXPECT_EQ(a, b);
}

INSTANTIATE_TEST_SUITE_P(Backends, BothBackends, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Threads" : "Sim"; });

// Timing on the simulated backend.

TEST(SimTiming, OneSidedOpsCompleteAfterTheirComponentCost) {
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), 2, 64);
  std::vector<std::int64_t> t;
  fab.run_spmd([&](Rank r) -> Task<void> {
    if (r != 0) co_return;
    auto lap = [&] { t.push_back(sim::ticks(engine.now())); };
    co_await fab.rput(0, {1, 0}, Bytes(8)); lap();
    (void)co_await fab.rget(0, {1, 0}, 8); lap();
    (void)co_await fab.cas(0, {1, 0}, 0, 1); lap();
    (void)co_await fab.fao(0, {1, 0}, FaoOp::add, 1); lap();
    co_await fab.rput(0, {1, 0}, Bytes{}); lap();
    (void)co_await fab.cas_persistent(0, {1, 0}, 2, 3); lap();
  });
  EXPECT_EQ(t, (std::vector<std::int64_t>{3000, 6700, 10500, 14400, 17400, 21200}));
}

TEST(SimTiming, EffectLandsAtCompletionInstant) {
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), 2, 64);
  std::vector<std::uint64_t> probes;
  fab.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      co_await fab.rput(0, {1, 0}, bytes_of({9, 0, 0, 0, 0, 0, 0, 0}));  // lands at t=3000
    } else {
      co_await fab.backoff(1, Duration{2999});
      probes.push_back(fab.local_load(1, 0));
      co_await fab.backoff(1, Duration{1});
      probes.push_back(fab.local_load(1, 0));
    }
  });
  EXPECT_EQ(probes, (std::vector<std::uint64_t>{0, 9}));
}

TEST(SimTiming, BarrierReleasesEveryoneAtLastEntryPlusCost) {
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), 4, 64);
  std::vector<std::int64_t> exits(4);
  fab.run_spmd([&](Rank r) -> Task<void> {
    co_await fab.backoff(r, Duration{1000 * (r * 7 % 4)});  // entries at 0, 3000, 2000, 1000
    co_await fab.barrier(r);
    exits[static_cast<std::size_t>(r)] = sim::ticks(engine.now());
    co_await fab.backoff(r, Duration{500 * r});
    co_await fab.barrier(r);
    exits[static_cast<std::size_t>(r)] += sim::ticks(engine.now()) * 1000;
  });
  for (auto e : exits) EXPECT_EQ(e, 13000 + 24500 * 1000);
}

TEST(SimTiming, SingleRankBarrierCostsBarrierNs) {
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), 1, 64);
  fab.run_spmd([&](Rank r) -> Task<void> { co_await fab.barrier(r); });
  EXPECT_EQ(sim::ticks(engine.now()), 10000);
}

TEST(SimTiming, NonCollectiveBarrierIsReportedAsStall) {
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), 2, 64);
  EXPECT_THROW(fab.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) co_await fab.barrier(r);
  }),
               Error);
}

// k ranks hold disjoint reservations [i, i+1) and must commit them in order
// on one counter, but they start in reverse order: the last rank keeps
// failing until all k-1 predecessors have committed.
TEST(SimTiming, ReverseOrderCommitsNeedManyAttempts) {
  constexpr int k = 6;
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), k, 64);
  std::vector<std::uint64_t> attempts(k);
  fab.run_spmd([&](Rank r) -> Task<void> {
    co_await fab.backoff(r, Duration{3800 * (k - 1 - r)});
    const auto res = co_await fab.cas_persistent(r, {0, 0}, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(r) + 1);
    attempts[static_cast<std::size_t>(r)] = res.attempts;
  });
  EXPECT_EQ(fab.local_load(0, 0), static_cast<std::uint64_t>(k));
  EXPECT_EQ(attempts[0], 1u);
  EXPECT_GE(attempts[k - 1], static_cast<std::uint64_t>(k));
}

TEST(SimTiming, OpCountsTrackIssuedOperations) {
  sim::Engine engine;
  SimFabric fab(engine, LatencyConfig::defaults(), 1, 64);
  fab.run_spmd([&](Rank r) -> Task<void> {
    co_await fab.rput(r, {0, 0}, Bytes(8));
    (void)co_await fab.rget(r, {0, 0}, 8);
    (void)co_await fab.rget(r, {0, 0}, 8);
    (void)co_await fab.fao(r, {0, 0}, FaoOp::add, 1);
    co_await fab.barrier(r);
  });
  EXPECT_EQ(fab.counts(0), (OpCounts{1, 2, 0, 1, 1}));
}

TEST(Allocation, SymmetricBumpAllocator) {
  ThreadFabric fab(2, 128);
  EXPECT_EQ(fab.allocate(3), 0u);
  EXPECT_EQ(fab.allocate(8), 8u);
  EXPECT_EQ(fab.allocate(4, 64), 64u);
  EXPECT_THROW(fab.allocate(100), AddressError);
  EXPECT_THROW(fab.allocate(1, 3), ArgumentError);
}

}  // namespace
}  // namespace pgaslab::fabric
