// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <mutex>
#include <random>
#include <set>

#include "pgaslab/am/am.hpp"
#include "pgaslab/ds/am_structures.hpp"
#include "pgaslab/ds/hash_table.hpp"
#include "pgaslab/error.hpp"
#include "test_support.hpp"

namespace pgaslab::ds {
namespace {

using testing_support::all_words_equal;
using testing_support::sentinel;
using testing_support::SimRig;
using testing_support::u64_bytes;
using testing_support::u64_of;
using L = ConcurrencyLevel;

TEST(HashLayout, FieldsArePaddedToWords) {
  const auto a = BucketLayout::for_sizes(8, 8);
  EXPECT_EQ(a.key_offset, 8u);
  EXPECT_EQ(a.value_offset, 16u);
  EXPECT_EQ(a.stride, 24u);
  const auto b = BucketLayout::for_sizes(5, 12);
  EXPECT_EQ(b.value_offset, 16u);
  EXPECT_EQ(b.stride, 32u);
}

TEST(HashFunction, MatchesFnv1a64) {
  EXPECT_EQ(hash_key({}), 0xcbf29ce484222325ULL);
  const std::byte a[] = {std::byte{'a'}};
  EXPECT_EQ(hash_key(a), 0xaf63dc4c8601ec8cULL);
}

TEST(HashTableBasics, BlockDistribution) {
  SimRig rig(4);
  HashTable t(rig.fabric, {10, 8, 8});
  EXPECT_EQ(t.buckets_per_rank(), 3u);
  EXPECT_EQ(t.owner(0), 0);
  EXPECT_EQ(t.owner(5), 1);
  EXPECT_EQ(t.owner(9), 3);
  EXPECT_EQ(t.flag_address(4).offset - t.flag_address(3).offset, 24u);
}

// Latency of one operation issued by rank 0 at t=0 into a table homed on
// rank 1, after an untimed setup step.
struct OneShot {
  std::int64_t latency = -1;
  InsertResult insert;
  FindResult find;
};

OneShot time_insert(L level) {
  SimRig rig(2);
  HashTable t(rig.fabric, {64, 8, 8});
  OneShot r;
  rig.fabric.run_spmd([&](Rank self) -> Task<void> {
    if (self != 0) co_return;
    const Bytes k = u64_bytes(42), v = u64_bytes(4242);
    r.insert = co_await t.insert(0, k, v, level);
    r.latency = rig.now();
  });
  return r;
}

OneShot time_find(L level, bool present) {
  SimRig rig(2);
  HashTable t(rig.fabric, {64, 8, 8});
  OneShot r;
  rig.fabric.run_spmd([&](Rank self) -> Task<void> {
    if (self != 0) co_return;
    const Bytes k = u64_bytes(42), v = u64_bytes(4242);
    if (present) (void)co_await t.insert(0, k, v, L::CRW);
    const auto start = rig.now();
    r.find = co_await t.find(0, k, level);
    r.latency = rig.now() - start;
  });
  return r;
}

// Oracle: the component sums, independent of the cost-model module.
TEST(HashTableTiming, UncontendedLatenciesEqualComponentSums) {
  const auto c = sim::LatencyConfig::defaults();
  EXPECT_EQ(c.cas.count() + c.put.count(), 6800);
  EXPECT_EQ(c.cas.count() + c.put.count() + c.fao.count(), 10700);
  EXPECT_EQ(c.fao.count() + c.get.count() + c.fao.count(), 11500);

  EXPECT_EQ(time_insert(L::CW).latency, 6800);
  EXPECT_EQ(time_insert(L::CRW).latency, 10700);
  const auto cr = time_find(L::CR, true);
  EXPECT_EQ(cr.latency, 3700);
  EXPECT_EQ(u64_of(*cr.find.value), 4242u);
  const auto crw = time_find(L::CRW, true);
  EXPECT_EQ(crw.latency, 11500);
  EXPECT_EQ(u64_of(*crw.find.value), 4242u);
}

TEST(HashTableBasics, FindOnEmptyTableIsOneProbe) {
  const auto cr = time_find(L::CR, false);
  EXPECT_FALSE(cr.find.value);
  EXPECT_EQ(cr.find.probes, 1u);
  const auto crw = time_find(L::CRW, false);
  EXPECT_FALSE(crw.find.value);
  EXPECT_EQ(crw.find.probes, 1u);
}

TEST(HashTableBasics, FullTableRejectsInsert) {
  SimRig rig(1);
  HashTable t(rig.fabric, {1, 8, 8});
  std::vector<bool> ok;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    const Bytes k1 = u64_bytes(1), k2 = u64_bytes(2), v = u64_bytes(0);
    ok.push_back((co_await t.insert(r, k1, v, L::CRW)).success);
    ok.push_back((co_await t.insert(r, k2, v, L::CRW)).success);
  });
  EXPECT_EQ(ok, (std::vector<bool>{true, false}));
}

TEST(HashTableBasics, DuplicateKeysOccupyDistinctBucketsFirstWins) {
  SimRig rig(2);
  HashTable t(rig.fabric, {16, 8, 8});
  InsertResult a, b;
  FindResult f;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r != 1) co_return;
    const Bytes k = u64_bytes(7), v1 = u64_bytes(100), v2 = u64_bytes(200);
    a = co_await t.insert(r, k, v1, L::CW);
    b = co_await t.insert(r, k, v2, L::CW);
    f = co_await t.find(r, k, L::CR);
  });
  EXPECT_TRUE(a.success && b.success);
  EXPECT_NE(a.bucket, b.bucket);
  EXPECT_EQ(b.probes, 2u);
  EXPECT_EQ(u64_of(*f.value), 100u);
}

TEST(HashTableBasics, LevelAndSizeChecks) {
  SimRig rig(1);
  HashTable t(rig.fabric, {4, 8, 8});
  const Bytes k = u64_bytes(1), v = u64_bytes(1), short_key(4);
  auto run = [&](auto op) {
    rig.fabric.run_spmd([&](Rank) -> Task<void> { co_await op(); });
  };
  EXPECT_THROW(run([&]() -> Task<void> { (void)co_await t.insert(0, k, v, L::CR); }), ConcurrencyError);
  EXPECT_THROW(run([&]() -> Task<void> { (void)co_await t.find(0, k, L::CW); }), ConcurrencyError);
  EXPECT_THROW(run([&]() -> Task<void> { (void)co_await t.insert(0, short_key, v, L::CW); }), ArgumentError);
}

TEST(HashTableBasics, CrwInsertLeavesReadyFlag) {
  SimRig rig(2);
  HashTable t(rig.fabric, {8, 8, 8});
  InsertResult res;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r != 0) co_return;
    const Bytes k = u64_bytes(3), v = u64_bytes(9);
    res = co_await t.insert(r, k, v, L::CRW);
  });
  EXPECT_EQ(t.peek_flag(res.bucket), flag_ready);
  EXPECT_EQ(u64_of(t.peek_key(res.bucket)), 3u);
  EXPECT_EQ(u64_of(t.peek_value(res.bucket)), 9u);
}

// A CRW reader that reaches a bucket while it is still RESERVED backs off
// and retries until the insert publishes it.
TEST(HashTableRaces, CrwFindRetriesOnReservedBucket) {
  SimRig rig(3);
  HashTable t(rig.fabric, {8, 8, 8});
  FindResult f;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    const Bytes k = u64_bytes(5), v = u64_bytes(55);
    if (r == 0) (void)co_await t.insert(0, k, v, L::CRW);  // RESERVED during [3800, 10700)
    if (r == 1) {
      co_await rig.fabric.backoff(1, sim::Duration{1000});  // OR lands at 4900
      f = co_await t.find(1, k, L::CRW);
    }
  });
  ASSERT_TRUE(f.value);
  EXPECT_EQ(u64_of(*f.value), 55u);
  EXPECT_GE(f.attempts, 1u);
}

TEST(HashTableRaces, ReaderBitCollisionMovesToNextBit) {
  SimRig rig(1);
  HashTable t(rig.fabric, {4, 8, 8});
  const Bytes k = u64_bytes(8), v = u64_bytes(88);
  InsertResult ins;
  FindResult f;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    ins = co_await t.insert(r, k, v, L::CRW);
    // Another reader holds rank 0's preferred bit.
    const auto a = t.flag_address(ins.bucket);
    rig.fabric.local_store(a.rank, a.offset, flag_ready | (1u << first_reader_bit), 4);
    f = co_await t.find(r, k, L::CRW);
  });
  ASSERT_TRUE(f.value);
  EXPECT_EQ(f.attempts, 1u);
  EXPECT_EQ(t.peek_flag(ins.bucket), flag_ready | (1u << first_reader_bit));
}

TEST(HashTableRaces, InsertRetriesFreeBucketHoldingTransientReaderBit) {
  SimRig rig(2);
  HashTable t(rig.fabric, {4, 8, 8});
  const Bytes k = u64_bytes(11), v = u64_bytes(1);
  const std::uint64_t home = t.home_bucket(k);
  const auto flag = t.flag_address(home);
  rig.fabric.local_store(flag.rank, flag.offset, 1u << 7, 4);
  InsertResult ins;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) ins = co_await t.insert(0, k, v, L::CRW);
    if (r == 1) {
      co_await rig.fabric.backoff(1, sim::Duration{1000});
      (void)co_await rig.fabric.fao(1, flag, fabric::FaoOp::bit_and, ~std::uint64_t{1u << 7});  // lands at 4900
    }
  });
  EXPECT_TRUE(ins.success);
  EXPECT_EQ(ins.bucket, home);
  EXPECT_EQ(ins.probes, 1u);
  EXPECT_EQ(ins.attempts, 2u);
}

TEST(HashTablePhases, CwInsertsThenCrFindsSeeEverything) {
  constexpr int ranks = 4, per_rank = 50;
  SimRig rig(ranks);
  HashTable t(rig.fabric, {512, 8, 8});
  int misses = 0;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    for (int i = 0; i < per_rank; ++i) {
      const std::uint64_t key = static_cast<std::uint64_t>(r) * 1000 + static_cast<std::uint64_t>(i);
      const Bytes k = u64_bytes(key), v = u64_bytes(key * 3);
      EXPECT_TRUE((co_await t.insert(r, k, v, L::CW)).success);
    }
    co_await rig.fabric.barrier(r);
    for (int i = 0; i < ranks * per_rank; ++i) {
      const std::uint64_t key = static_cast<std::uint64_t>(i / per_rank) * 1000 + static_cast<std::uint64_t>(i % per_rank);
      const Bytes k = u64_bytes(key);
      const auto f = co_await t.find(r, k, L::CR);
      if (!f.value || u64_of(*f.value) != key * 3) ++misses;
    }
  });
  EXPECT_EQ(misses, 0);
}

// Property, both backends: under a concurrent CRW insert/find storm with
// multi-word sentinel values, every found value is whole and was inserted
// for that key, and after the storm every key is found.
void crw_storm(fabric::Fabric& fab, int per_rank, std::uint64_t seed) {
  const int ranks = fab.size();
  constexpr std::size_t words = 4;
  HashTable t(fab, {static_cast<std::uint64_t>(ranks * per_rank) * 2, 8, 8 * words});
  std::mutex m;
  std::vector<std::string> failures;
  auto fail = [&](std::string s) {
    std::lock_guard lock(m);
    failures.push_back(std::move(s));
  };
  auto value_of = [](std::uint64_t key) { return key * 0x9E3779B97F4A7C15ULL | 1; };
  fab.run_spmd([&](Rank r) -> Task<void> {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(r));
    int inserted = 0;
    while (inserted < per_rank) {
      if (rng() % 2 == 0) {
        const std::uint64_t key = static_cast<std::uint64_t>(r) * 1'000'000 + static_cast<std::uint64_t>(inserted);
        const Bytes k = u64_bytes(key), v = sentinel(value_of(key), words);
        if (!(co_await t.insert(r, k, v, L::CRW)).success) fail("insert failed");
        ++inserted;
      } else {
        const Rank other = static_cast<Rank>(rng() % static_cast<std::uint64_t>(ranks));
        const std::uint64_t key = static_cast<std::uint64_t>(other) * 1'000'000 + rng() % static_cast<std::uint64_t>(per_rank);
        const Bytes k = u64_bytes(key);
        const auto f = co_await t.find(r, k, L::CRW);
        if (f.value && (!all_words_equal(*f.value) || u64_of(*f.value) != value_of(key))) fail("torn or foreign value");
      }
    }
    co_await fab.barrier(r);
    for (int i = 0; i < per_rank; ++i) {
      const std::uint64_t key = static_cast<std::uint64_t>((r + 1) % ranks) * 1'000'000 + static_cast<std::uint64_t>(i);
      const Bytes k = u64_bytes(key);
      const auto f = co_await t.find(r, k, L::CRW);
      if (!f.value || u64_of(*f.value) != value_of(key)) fail("key lost");
    }
  });
  EXPECT_TRUE(failures.empty()) << failures.size() << " failures, first: " << failures.front();
}

TEST(HashTableProperties, CrwStormOnSimulator) {
  auto cfg = sim::LatencyConfig::defaults();
  cfg.jitter_pct = 25.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    cfg.seed = seed;
    SimRig rig(6, cfg);
    crw_storm(rig.fabric, 200, seed);
  }
}

TEST(HashTableProperties, CrwStormOnThreads) {
  fabric::ThreadFabric fab(4, 1 << 20);
  crw_storm(fab, 3000, 17);
}

// Active-message hash table.

struct AmRig {
  explicit AmRig(int ranks) : sim(ranks), am(sim.fabric) {}
  SimRig sim;
  am::AmEngine am;
};

TEST(AmHashTable, InsertRoundTripAndFind) {
  AmRig rig(2);
  AmHashTable t(rig.am, {64, 8, 8});
  // Pick a key owned by rank 1.
  std::uint64_t key = 0;
  while (t.owner(u64_bytes(key)) != 1) ++key;
  std::int64_t insert_rt = -1;
  bool ok = false, done = false;
  std::optional<Bytes> hit, miss;
  rig.sim.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 1) {
      co_await rig.am.poll_until(1, [&] { return done; });
      co_return;
    }
    const Bytes k = u64_bytes(key), v = u64_bytes(31337);
    ok = co_await t.insert(0, k, v);
    insert_rt = rig.sim.now();
    hit = co_await t.find(0, k);
    const Bytes absent = u64_bytes(key + 1'000'003);
    miss = co_await t.find(0, absent);
    done = true;
    rig.am.notify(1);
  });
  EXPECT_TRUE(ok);
  EXPECT_EQ(insert_rt, 2 * 1500 + 2500);
  ASSERT_TRUE(hit);
  EXPECT_EQ(u64_of(*hit), 31337u);
  EXPECT_FALSE(miss);
}

TEST(AmHashTable, ExtraLocalProbesCostEll) {
  AmRig rig(1);
  AmHashTable t(rig.am, {8, 8, 8});
  std::vector<std::int64_t> rts;
  rig.sim.fabric.run_spmd([&](Rank r) -> Task<void> {
    const Bytes k = u64_bytes(5), v = u64_bytes(6);
    for (int i = 0; i < 3; ++i) {
      const auto start = rig.sim.now();
      EXPECT_TRUE(co_await t.insert(r, k, v));
      rts.push_back(rig.sim.now() - start);
    }
  });
  EXPECT_EQ(rts, (std::vector<std::int64_t>{5500, 8000, 10500}));
  EXPECT_EQ(t.occupancy(0), 3u);
}

TEST(AmHashTable, FullLocalBlockReportsFailure) {
  AmRig rig(1);
  AmHashTable t(rig.am, {2, 8, 8});
  std::vector<bool> ok;
  rig.sim.fabric.run_spmd([&](Rank r) -> Task<void> {
    for (std::uint64_t i = 0; i < 3; ++i) {
      const Bytes k = u64_bytes(i), v = u64_bytes(i);
      ok.push_back(co_await t.insert(r, k, v));
    }
  });
  EXPECT_EQ(ok, (std::vector<bool>{true, true, false}));
}

}  // namespace
}  // namespace pgaslab::ds
