// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "pgaslab/am/am.hpp"
#include "pgaslab/error.hpp"

namespace pgaslab::am {
namespace {

using sim::LatencyConfig;
using sim::ticks;

Bytes word_bytes(std::uint64_t v) {
  Bytes b(8);
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<std::byte>(v >> (8 * i));
  return b;
}

std::uint64_t word_of(std::span<const std::byte> b) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < b.size() && i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

struct Rig {
  explicit Rig(int ranks, LatencyConfig cfg = LatencyConfig::defaults())
      : engine(cfg.seed), fabric(engine, cfg, ranks, 1024), am(fabric) {}
  sim::Engine engine;
  fabric::SimFabric fabric;
  AmEngine am;
};

TEST(AmRegistration, IdsAreSequential) {
  Rig rig(2);
  EXPECT_EQ(rig.am.register_handler([](HandlerContext&) {}), 0u);
  EXPECT_EQ(rig.am.register_handler([](HandlerContext&) {}), 1u);
}

TEST(AmRegistration, LateRegistrationIsLifecycleError) {
  Rig rig(2);
  const auto h = rig.am.register_handler([](HandlerContext& c) { c.reply(); });
  (void)rig.am.request(0, 1, h, {});
  EXPECT_THROW(rig.am.register_handler([](HandlerContext&) {}), LifecycleError);
}

TEST(AmRequest, OversizedArgsRejected) {
  Rig rig(2);
  const auto h = rig.am.register_handler([](HandlerContext& c) { c.reply(); });
  EXPECT_THROW((void)rig.am.request(0, 1, h, Bytes(65)), ArgumentError);
  EXPECT_NO_THROW((void)rig.am.request(0, 1, h, Bytes(64), Bytes(4096)));
  EXPECT_THROW((void)rig.am.request(0, 1, 7, {}), ArgumentError);
  EXPECT_THROW((void)rig.am.request(0, 2, h, {}), AddressError);
}

// Echo round trip with both sides polling costs 2*am_oneway + handler cost.
TEST(AmRequest, PollingRoundTripIsTwoFlightsPlusHandler) {
  Rig rig(2);
  const auto echo = rig.am.register_handler([](HandlerContext& c) { c.reply(c.args()); });
  std::int64_t finished = -1;
  std::uint64_t got = 0;
  bool done = false;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      const Bytes args = word_bytes(77);
      const Bytes reply = co_await rig.am.wait(0, rig.am.request(0, 1, echo, args));
      finished = ticks(rig.engine.now());
      got = word_of(reply);
      done = true;
      rig.am.notify(1);
    } else {
      co_await rig.am.poll_until(1, [&] { return done; });
    }
  });
  EXPECT_EQ(finished, 2 * 1500 + 2500);
  EXPECT_EQ(got, 77u);
  EXPECT_EQ(rig.am.completions(0), 1u);
  EXPECT_EQ(rig.am.handled(1), 1u);
}

TEST(AmRequest, HandlerExtraChargeDelaysReply) {
  auto cfg = LatencyConfig::defaults();
  cfg.am_handler = Duration{1000};
  Rig rig(2, cfg);
  const auto h = rig.am.register_handler([](HandlerContext& c) {
    c.charge(Duration{700});
    c.reply();
  });
  std::int64_t finished = -1;
  bool done = false;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      (void)co_await rig.am.wait(0, rig.am.request(0, 1, h, {}));
      finished = ticks(rig.engine.now());
      done = true;
      rig.am.notify(1);
    } else {
      co_await rig.am.poll_until(1, [&] { return done; });
    }
  });
  EXPECT_EQ(finished, 3000 + 1000 + 700);
}

TEST(AmRequest, HandlersOnOneRankAreSerialized) {
  Rig rig(3);
  const auto h = rig.am.register_handler([](HandlerContext& c) { c.reply(); });
  std::vector<std::int64_t> finish(3, -1);
  int done = 0;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 2) {
      co_await rig.am.poll_until(2, [&] { return done == 2; });
      co_return;
    }
    (void)co_await rig.am.wait(r, rig.am.request(r, 2, h, {}));
    finish[static_cast<std::size_t>(r)] = ticks(rig.engine.now());
    ++done;
    rig.am.notify(2);
  });
  EXPECT_EQ(finish[0], 5500);
  EXPECT_EQ(finish[1], 5500 + 2500);
}

TEST(AmReply, EmptyReplyCompletesWithoutData) {
  Rig rig(2);
  const auto h = rig.am.register_handler([](HandlerContext& c) { c.reply(); });
  Ticket t;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r != 0) co_return;
    t = rig.am.request(0, 1, h, {});
    co_await rig.am.compute(0, Duration{100000});  // target never polls; check it anyway below
  });
  EXPECT_FALSE(t.done());
  EXPECT_EQ(rig.am.completions(0), 0u);

  Rig rig2(2);
  const auto h2 = rig2.am.register_handler([](HandlerContext& c) { c.reply(); });
  bool done = false;
  rig2.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      t = rig2.am.request(0, 1, h2, {});
      (void)co_await rig2.am.wait(0, t);
      done = true;
      rig2.am.notify(1);
    } else {
      co_await rig2.am.poll_until(1, [&] { return done; });
    }
  });
  EXPECT_TRUE(t.done());
  EXPECT_TRUE(t.reply().empty());
  EXPECT_EQ(rig2.am.completions(0), 1u);
}

TEST(AmReply, MissingReplyNeverCompletes) {
  Rig rig(2);
  const auto silent = rig.am.register_handler([](HandlerContext&) {});
  bool done = false;
  EXPECT_THROW(rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      (void)co_await rig.am.wait(0, rig.am.request(0, 1, silent, {}));
      done = true;
    } else {
      co_await rig.am.poll_until(1, [&] { return done; });
    }
  }),
               Error);
  EXPECT_FALSE(done);
  EXPECT_EQ(rig.am.handled(1), 1u);
}

TEST(AmRestrictions, SecondReplyIsViolation) {
  Rig rig(2);
  const auto twice = rig.am.register_handler([](HandlerContext& c) {
    c.reply();
    c.reply();
  });
  bool done = false;
  EXPECT_THROW(rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      (void)co_await rig.am.wait(0, rig.am.request(0, 1, twice, {}));
      done = true;
    } else {
      co_await rig.am.poll_until(1, [&] { return done; });
    }
  }),
               RestrictionViolation);
}

TEST(AmRestrictions, NestedRequestIsViolation) {
  Rig rig(2);
  HandlerId self_id = 0;
  self_id = rig.am.register_handler([&](HandlerContext& c) { (void)rig.am.request(c.self(), c.origin(), self_id, {}); });
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) (void)rig.am.request(0, 1, self_id, {});
    co_return;
  });
  EXPECT_THROW(rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 1) (void)co_await rig.am.progress(1);
  }),
               RestrictionViolation);
  EXPECT_FALSE(rig.am.in_handler());
}

TEST(AmProgress, EmptyInboxServicesNothing) {
  Rig rig(1);
  std::size_t n = 99;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> { n = co_await rig.am.progress(r); });
  EXPECT_EQ(n, 0u);
}

TEST(AmProgress, ServicesArrivalsInOrder) {
  Rig rig(4);
  std::vector<Rank> order;
  const auto h = rig.am.register_handler([&](HandlerContext& c) { order.push_back(c.origin()); });
  std::size_t n = 0;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      co_await rig.am.compute(0, Duration{10000});
      n = co_await rig.am.progress(0);
    } else {
      co_await rig.am.compute(r, Duration{100 * (4 - r)});  // rank 3 sends first
      (void)rig.am.request(r, 0, h, {});
    }
  });
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(order, (std::vector<Rank>{3, 2, 1}));
  EXPECT_EQ(ticks(rig.engine.now()), 10000 + 3 * 2500);
}

TEST(AmProgress, ArrivalGatesService) {
  auto cfg = LatencyConfig::defaults();
  cfg.am_oneway = Duration{100};
  Rig rig(2, cfg);
  std::int64_t ran_at = -1;
  const auto h = rig.am.register_handler([&](HandlerContext& c) { ran_at = ticks(c.now()); });
  std::vector<std::size_t> counts;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 0) {
      (void)rig.am.request(0, 1, h, {});
      co_return;
    }
    co_await rig.am.compute(1, Duration{90});
    counts.push_back(co_await rig.am.progress(1));
    co_await rig.am.compute(1, Duration{20});
    counts.push_back(co_await rig.am.progress(1));
  });
  EXPECT_EQ(counts, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ran_at, 110);
}

// Property: a random request storm runs every handler exactly once and
// delivers every reply exactly once.
TEST(AmProperties, ExactlyOnceUnderRandomTraffic) {
  constexpr int ranks = 6, per_rank = 300;
  auto cfg = LatencyConfig::defaults();
  cfg.jitter_pct = 30.0;
  Rig rig(ranks, cfg);
  std::vector<int> handled_ids(ranks * per_rank, 0);
  const auto h = rig.am.register_handler([&](HandlerContext& c) {
    const auto id = word_of(c.args());
    ++handled_ids[id];
    c.charge(Duration{static_cast<std::int64_t>(id % 7) * 100});
    c.reply(c.args());
  });
  int finished = 0;
  std::vector<int> replies(ranks * per_rank, 0);
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    std::mt19937_64 rng(static_cast<std::uint64_t>(r) + 100);
    for (int i = 0; i < per_rank; ++i) {
      const std::uint64_t id = static_cast<std::uint64_t>(r) * per_rank + static_cast<std::uint64_t>(i);
      const Bytes args = word_bytes(id);
      auto ticket = rig.am.request(r, static_cast<Rank>(rng() % ranks), h, args);
      if (rng() % 3 == 0) co_await rig.am.compute(r, Duration{static_cast<std::int64_t>(rng() % 5000)});
      const Bytes got = co_await rig.am.wait(r, ticket);
      ++replies[word_of(got)];
    }
    ++finished;
    for (Rank t = 0; t < ranks; ++t) rig.am.notify(t);
    co_await rig.am.poll_until(r, [&] { return finished == ranks; });
  });
  for (int v : handled_ids) ASSERT_EQ(v, 1);
  for (int v : replies) ASSERT_EQ(v, 1);
  std::uint64_t total = 0;
  for (Rank r = 0; r < ranks; ++r) total += rig.am.completions(r);
  EXPECT_EQ(total, static_cast<std::uint64_t>(ranks * per_rank));
}

// One client, one host under `policy`; returns the mean round trip.
double mean_round_trip(AttentivenessPolicy policy, Duration d, int samples, std::uint64_t seed) {
  auto cfg = LatencyConfig::defaults();
  cfg.seed = seed;
  Rig rig(2, cfg);
  const auto h = rig.am.register_handler([](HandlerContext& c) { c.reply(); });
  bool done = false;
  std::int64_t total = 0;
  rig.fabric.run_spmd([&](Rank r) -> Task<void> {
    if (r == 1) {
      co_await rig.am.attend(1, policy, [&] { return done; });
      co_return;
    }
    std::mt19937_64 rng(seed);
    for (int i = 0; i < samples; ++i) {
      if (d.count() > 0) {
        const auto lo = d.count() / 2;
        co_await rig.am.compute(0, Duration{lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(d.count()))});
      }
      const auto start = rig.engine.now();
      (void)co_await rig.am.wait(0, rig.am.request(0, 1, h, {}));
      total += (rig.engine.now() - start).count();
    }
    done = true;
    rig.am.notify(1);
  });
  return static_cast<double>(total) / samples;
}

TEST(AmAttentiveness, ComputeInterleaveWaitsHalfTheBlock) {
  for (std::int64_t d : {2000, 8000, 32000}) {
    const double extra = mean_round_trip(AttentivenessPolicy::compute_interleave(Duration{d}), Duration{d}, 4000, 9) - 5500.0;
    EXPECT_NEAR(extra, d / 2.0, 0.05 * d / 2.0) << "d=" << d;
  }
}

TEST(AmAttentiveness, ProgressThreadIsFlatAndOffsetByPenalty) {
  for (std::int64_t d : {0, 4000, 64000}) {
    const double rt = mean_round_trip(AttentivenessPolicy::progress_thread(Duration{d}), Duration{d}, 200, 3);
    EXPECT_EQ(rt, 5500.0 + 500.0) << "d=" << d;
  }
  EXPECT_EQ(mean_round_trip(AttentivenessPolicy::progress_thread(Duration{1000}, Duration{1200}), Duration{1000}, 50, 3),
            5500.0 + 1200.0);
}

TEST(AmAttentiveness, PollLoopIsFlat) {
  for (std::int64_t d : {0, 4000, 64000}) {
    EXPECT_EQ(mean_round_trip(AttentivenessPolicy::poll_loop(), Duration{d}, 200, 3), 5500.0) << "d=" << d;
  }
}

}  // namespace
}  // namespace pgaslab::am
