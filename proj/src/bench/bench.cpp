// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/bench/bench.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "pgaslab/am/am.hpp"
#include "pgaslab/ds/am_structures.hpp"
#include "pgaslab/ds/hash_table.hpp"
#include "pgaslab/ds/queue.hpp"
#include "pgaslab/error.hpp"
#include "pgaslab/fabric/sim_fabric.hpp"
#include "pgaslab/util/format.hpp"

namespace pgaslab::bench {

namespace {

using ds::ConcurrencyLevel;
using fabric::Bytes;
using fabric::GlobalAddress;
using fabric::Rank;
using sim::Duration;

constexpr std::size_t segment_slack = 4096;
constexpr std::string_view csv_header = "workload,variant,P,local_size,ops,mean_ns,median_ns,p95_ns,attempts_mean,seed";

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E37'79B9'7F4A'7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58'476D'1CE4'E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D0'49BB'1331'11EBULL;
  return x ^ (x >> 31);
}

std::uint64_t rank_seed(std::uint64_t seed, Rank r) noexcept {
  return splitmix64(seed ^ (0xA24B'AED4'963E'E407ULL * static_cast<std::uint64_t>(r + 1)));
}

Bytes u64_bytes(std::uint64_t v) {
  Bytes out(8);
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::byte>(v >> (8 * i));
  return out;
}

std::uint64_t u64_of(std::span<const std::byte> b) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8 && i < b.size(); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const std::vector<std::string> component_ids{"put",          "get", "cas_single",     "cas_persistent",
                                             "fad",          "fad_single_var", "am_rt"};

const std::map<std::string, std::vector<std::string>>& ds_variants() {
  static const std::map<std::string, std::vector<std::string>> v{
      {"ht_insert", {"CRW", "CW", "AM"}},
      {"ht_find", {"CRW", "CR", "AM"}},
      {"q_push", {"CRW", "CW", "CLOCAL", "checksum", "AM"}},
      {"q_pop", {"CRW", "CR", "CLOCAL", "checksum", "AM"}},
  };
  return v;
}

std::string ds_id(const std::string& family, const std::string& variant) {
  if (variant == "AM") return "am_" + family;
  return family + "_" + lower(variant);
}

void validate(const WorkloadSpec& spec) {
  if (spec.procs < 1) throw UsageError("need at least one rank");
  if (spec.local_size == 0) throw UsageError("local size must be positive");
  if (spec.ops == 0) throw UsageError("op count must be positive");
  spec.config.validate();
}

// Per-operation latencies and attempt counts of one run.
struct Collector {
  std::vector<std::int64_t> latencies;
  double attempts = 0.0;

  void add(Duration latency, double attempt_count) {
    latencies.push_back(latency.count());
    attempts += attempt_count;
  }
};

// Nearest-rank percentile of an unsorted sample, p in (0, 100].
std::int64_t nearest_rank(std::vector<std::int64_t>& v, double p) {
  if (v.empty()) return 0;
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  auto nth = v.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(v.begin(), nth, v.end());
  return *nth;
}

BenchRecord make_record(const WorkloadName& name, int procs, std::uint64_t local_size, Collector& c,
                        std::uint64_t seed) {
  BenchRecord r;
  r.workload = name.family;
  r.variant = name.variant;
  r.procs = procs;
  r.local_size = local_size;
  r.ops = c.latencies.size();
  r.seed = seed;
  if (c.latencies.empty()) return r;
  std::int64_t total = 0;
  for (auto l : c.latencies) total += l;
  const auto n = static_cast<double>(c.latencies.size());
  r.mean_ns = static_cast<double>(total) / n;
  r.attempts_mean = c.attempts / n;
  r.median_ns = nearest_rank(c.latencies, 50.0);
  r.p95_ns = nearest_rank(c.latencies, 95.0);
  return r;
}

struct Sim {
  Sim(const sim::LatencyConfig& config, int procs, std::size_t segment_bytes)
      : engine(config.seed), fabric(engine, config, procs, segment_bytes) {}
  sim::Engine engine;
  fabric::SimFabric fabric;
};

// Collects failed post-hoc checks; run_ds throws instead of reporting.
struct Checks {
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 8) failures.push_back(what);
  }
  void raise_if_failed(const std::string& workload) const {
    if (failures.empty()) return;
    std::string msg = workload + ": post-hoc check failed: " + failures.front();
    if (failures.size() > 1) msg += " (+" + std::to_string(failures.size() - 1) + " more)";
    throw InvariantViolation(msg);
  }
};

// Releases every rank from an active-message phase once all have arrived.
// Ranks keep servicing requests while they wait, unlike a fabric barrier.
struct AmQuiesce {
  am::AmEngine& am;
  int arrived = 0;
  int epoch = 0;

  Task<void> arrive(Rank self) {
    const int my_epoch = epoch;
    if (++arrived == am.size()) {
      arrived = 0;
      ++epoch;
      for (Rank q = 0; q < am.size(); ++q) am.notify(q);
    }
    co_await am.poll_until(self, [this, my_epoch] { return epoch != my_epoch; });
  }
};

Duration since(const Sim& s, sim::VirtualTime start) { return s.engine.now() - start; }

// Components.

BenchRecord run_am_rt(const WorkloadSpec& spec, const WorkloadName& name, const sim::LatencyConfig& cfg,
                      std::uint64_t seed) {
  const int P = spec.procs;
  const std::uint64_t per_rank = std::max<std::uint64_t>(1, spec.ops / static_cast<std::uint64_t>(P));
  Sim s(cfg, P, segment_slack);
  am::AmEngine am(s.fabric);
  const auto echo = am.register_handler([](am::HandlerContext& ctx) { ctx.reply(); });
  AmQuiesce done{am};
  Collector c;
  s.fabric.run_spmd([&](Rank r) -> Task<void> {
    std::mt19937_64 rng(rank_seed(seed, r));
    for (std::uint64_t i = 0; i < per_rank; ++i) {
      const auto target = static_cast<Rank>(rng() % static_cast<std::uint64_t>(P));
      const auto start = s.engine.now();
      const am::Ticket t = am.request(r, target, echo, {});
      (void)co_await am.wait(r, t);
      c.add(since(s, start), 1.0);
    }
    co_await done.arrive(r);
  });
  return make_record(name, P, spec.local_size, c, seed);
}

}  // namespace

WorkloadName parse_workload(std::string_view id) {
  const std::string s = lower(id);
  if (std::find(component_ids.begin(), component_ids.end(), s) != component_ids.end()) {
    return {s, s == "am_rt" ? "am" : "rdma", true};
  }
  for (const auto& [family, variants] : ds_variants()) {
    for (const auto& v : variants) {
      if (s == ds_id(family, v)) return {family, v, false};
    }
  }
  throw UsageError("unknown workload '" + std::string(id) + "'");
}

std::vector<std::string> component_workloads() { return component_ids; }

std::vector<std::string> ds_workloads() {
  std::vector<std::string> out;
  for (const char* family : {"ht_insert", "ht_find", "q_push", "q_pop"}) {
    for (const auto& v : ds_variants().at(family)) out.push_back(ds_id(family, v));
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view family, std::string_view variant) {
  std::string key(family);
  key += ':';
  key += variant;
  return splitmix64(master ^ ds::hash_key(std::as_bytes(std::span(key.data(), key.size()))));
}

BenchRecord run_component(const WorkloadSpec& spec) {
  validate(spec);
  const WorkloadName name = parse_workload(spec.workload);
  if (!name.component) throw UsageError("'" + spec.workload + "' is not a component workload");
  const std::uint64_t seed = derive_seed(spec.seed, name.family, name.variant);
  auto cfg = spec.config;
  cfg.seed = seed;
  if (name.family == "am_rt") return run_am_rt(spec, name, cfg, seed);

  const int P = spec.procs;
  const std::uint64_t words = spec.local_size;
  const std::uint64_t per_rank = std::max<std::uint64_t>(1, spec.ops / static_cast<std::uint64_t>(P));
  const bool single_var = name.family == "fad_single_var";
  Sim s(cfg, P, words * 8 + segment_slack);
  const std::uint64_t base = s.fabric.allocate(words * 8);
  Collector c;
  s.fabric.run_spmd([&](Rank r) -> Task<void> {
    std::mt19937_64 rng(rank_seed(seed, r));
    // cas_persistent: last value this rank saw per word (segments start at 0).
    std::unordered_map<std::uint64_t, std::uint64_t> seen;
    for (std::uint64_t i = 0; i < per_rank; ++i) {
      const auto target = static_cast<Rank>(rng() % static_cast<std::uint64_t>(P));
      const std::uint64_t word = single_var ? 0 : rng() % words;
      const GlobalAddress addr{target, base + word * 8, 8};
      double attempts = 1.0;
      const auto start = s.engine.now();
      if (name.family == "put") {
        const Bytes v = u64_bytes(i);
        co_await s.fabric.rput(r, addr, v);
      } else if (name.family == "get") {
        (void)co_await s.fabric.rget(r, addr, 8);
      } else if (name.family == "cas_single") {
        (void)co_await s.fabric.cas(r, addr, 0, static_cast<std::uint64_t>(r) + 1);
      } else if (name.family == "cas_persistent") {
        auto& expected = seen[static_cast<std::uint64_t>(target) * words + word];
        attempts = 0.0;
        for (;;) {
          attempts += 1.0;
          const std::uint64_t old = co_await s.fabric.cas(r, addr, expected, expected + 1);
          if (old == expected) {
            expected = old + 1;
            break;
          }
          expected = old;
        }
      } else {
        (void)co_await s.fabric.fao(r, addr, fabric::FaoOp::add, 1);
      }
      c.add(since(s, start), attempts);
    }
  });
  return make_record(name, P, spec.local_size, c, seed);
}

namespace {

// Hash workloads.

struct KeyPlan {
  // keys[round][rank]
  std::vector<std::vector<std::vector<std::uint64_t>>> keys;
};

std::uint64_t value_for(std::uint64_t key) noexcept { return splitmix64(key ^ 0x5EED'0F0F'5EED'0F0FULL); }

// Keys whose home buckets are pairwise distinct within a round, so inserts
// never probe. A round places at most half of the buckets.
KeyPlan plan_keys(const ds::HashTable& table, int procs, std::uint64_t per_rank, std::uint64_t seed) {
  const std::uint64_t N = table.buckets();
  const std::uint64_t round_cap = std::max<std::uint64_t>(1, N / (2 * static_cast<std::uint64_t>(procs)));
  KeyPlan plan;
  std::uint64_t counter = 0;
  std::uint64_t remaining = per_rank;
  while (remaining > 0) {
    const std::uint64_t k = std::min(remaining, round_cap);
    remaining -= k;
    std::vector<bool> used(N, false);
    auto& round = plan.keys.emplace_back(static_cast<std::size_t>(procs));
    for (int r = 0; r < procs; ++r) {
      auto& mine = round[static_cast<std::size_t>(r)];
      while (mine.size() < k) {
        const std::uint64_t key = splitmix64(seed + ++counter);
        const Bytes kb = u64_bytes(key);
        const std::uint64_t home = table.home_bucket(kb);
        if (used[home]) continue;
        used[home] = true;
        mine.push_back(key);
      }
    }
  }
  return plan;
}

std::size_t hash_segment(const WorkloadSpec& spec) {
  const auto layout = ds::BucketLayout::for_sizes(8, 8);
  return spec.local_size * layout.stride + segment_slack;
}

BenchRecord run_ht_insert(const WorkloadSpec& spec, const WorkloadName& name, const sim::LatencyConfig& cfg,
                          std::uint64_t seed) {
  const int P = spec.procs;
  const std::uint64_t per_rank = std::max<std::uint64_t>(1, spec.ops / static_cast<std::uint64_t>(P));
  const ds::HashTableConfig hc{spec.local_size * static_cast<std::uint64_t>(P), 8, 8};
  Sim s(cfg, P, hash_segment(spec));
  ds::HashTable table(s.fabric, hc);
  const KeyPlan plan = plan_keys(table, P, per_rank, seed);
  Collector c;
  Checks checks;
  const bool am_variant = name.variant == "AM";

  if (am_variant) {
    am::AmEngine am(s.fabric);
    ds::AmHashTable amt(am, hc);
    AmQuiesce quiet{am};
    s.fabric.run_spmd([&](Rank r) -> Task<void> {
      for (std::size_t round = 0; round < plan.keys.size(); ++round) {
        for (std::uint64_t key : plan.keys[round][static_cast<std::size_t>(r)]) {
          const Bytes kb = u64_bytes(key), vb = u64_bytes(value_for(key));
          const auto start = s.engine.now();
          const bool ok = co_await amt.insert(r, kb, vb);
          c.add(since(s, start), 1.0);
          checks.expect(ok, "AM insert failed");
        }
        co_await quiet.arrive(r);
        co_await s.fabric.barrier(r);
        if (r == 0) {
          std::uint64_t stored = 0, placed = 0;
          for (Rank q = 0; q < P; ++q) stored += amt.occupancy(q);
          for (const auto& mine : plan.keys[round]) placed += mine.size();
          checks.expect(stored == placed, "AM table holds " + std::to_string(stored) + " of " +
                                              std::to_string(placed) + " inserted keys");
          for (const auto& mine : plan.keys[round]) {
            for (std::uint64_t key : mine) {
              const Bytes kb = u64_bytes(key);
              const auto got = amt.peek(kb);
              checks.expect(got && u64_of(*got) == value_for(key), "AM table lost a key or holds a wrong value");
            }
          }
          for (Rank q = 0; q < P; ++q) amt.clear(q);
        }
        co_await s.fabric.barrier(r);
      }
    });
  } else {
    const ConcurrencyLevel level = ds::parse_level(name.variant);
    s.fabric.run_spmd([&](Rank r) -> Task<void> {
      for (std::size_t round = 0; round < plan.keys.size(); ++round) {
        for (std::uint64_t key : plan.keys[round][static_cast<std::size_t>(r)]) {
          const Bytes kb = u64_bytes(key), vb = u64_bytes(value_for(key));
          const auto start = s.engine.now();
          const auto res = co_await table.insert(r, kb, vb, level);
          c.add(since(s, start), static_cast<double>(res.attempts));
          checks.expect(res.success && res.bucket == table.home_bucket(kb), "insert did not land in its home bucket");
        }
        co_await s.fabric.barrier(r);
        if (r == 0) {
          for (const auto& mine : plan.keys[round]) {
            for (std::uint64_t key : mine) {
              const Bytes kb = u64_bytes(key);
              const std::uint64_t b = table.home_bucket(kb);
              checks.expect((table.peek_flag(b) & ds::flag_state_mask) == ds::flag_ready, "bucket not READY");
              checks.expect(table.peek_key(b) == kb, "bucket holds a different key");
              checks.expect(u64_of(table.peek_value(b)) == value_for(key), "bucket holds a torn or wrong value");
            }
          }
          for (Rank q = 0; q < P; ++q) table.clear(q);
        }
        co_await s.fabric.barrier(r);
      }
    });
  }
  checks.raise_if_failed(ds_id(name.family, name.variant));
  return make_record(name, P, spec.local_size, c, seed);
}

BenchRecord run_ht_find(const WorkloadSpec& spec, const WorkloadName& name, const sim::LatencyConfig& cfg,
                        std::uint64_t seed) {
  const int P = spec.procs;
  const std::uint64_t per_rank = std::max<std::uint64_t>(1, spec.ops / static_cast<std::uint64_t>(P));
  const ds::HashTableConfig hc{spec.local_size * static_cast<std::uint64_t>(P), 8, 8};
  Sim s(cfg, P, hash_segment(spec));
  ds::HashTable table(s.fabric, hc);
  // One round of stored keys; finds pick among them at random.
  const KeyPlan plan = plan_keys(table, P, std::min(per_rank, hc.buckets / (2 * static_cast<std::uint64_t>(P))), seed);
  const auto& stored = plan.keys.front();
  std::vector<std::uint64_t> all_keys;
  for (const auto& mine : stored) all_keys.insert(all_keys.end(), mine.begin(), mine.end());
  Collector c;
  Checks checks;
  const bool am_variant = name.variant == "AM";

  if (am_variant) {
    am::AmEngine am(s.fabric);
    ds::AmHashTable amt(am, hc);
    AmQuiesce quiet{am};
    s.fabric.run_spmd([&](Rank r) -> Task<void> {
      for (std::uint64_t key : stored[static_cast<std::size_t>(r)]) {
        const Bytes kb = u64_bytes(key), vb = u64_bytes(value_for(key));
        const bool ok = co_await amt.insert(r, kb, vb);
        checks.expect(ok, "AM setup insert failed");
      }
      co_await quiet.arrive(r);
      std::mt19937_64 rng(rank_seed(seed, r));
      for (std::uint64_t i = 0; i < per_rank; ++i) {
        const std::uint64_t key = all_keys[rng() % all_keys.size()];
        const Bytes kb = u64_bytes(key);
        const auto start = s.engine.now();
        const auto got = co_await amt.find(r, kb);
        c.add(since(s, start), 1.0);
        checks.expect(got && u64_of(*got) == value_for(key), "AM find missed or returned a wrong value");
      }
      co_await quiet.arrive(r);
    });
  } else {
    const ConcurrencyLevel level = ds::parse_level(name.variant);
    s.fabric.run_spmd([&](Rank r) -> Task<void> {
      for (std::uint64_t key : stored[static_cast<std::size_t>(r)]) {
        const Bytes kb = u64_bytes(key), vb = u64_bytes(value_for(key));
        const auto res = co_await table.insert(r, kb, vb, ConcurrencyLevel::CW);
        checks.expect(res.success, "setup insert failed");
      }
      co_await s.fabric.barrier(r);
      std::mt19937_64 rng(rank_seed(seed, r));
      for (std::uint64_t i = 0; i < per_rank; ++i) {
        const std::uint64_t key = all_keys[rng() % all_keys.size()];
        const Bytes kb = u64_bytes(key);
        const auto start = s.engine.now();
        const auto res = co_await table.find(r, kb, level);
        c.add(since(s, start), 1.0 + static_cast<double>(res.attempts));
        checks.expect(res.value && u64_of(*res.value) == value_for(key), "find missed or returned a wrong value");
      }
    });
  }
  checks.raise_if_failed(ds_id(name.family, name.variant));
  return make_record(name, P, spec.local_size, c, seed);
}

// Queue workloads.

struct QueueRig {
  QueueRig(const WorkloadSpec& spec, const WorkloadName& name, const sim::LatencyConfig& cfg)
      : stride(name.variant == "checksum" ? 16 : 8),
        sim(cfg, spec.procs, spec.local_size * stride + segment_slack),
        queue(sim.fabric, ds::QueueConfig{0, spec.local_size, 8, name.variant == "checksum"}) {
    if (name.variant == "CLOCAL" || spec.procs == 1) {
      clients.push_back(0);
    } else {
      for (Rank r = 1; r < spec.procs; ++r) clients.push_back(r);
    }
  }
  bool is_client(Rank r) const { return std::find(clients.begin(), clients.end(), r) != clients.end(); }

  std::size_t stride;
  Sim sim;
  ds::HostedQueue queue;
  std::vector<Rank> clients;
};

std::uint64_t item_value(Rank r, std::uint64_t seq) noexcept { return (static_cast<std::uint64_t>(r) << 40) | seq; }

std::multiset<std::uint64_t> drain(ds::HostedQueue& q) {
  std::multiset<std::uint64_t> out;
  while (auto got = q.host_pop(1)) out.insert(u64_of(*got));
  return out;
}

BenchRecord run_q_push(const WorkloadSpec& spec, const WorkloadName& name, const sim::LatencyConfig& cfg,
                       std::uint64_t seed) {
  QueueRig rig(spec, name, cfg);
  auto& s = rig.sim;
  auto& q = rig.queue;
  const auto n_clients = static_cast<std::uint64_t>(rig.clients.size());
  const std::uint64_t per_client = std::max<std::uint64_t>(1, spec.ops / n_clients);
  const std::uint64_t round_cap = std::max<std::uint64_t>(1, spec.local_size / n_clients);
  const std::uint64_t rounds = (per_client + round_cap - 1) / round_cap;
  const bool am_variant = name.variant == "AM";
  std::optional<am::AmEngine> am;
  std::optional<ds::AmQueue> amq;
  std::optional<AmQuiesce> quiet;
  if (am_variant) {
    am.emplace(s.fabric);
    amq.emplace(*am, q);
    quiet.emplace(AmQuiesce{*am});
  }
  Collector c;
  Checks checks;
  std::multiset<std::uint64_t> pushed;
  s.fabric.run_spmd([&](Rank r) -> Task<void> {
    std::uint64_t seq = 0;
    for (std::uint64_t round = 0; round < rounds; ++round) {
      const std::uint64_t k = std::min(round_cap, per_client - round * round_cap);
      if (rig.is_client(r)) {
        for (std::uint64_t i = 0; i < k; ++i) {
          const std::uint64_t v = item_value(r, seq++);
          const Bytes item = u64_bytes(v);
          const auto start = s.engine.now();
          bool ok = false;
          double attempts = 1.0;
          if (am_variant) {
            ok = co_await amq->push(r, item);
          } else if (name.variant == "checksum") {
            const auto res = co_await q.push_checksum(r, item);
            ok = res.success;
          } else {
            const auto level = ds::parse_level(name.variant);
            const auto res = co_await q.push(r, item, level);
            ok = res.success;
            if (level == ConcurrencyLevel::CRW) attempts = static_cast<double>(res.commit_attempts);
          }
          c.add(since(s, start), attempts);
          checks.expect(ok, "push to a queue with room failed");
          if (ok) pushed.insert(v);
        }
      }
      if (am_variant) co_await quiet->arrive(r);
      co_await q.phase_barrier(r);
      if (r == 0) {
        checks.expect(drain(q) == pushed, "popped multiset differs from pushed multiset");
        pushed.clear();
      }
      co_await q.phase_barrier(r);
    }
  });
  checks.raise_if_failed(ds_id(name.family, name.variant));
  return make_record(name, spec.procs, spec.local_size, c, seed);
}

BenchRecord run_q_pop(const WorkloadSpec& spec, const WorkloadName& name, const sim::LatencyConfig& cfg,
                      std::uint64_t seed) {
  QueueRig rig(spec, name, cfg);
  auto& s = rig.sim;
  auto& q = rig.queue;
  const auto n_clients = static_cast<std::uint64_t>(rig.clients.size());
  const std::uint64_t per_client = std::max<std::uint64_t>(1, spec.ops / n_clients);
  const std::uint64_t round_cap = std::max<std::uint64_t>(1, spec.local_size / n_clients);
  const std::uint64_t rounds = (per_client + round_cap - 1) / round_cap;
  const bool am_variant = name.variant == "AM";
  std::optional<am::AmEngine> am;
  std::optional<ds::AmQueue> amq;
  std::optional<AmQuiesce> quiet;
  if (am_variant) {
    am.emplace(s.fabric);
    amq.emplace(*am, q);
    quiet.emplace(AmQuiesce{*am});
  }
  Collector c;
  Checks checks;
  std::multiset<std::uint64_t> filled, popped;
  std::uint64_t seq = 0;
  s.fabric.run_spmd([&](Rank r) -> Task<void> {
    for (std::uint64_t round = 0; round < rounds; ++round) {
      const std::uint64_t k = std::min(round_cap, per_client - round * round_cap);
      if (r == 0) {
        for (std::uint64_t i = 0; i < k * n_clients; ++i) {
          const std::uint64_t v = item_value(0, seq++);
          const Bytes item = u64_bytes(v);
          checks.expect(q.host_push(item), "setup push failed");
          filled.insert(v);
        }
      }
      co_await q.phase_barrier(r);
      if (rig.is_client(r)) {
        for (std::uint64_t i = 0; i < k; ++i) {
          const auto start = s.engine.now();
          std::optional<Bytes> got;
          double attempts = 1.0;
          if (am_variant) {
            got = co_await amq->pop(r, 1);
          } else if (name.variant == "checksum") {
            auto res = co_await q.pop_checksum(r, 1);
            attempts = static_cast<double>(res.commit_attempts);
            got = std::move(res.items);
          } else {
            const auto level = ds::parse_level(name.variant);
            auto res = co_await q.pop(r, 1, level);
            if (level == ConcurrencyLevel::CRW) attempts = static_cast<double>(res.commit_attempts);
            got = std::move(res.items);
          }
          c.add(since(s, start), attempts);
          checks.expect(got.has_value(), "pop from a non-empty queue failed");
          if (got) popped.insert(u64_of(*got));
        }
      }
      if (am_variant) co_await quiet->arrive(r);
      co_await q.phase_barrier(r);
      if (r == 0) {
        checks.expect(popped == filled, "popped multiset differs from pushed multiset");
        checks.expect(!q.host_pop(1), "queue not empty after every pushed item was popped");
        filled.clear();
        popped.clear();
      }
      co_await q.phase_barrier(r);
    }
  });
  checks.raise_if_failed(ds_id(name.family, name.variant));
  return make_record(name, spec.procs, spec.local_size, c, seed);
}

}  // namespace

BenchRecord run_ds(const WorkloadSpec& spec) {
  validate(spec);
  const WorkloadName name = parse_workload(spec.workload);
  if (name.component) throw UsageError("'" + spec.workload + "' is not a data-structure workload");
  const std::uint64_t seed = derive_seed(spec.seed, name.family, name.variant);
  auto cfg = spec.config;
  cfg.seed = seed;
  if (name.family == "ht_insert") return run_ht_insert(spec, name, cfg, seed);
  if (name.family == "ht_find") return run_ht_find(spec, name, cfg, seed);
  if (name.family == "q_push") return run_q_push(spec, name, cfg, seed);
  return run_q_pop(spec, name, cfg, seed);
}

BenchRecord run_workload(const WorkloadSpec& spec) {
  return parse_workload(spec.workload).component ? run_component(spec) : run_ds(spec);
}

std::string attentiveness_variant(std::string_view mode, std::int64_t compute_us) {
  return std::string(mode) + "/d=" + std::to_string(compute_us) + "us";
}

std::vector<BenchRecord> run_attentiveness(const AttentivenessSpec& spec) {
  if (spec.samples == 0) throw UsageError("attentiveness needs at least one sample");
  spec.config.validate();
  for (const auto& m : spec.modes) {
    if (m != "am_poll" && m != "am_pt" && m != "rdma_cw") throw UsageError("unknown attentiveness mode '" + m + "'");
  }
  for (auto d : spec.compute_us) {
    if (d < 0) throw UsageError("compute time must be >= 0");
  }
  std::vector<BenchRecord> out;
  for (const auto& mode : spec.modes) {
    for (const std::int64_t d_us : spec.compute_us) {
      const WorkloadName name{"attentiveness", attentiveness_variant(mode, d_us), false};
      const std::uint64_t seed = derive_seed(spec.seed, name.family, name.variant);
      auto cfg = spec.config;
      cfg.seed = seed;
      const Duration d{d_us * 1000};
      const std::uint64_t capacity = std::max(spec.local_size, spec.samples);
      Sim s(cfg, 2, capacity * 8 + segment_slack);
      ds::HostedQueue q(s.fabric, ds::QueueConfig{1, capacity, 8, false});
      am::AmEngine am(s.fabric);
      ds::AmQueue amq(am, q);
      am::AttentivenessPolicy policy;
      if (mode == "am_pt") policy = am::AttentivenessPolicy::progress_thread(d);
      else if (d.count() > 0) policy = am::AttentivenessPolicy::compute_interleave(d);
      bool done = false;
      Collector c;
      Checks checks;
      s.fabric.run_spmd([&](Rank r) -> Task<void> {
        if (r == 1) {
          co_await am.attend(1, policy, [&done] { return done; });
          co_return;
        }
        std::mt19937_64 rng(rank_seed(seed, r));
        for (std::uint64_t i = 0; i < spec.samples; ++i) {
          if (d.count() > 0) {
            const auto offset = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(d.count()));
            co_await am.compute(0, Duration{d.count() / 2 + offset});
          }
          const Bytes item = u64_bytes(i);
          const auto start = s.engine.now();
          bool ok = false;
          if (mode == "rdma_cw") {
            const auto res = co_await q.push(0, item, ConcurrencyLevel::CW);
            ok = res.success;
          } else {
            ok = co_await amq.push(0, item);
          }
          c.add(since(s, start), 1.0);
          checks.expect(ok, "push failed");
        }
        done = true;
        am.notify(1);
      });
      const auto counters = q.counters();
      checks.expect(counters.tail == spec.samples, "queue tail does not match the pushes issued");
      checks.raise_if_failed("attentiveness " + name.variant);
      out.push_back(make_record(name, 2, capacity, c, seed));
    }
  }
  return out;
}

std::vector<BenchRecord> run_suite(const SuiteOptions& options) {
  std::vector<BenchRecord> out;
  WorkloadSpec spec;
  spec.procs = options.procs;
  spec.local_size = options.local_size;
  spec.ops = options.ops;
  spec.seed = options.seed;
  spec.config = options.config;
  for (const auto& w : component_workloads()) {
    spec.workload = w;
    out.push_back(run_component(spec));
  }
  for (const auto& w : ds_workloads()) {
    spec.workload = w;
    out.push_back(run_ds(spec));
  }
  if (options.attentiveness) {
    AttentivenessSpec a;
    a.samples = options.ops;
    a.local_size = options.local_size;
    a.seed = options.seed;
    a.config = options.config;
    for (auto& r : run_attentiveness(a)) out.push_back(std::move(r));
  }
  return out;
}

std::string to_csv(const std::vector<BenchRecord>& records) {
  std::string out(csv_header);
  out += '\n';
  for (const auto& r : records) {
    out += r.workload + "," + r.variant + "," + std::to_string(r.procs) + "," + std::to_string(r.local_size) + "," +
           std::to_string(r.ops) + "," + util::format_fixed(r.mean_ns, 3) + "," + std::to_string(r.median_ns) + "," +
           std::to_string(r.p95_ns) + "," + util::format_fixed(r.attempts_mean, 4) + "," + std::to_string(r.seed) +
           "\n";
  }
  return out;
}

std::string to_table(const std::vector<BenchRecord>& records) {
  std::vector<std::vector<std::string>> rows{
      {"workload", "variant", "P", "local_size", "ops", "mean_ns", "median_ns", "p95_ns", "attempts", "seed"}};
  for (const auto& r : records) {
    rows.push_back({r.workload, r.variant, std::to_string(r.procs), std::to_string(r.local_size),
                    std::to_string(r.ops), util::format_fixed(r.mean_ns, 1), std::to_string(r.median_ns),
                    std::to_string(r.p95_ns), util::format_fixed(r.attempts_mean, 3), std::to_string(r.seed)});
  }
  return util::aligned_table(rows, 2);
}

namespace {

template <typename T>
T csv_number(std::string_view field, std::size_t line) {
  T v{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ArgumentError("CSV line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

std::vector<BenchRecord> parse_csv(std::string_view text) {
  std::vector<BenchRecord> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != csv_header) throw ArgumentError("CSV header does not match the benchmark schema");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    for (std::size_t pos = 0;;) {
      const auto comma = line.find(',', pos);
      f.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (f.size() != 10) throw ArgumentError("CSV line " + std::to_string(line_no) + ": expected 10 fields");
    BenchRecord r;
    r.workload = std::string(f[0]);
    r.variant = std::string(f[1]);
    r.procs = csv_number<int>(f[2], line_no);
    r.local_size = csv_number<std::uint64_t>(f[3], line_no);
    r.ops = csv_number<std::uint64_t>(f[4], line_no);
    r.mean_ns = csv_number<double>(f[5], line_no);
    r.median_ns = csv_number<std::int64_t>(f[6], line_no);
    r.p95_ns = csv_number<std::int64_t>(f[7], line_no);
    r.attempts_mean = csv_number<double>(f[8], line_no);
    r.seed = csv_number<std::uint64_t>(f[9], line_no);
    out.push_back(std::move(r));
  }
  if (line_no == 0) throw ArgumentError("CSV is empty");
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace pgaslab::bench
