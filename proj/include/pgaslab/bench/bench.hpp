// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pgaslab/bench/record.hpp"
#include "pgaslab/sim/latency.hpp"

namespace pgaslab::bench {

inline constexpr std::uint64_t default_local_size = 100'000;
inline constexpr std::uint64_t default_ops = 1'000'000;
inline constexpr std::uint64_t desk_ops = 10'000;

// Parsed workload id. Component ids map to (id, "rdma") except am_rt which
// maps to (am_rt, "am"); data-structure ids such as "ht_insert_crw",
// "q_pop_checksum" or "am_q_push" map to (family, variant) with variant one
// of CRW, CW, CR, CLOCAL, checksum, AM.
struct WorkloadName {
  std::string family;
  std::string variant;
  bool component = false;
};

// Throws UsageError for an unknown id or an unsupported family/variant pair.
WorkloadName parse_workload(std::string_view id);
std::vector<std::string> component_workloads();
std::vector<std::string> ds_workloads();

struct WorkloadSpec {
  std::string workload;
  int procs = 2;
  std::uint64_t local_size = default_local_size;  // elements per rank (queue: capacity)
  std::uint64_t ops = default_ops;                // timed operations, summed over active ranks
  std::uint64_t seed = 1;                         // master seed
  sim::LatencyConfig config = sim::LatencyConfig::defaults();
};

// Seed of one (workload, variant) run: splitmix64(master ^ fnv1a("family:variant")).
std::uint64_t derive_seed(std::uint64_t master, std::string_view family, std::string_view variant);

// Every rank repeatedly targets a random word of a random rank's array
// (self included). fad_single_var uses one word per rank. cas_persistent
// swaps the last value this rank saw for that value + 1, retrying with the
// value returned until it succeeds.
BenchRecord run_component(const WorkloadSpec& spec);

// Hash workloads use P x local_size buckets and collision-free keys, in
// rounds that fill at most half the table, each checked and then cleared
// untimed. Queue workloads host the queue on rank 0 with every other rank a
// client (CLOCAL: the host alone). Each round is checked for conservation.
// Throws InvariantViolation instead of returning timings when a check fails.
BenchRecord run_ds(const WorkloadSpec& spec);

// Dispatches to run_component or run_ds.
BenchRecord run_workload(const WorkloadSpec& spec);

struct AttentivenessSpec {
  std::vector<std::int64_t> compute_us{1, 2, 4, 8, 16, 32, 64};
  // am_poll, am_pt, rdma_cw
  std::vector<std::string> modes{"am_poll", "am_pt", "rdma_cw"};
  std::uint64_t samples = 10'000;
  std::uint64_t local_size = default_local_size;
  std::uint64_t seed = 1;
  sim::LatencyConfig config = sim::LatencyConfig::defaults();
};

std::string attentiveness_variant(std::string_view mode, std::int64_t compute_us);

// One client pushes to a queue hosted on a second rank that alternates
// d-microsecond compute blocks with progress (am_poll), runs a progress
// thread beside the compute (am_pt), or is pushed to over RDMA at CW
// (rdma_cw). Before each timed push the client computes for a uniform
// random time in [d/2, 3d/2), which randomizes its phase against the host.
// Records hold push latency only (workload "attentiveness", variant
// attentiveness_variant(mode, d)).
std::vector<BenchRecord> run_attentiveness(const AttentivenessSpec& spec);

struct SuiteOptions {
  int procs = 8;
  std::uint64_t local_size = default_local_size;
  std::uint64_t ops = default_ops;
  std::uint64_t seed = 1;
  sim::LatencyConfig config = sim::LatencyConfig::defaults();
  bool attentiveness = true;
};

// Every component workload, every data-structure workload and (optionally)
// the attentiveness sweep, in that order.
std::vector<BenchRecord> run_suite(const SuiteOptions& options);

// workload,variant,P,local_size,ops,mean_ns,median_ns,p95_ns,attempts_mean,seed
std::string to_csv(const std::vector<BenchRecord>& records);
std::string to_table(const std::vector<BenchRecord>& records);
// Inverse of to_csv. Throws ArgumentError on a wrong header or a malformed row.
std::vector<BenchRecord> parse_csv(std::string_view text);

// Throw IoError when the file cannot be written or read.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace pgaslab::bench
