// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace pgaslab::bench {

// One measured row. mean_ns is total timed virtual time over all ranks'
// completed operations; median and p95 are nearest-rank over per-operation
// latencies.
struct BenchRecord {
  std::string workload;
  std::string variant;
  int procs = 1;
  std::uint64_t local_size = 0;
  std::uint64_t ops = 0;
  double mean_ns = 0.0;
  std::int64_t median_ns = 0;
  std::int64_t p95_ns = 0;
  double attempts_mean = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

}  // namespace pgaslab::bench
