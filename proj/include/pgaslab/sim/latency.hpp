// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgaslab/sim/engine.hpp"

namespace pgaslab::sim {

// Cost components of the model: W, R, A_CAS, A_FAO, one-way AM, local op ℓ.
enum class Component { put, get, cas, fao, am_oneway, local };

// Accepts the model symbols ("W", "R", "A_CAS", "A_FAO", "AM", "l") and the
// config key stems ("put", "get", ...). Throws ConfigError otherwise.
Component parse_component(std::string_view name);
std::string_view symbol(Component c) noexcept;

// Per-component latencies. Defaults are measured component costs of a
// dragonfly-network machine (put 3.0, get 3.7, CAS 3.8, FAO 3.9 us).
//
// Invented placeholders, fit these to your machine:
//   am_oneway   1500 ns
//   local_op    2500 ns  (ℓ; also the default AM handler service cost)
//   barrier    10000 ns
//   progress_thread_penalty 500 ns
struct LatencyConfig {
  Duration put{3000};
  Duration get{3700};
  Duration cas{3800};
  Duration fao{3900};
  Duration am_oneway{1500};
  Duration local_op{2500};
  std::optional<Duration> am_handler;  // unset: local_op
  Duration progress_thread_penalty{500};
  Duration hotspot_penalty{0};
  Duration barrier{10000};
  double jitter_pct = 0.0;  // uniform ±jitter_pct % on every sampled component
  std::uint64_t seed = 1;

  static LatencyConfig defaults() { return {}; }
  // Every cost zero; jitter off.
  static LatencyConfig zero();

  Duration base(Component c) const noexcept;
  Duration handler_cost() const noexcept { return am_handler.value_or(local_op); }
  // Throws ConfigError on negative costs or jitter outside [0, 100).
  void validate() const;

  friend bool operator==(const LatencyConfig&, const LatencyConfig&) = default;
};

// key=value lines, '#' comments, blank lines ignored. Keys absent from the
// text keep their value from `base`. Unknown keys and malformed values throw
// ConfigError.
LatencyConfig parse_latency_config(std::string_view text, LatencyConfig base = {});
LatencyConfig load_latency_config(const std::filesystem::path& path, LatencyConfig base = {});
std::string to_config_text(const LatencyConfig& config);

// Base cost of `c`, perturbed by jitter when configured. Draws from `rng`
// only when jitter is on, so jitter-free runs never touch the generator.
Duration sample_latency(Component c, const LatencyConfig& config, std::mt19937_64& rng);

// A single atomic word, engine-side (rank, byte offset).
struct WordKey {
  std::int32_t rank = 0;
  std::uint64_t offset = 0;
  friend bool operator==(const WordKey&, const WordKey&) = default;
};

// Per-word bookkeeping for the hot-spot knob: an atomic delivered to a word
// with k atomics still queued or executing there pays k * penalty extra.
class HotspotTracker {
 public:
  explicit HotspotTracker(Duration penalty) : penalty_(penalty) {}

  Duration penalty() const noexcept { return penalty_; }
  std::size_t pending(const WordKey& word, VirtualTime now);
  Duration delay(const WordKey& word, VirtualTime now) { return penalty_ * static_cast<std::int64_t>(pending(word, now)); }
  void record(const WordKey& word, VirtualTime completion);

 private:
  struct KeyHash {
    std::size_t operator()(const WordKey& k) const noexcept {
      return std::hash<std::uint64_t>{}(k.offset * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(k.rank));
    }
  };
  Duration penalty_;
  std::unordered_map<WordKey, std::vector<VirtualTime>, KeyHash> in_flight_;
};

}  // namespace pgaslab::sim
