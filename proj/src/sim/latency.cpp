// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/sim/latency.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pgaslab/error.hpp"

namespace pgaslab::sim {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("latency config: bad value '" + std::string(text) + "' for key " + std::string(key));
  }
  return value;
}

Duration parse_ns(std::string_view key, std::string_view text) {
  const auto v = parse_number<std::int64_t>(key, text);
  if (v < 0) throw ConfigError("latency config: " + std::string(key) + " must be >= 0");
  return Duration{v};
}

}  // namespace

Component parse_component(std::string_view name) {
  if (name == "W" || name == "put") return Component::put;
  if (name == "R" || name == "get") return Component::get;
  if (name == "A_CAS" || name == "cas") return Component::cas;
  if (name == "A_FAO" || name == "fao") return Component::fao;
  if (name == "AM" || name == "am_oneway") return Component::am_oneway;
  if (name == "l" || name == "local" || name == "local_op") return Component::local;
  throw ConfigError("unknown latency component '" + std::string(name) + "'");
}

std::string_view symbol(Component c) noexcept {
  switch (c) {
    case Component::put: return "W";
    case Component::get: return "R";
    case Component::cas: return "A_CAS";
    case Component::fao: return "A_FAO";
    case Component::am_oneway: return "AM";
    case Component::local: return "l";
  }
  return "?";
}

LatencyConfig LatencyConfig::zero() {
  LatencyConfig c;
  c.put = c.get = c.cas = c.fao = c.am_oneway = c.local_op = Duration{0};
  c.am_handler.reset();
  c.progress_thread_penalty = c.hotspot_penalty = c.barrier = Duration{0};
  c.jitter_pct = 0.0;
  return c;
}

Duration LatencyConfig::base(Component c) const noexcept {
  switch (c) {
    case Component::put: return put;
    case Component::get: return get;
    case Component::cas: return cas;
    case Component::fao: return fao;
    case Component::am_oneway: return am_oneway;
    case Component::local: return local_op;
  }
  return Duration{0};
}

void LatencyConfig::validate() const {
  const Duration all[] = {put, get, cas, fao, am_oneway, local_op, progress_thread_penalty, hotspot_penalty, barrier};
  for (auto d : all) {
    if (d.count() < 0) throw ConfigError("latency config: costs must be >= 0");
  }
  if (am_handler && am_handler->count() < 0) throw ConfigError("latency config: am_handler_ns must be >= 0");
  if (!(jitter_pct >= 0.0 && jitter_pct < 100.0)) throw ConfigError("latency config: jitter_pct must be in [0, 100)");
}

LatencyConfig parse_latency_config(std::string_view text, LatencyConfig config) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("latency config line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "put_ns") config.put = parse_ns(key, value);
    else if (key == "get_ns") config.get = parse_ns(key, value);
    else if (key == "cas_ns") config.cas = parse_ns(key, value);
    else if (key == "fao_ns") config.fao = parse_ns(key, value);
    else if (key == "am_oneway_ns") config.am_oneway = parse_ns(key, value);
    else if (key == "local_op_ns") config.local_op = parse_ns(key, value);
    else if (key == "am_handler_ns") config.am_handler = parse_ns(key, value);
    else if (key == "progress_thread_penalty_ns") config.progress_thread_penalty = parse_ns(key, value);
    else if (key == "hotspot_penalty_ns") config.hotspot_penalty = parse_ns(key, value);
    else if (key == "barrier_ns") config.barrier = parse_ns(key, value);
    else if (key == "jitter_pct") config.jitter_pct = parse_number<double>(key, value);
    else if (key == "seed") config.seed = parse_number<std::uint64_t>(key, value);
    else throw ConfigError("latency config: unknown key '" + std::string(key) + "'");
  }
  config.validate();
  return config;
}

LatencyConfig load_latency_config(const std::filesystem::path& path, LatencyConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open latency config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_latency_config(text.str(), base);
}

std::string to_config_text(const LatencyConfig& c) {
  std::ostringstream out;
  out << "put_ns=" << c.put.count() << '\n'
      << "get_ns=" << c.get.count() << '\n'
      << "cas_ns=" << c.cas.count() << '\n'
      << "fao_ns=" << c.fao.count() << '\n'
      << "am_oneway_ns=" << c.am_oneway.count() << '\n'
      << "local_op_ns=" << c.local_op.count() << '\n';
  if (c.am_handler) out << "am_handler_ns=" << c.am_handler->count() << '\n';
  out << "progress_thread_penalty_ns=" << c.progress_thread_penalty.count() << '\n'
      << "hotspot_penalty_ns=" << c.hotspot_penalty.count() << '\n'
      << "barrier_ns=" << c.barrier.count() << '\n'
      << "jitter_pct=" << c.jitter_pct << '\n'
      << "seed=" << c.seed << '\n';
  return out.str();
}

Duration sample_latency(Component c, const LatencyConfig& config, std::mt19937_64& rng) {
  const Duration base = config.base(c);
  if (config.jitter_pct <= 0.0 || base.count() == 0) return base;
  // u uniform in [-1, 1)
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  const double scaled = static_cast<double>(base.count()) * (1.0 + u * config.jitter_pct / 100.0);
  return Duration{std::max<std::int64_t>(0, std::llround(scaled))};
}

std::size_t HotspotTracker::pending(const WordKey& word, VirtualTime now) {
  auto it = in_flight_.find(word);
  if (it == in_flight_.end()) return 0;
  auto& times = it->second;
  std::erase_if(times, [now](VirtualTime t) { return t <= now; });
  if (times.empty()) {
    in_flight_.erase(it);
    return 0;
  }
  return times.size();
}

void HotspotTracker::record(const WordKey& word, VirtualTime completion) {
  in_flight_[word].push_back(completion);
}

}  // namespace pgaslab::sim
