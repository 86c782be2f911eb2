// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pgaslab/sim/task.hpp"

namespace pgaslab::sim {

// Virtual clock. One tick is one nanosecond of simulated time.
struct SimClock {
  using rep = std::int64_t;
  using period = std::nano;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<SimClock>;
  static constexpr bool is_steady = true;
};

using Duration = SimClock::duration;
using VirtualTime = SimClock::time_point;

inline constexpr std::int64_t ticks(VirtualTime t) noexcept { return t.time_since_epoch().count(); }

struct EventHandle {
  VirtualTime fire_time{};
  std::uint64_t sequence = 0;
};

struct TraceEntry {
  VirtualTime time{};
  std::uint64_t sequence = 0;
  std::string tag;
};

// Seeded discrete-event loop. Events fire in (time, sequence) order, so ties
// run FIFO in scheduling order. Not thread-safe: one controlling context.
class Engine {
 public:
  explicit Engine(std::uint64_t seed = 1);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  VirtualTime now() const noexcept { return now_; }
  std::mt19937_64& rng() noexcept { return rng_; }

  // Throws std::invalid_argument for a negative delay.
  EventHandle schedule(Duration delay, std::function<void()> action, std::string tag = {});
  // False if the event already fired or was cancelled.
  bool cancel(const EventHandle& handle);

  // Starts `task` as a root at now (it begins in its own event).
  void spawn(Task<void> task);

  // Drains the event queue. Rethrows the first exception escaping a root task.
  void run();
  // Runs events with fire_time <= limit. True if the queue drained.
  bool run_until(VirtualTime limit);

  std::size_t pending_events() const noexcept { return queue_.size(); }
  std::size_t live_tasks() const noexcept { return live_roots_; }
  std::uint64_t events_fired() const noexcept { return fired_; }

  void enable_trace(bool on) noexcept { tracing_ = on; }
  bool tracing() const noexcept { return tracing_; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
  // One line per fired event: "<time> <sequence> <tag>\n".
  std::string serialize_trace() const;

  class SleepAwaiter {
   public:
    SleepAwaiter(Engine& e, Duration d, std::string tag) : engine_(e), delay_(d), tag_(std::move(tag)) {}
    SleepAwaiter(const SleepAwaiter&) = delete;
    SleepAwaiter& operator=(const SleepAwaiter&) = delete;
    // GCC 11 can run the destructor of a co_await operand temporary twice;
    // releasing owned storage here keeps the second run harmless.
    ~SleepAwaiter() { std::string().swap(tag_); }
    bool await_ready() const noexcept { return delay_.count() == 0; }
    void await_suspend(std::coroutine_handle<> h) {
      engine_.schedule(delay_, [h] { h.resume(); }, std::move(tag_));
    }
    void await_resume() const noexcept {}

   private:
    Engine& engine_;
    Duration delay_;
    std::string tag_;
  };
  // Suspends the calling task for `d` of virtual time. Zero does not yield.
  SleepAwaiter sleep(Duration d, std::string tag = {}) { return SleepAwaiter{*this, d, std::move(tag)}; }

  // Suspends on an arbitrary resumption owner (barriers, poll regions).
  // Declare it as a named local before co_await: GCC 11 mishandles
  // temporaries owning heap state in a co_await operand.
  struct ParkAwaiter {
    explicit ParkAwaiter(std::function<void(std::coroutine_handle<>)> fn) : park(std::move(fn)) {}
    ParkAwaiter(const ParkAwaiter&) = delete;
    ParkAwaiter& operator=(const ParkAwaiter&) = delete;
    std::function<void(std::coroutine_handle<>)> park;
    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) { park(h); }
    void await_resume() const noexcept {}
  };

  void report_failure(std::exception_ptr e);
  void root_finished() noexcept { --live_roots_; }

 private:
  struct Event {
    std::function<void()> action;
    std::string tag;
  };
  using Key = std::pair<std::int64_t, std::uint64_t>;

  bool step();

  VirtualTime now_{};
  std::uint64_t next_sequence_ = 0;
  std::uint64_t fired_ = 0;
  std::map<Key, Event> queue_;
  std::mt19937_64 rng_;
  bool tracing_ = false;
  std::vector<TraceEntry> trace_;
  std::vector<std::coroutine_handle<>> roots_;
  std::size_t live_roots_ = 0;
  std::exception_ptr failure_;
};

}  // namespace pgaslab::sim
