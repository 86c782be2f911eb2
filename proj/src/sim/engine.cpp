// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/sim/engine.hpp"

#include <sstream>
#include <stdexcept>

namespace pgaslab::sim {

namespace {

// Eagerly owned by the engine; parks at final_suspend so the engine can
// destroy every root uniformly.
struct RootCoroutine {
  struct promise_type {
    RootCoroutine get_return_object() noexcept {
      return RootCoroutine{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() noexcept {}
    void unhandled_exception() noexcept { std::terminate(); }
  };
  std::coroutine_handle<promise_type> handle;
};

RootCoroutine drive(Engine* engine, Task<void> task) {
  try {
    co_await task;
  } catch (...) {
    engine->report_failure(std::current_exception());
  }
  engine->root_finished();
}

}  // namespace

Engine::Engine(std::uint64_t seed) : rng_(seed) {}

Engine::~Engine() {
  for (auto h : roots_) h.destroy();
}

EventHandle Engine::schedule(Duration delay, std::function<void()> action, std::string tag) {
  if (delay.count() < 0) throw std::invalid_argument("Engine::schedule: negative delay");
  EventHandle handle{now_ + delay, next_sequence_++};
  queue_.emplace(Key{ticks(handle.fire_time), handle.sequence}, Event{std::move(action), std::move(tag)});
  return handle;
}

bool Engine::cancel(const EventHandle& handle) {
  return queue_.erase(Key{ticks(handle.fire_time), handle.sequence}) > 0;
}

void Engine::spawn(Task<void> task) {
  auto root = drive(this, std::move(task));
  roots_.push_back(root.handle);
  ++live_roots_;
  schedule(Duration{0}, [h = root.handle] { h.resume(); }, "spawn");
}

void Engine::report_failure(std::exception_ptr e) {
  if (!failure_) failure_ = std::move(e);
}

bool Engine::step() {
  auto it = queue_.begin();
  now_ = VirtualTime{Duration{it->first.first}};
  Event event = std::move(it->second);
  const std::uint64_t sequence = it->first.second;
  queue_.erase(it);
  ++fired_;
  if (tracing_) trace_.push_back(TraceEntry{now_, sequence, event.tag});
  event.action();
  if (failure_) std::rethrow_exception(std::exchange(failure_, nullptr));
  return !queue_.empty();
}

void Engine::run() {
  while (!queue_.empty()) step();
}

bool Engine::run_until(VirtualTime limit) {
  while (!queue_.empty() && queue_.begin()->first.first <= ticks(limit)) step();
  return queue_.empty();
}

std::string Engine::serialize_trace() const {
  std::ostringstream out;
  for (const auto& e : trace_) out << ticks(e.time) << ' ' << e.sequence << ' ' << e.tag << '\n';
  return out.str();
}

}  // namespace pgaslab::sim
