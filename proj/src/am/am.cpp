// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/am/am.hpp"

#include <algorithm>

#include "pgaslab/error.hpp"

namespace pgaslab::am {

VirtualTime HandlerContext::now() const noexcept { return engine_.engine().now(); }

void HandlerContext::reply(std::span<const std::byte> data) {
  if (reply_) throw RestrictionViolation("handler replied twice to request from rank " + std::to_string(origin_));
  reply_.emplace(data.begin(), data.end());
}

AmEngine::AmEngine(fabric::SimFabric& fabric) : fabric_(fabric), ranks_(static_cast<std::size_t>(fabric.size())) {
  for (auto& r : ranks_) r.pt_penalty = fabric_.config().progress_thread_penalty;
}

AmEngine::RankState& AmEngine::state(Rank r) {
  if (r < 0 || r >= size()) throw AddressError("AM rank " + std::to_string(r) + " outside [0, " + std::to_string(size()) + ")");
  return ranks_[static_cast<std::size_t>(r)];
}

HandlerId AmEngine::register_handler(Handler fn) {
  if (epoch_started_) throw LifecycleError("handler registered after the first active message was sent");
  handlers_.push_back(std::move(fn));
  return static_cast<HandlerId>(handlers_.size() - 1);
}

Ticket AmEngine::request(Rank self, Rank target, HandlerId handler, std::span<const std::byte> args,
                         std::span<const std::byte> payload) {
  if (in_handler_) throw RestrictionViolation("handlers may not send active message requests");
  state(self);
  state(target);
  if (args.size() > max_args_bytes) {
    throw ArgumentError("active message args of " + std::to_string(args.size()) + " bytes exceed " +
                        std::to_string(max_args_bytes));
  }
  if (handler >= handlers_.size()) throw ArgumentError("unknown handler id " + std::to_string(handler));
  epoch_started_ = true;
  Ticket t;
  t.slot_ = std::make_shared<Ticket::Slot>();
  Message msg{false, self, handler, Bytes(args.begin(), args.end()), Bytes(payload.begin(), payload.end()), t.slot_};
  send_after(Duration{0}, target, std::move(msg));
  return t;
}

void AmEngine::send_after(Duration delay, Rank target, Message msg) {
  const Duration flight = delay + sim::sample_latency(sim::Component::am_oneway, fabric_.config(), engine().rng());
  auto shared = std::make_shared<Message>(std::move(msg));
  std::string tag;
  if (engine().tracing()) tag = std::string(shared->is_reply ? "am reply" : "am request") + " -> r" + std::to_string(target);
  engine().schedule(flight, [this, target, shared] { arrive(target, std::move(*shared)); }, std::move(tag));
}

void AmEngine::arrive(Rank target, Message msg) {
  auto& st = state(target);
  if (!msg.is_reply && st.progress_thread) {
    st.pt_queue.push_back({engine().now() + st.pt_penalty, std::move(msg)});
    pt_kick(target);
    return;
  }
  st.inbox.push_back(std::move(msg));
  if (st.polling) kick(target);
}

Duration AmEngine::service(Rank self, Message& msg) {
  auto& st = state(self);
  if (msg.is_reply) {
    if (!msg.payload.empty()) msg.slot->data = std::move(msg.payload);
    msg.slot->done = true;
    ++st.completions;
    return Duration{0};
  }
  HandlerContext ctx(*this, self, msg.origin, msg.args, msg.payload);
  struct Guard {
    bool& flag;
    explicit Guard(bool& f) : flag(f) { flag = true; }
    ~Guard() { flag = false; }
  };
  {
    Guard guard(in_handler_);
    handlers_[msg.handler](ctx);
  }
  ++st.handled;
  const Duration cost = fabric_.config().handler_cost() + ctx.extra_;
  if (ctx.reply_) {
    Message reply{true, self, 0, {}, std::move(*ctx.reply_), msg.slot};
    send_after(cost, msg.origin, std::move(reply));
  }
  return cost;
}

void AmEngine::pt_kick(Rank r) {
  auto& st = state(r);
  if (st.pt_scheduled || st.pt_queue.empty()) return;
  st.pt_scheduled = true;
  const VirtualTime start = std::max(st.pt_queue.front().ready, st.pt_busy_until);
  engine().schedule(start - engine().now(), [this, r] {
    auto& s = state(r);
    s.pt_scheduled = false;
    Message msg = std::move(s.pt_queue.front().msg);
    s.pt_queue.pop_front();
    s.pt_busy_until = engine().now() + service(r, msg);
    pt_kick(r);
  });
}

void AmEngine::kick(Rank r) {
  auto& st = state(r);
  if (st.step_scheduled) return;
  st.step_scheduled = true;
  const Duration delay = std::max(Duration{0}, st.busy_until - engine().now());
  engine().schedule(delay, [this, r] { poll_step(r); });
}

void AmEngine::poll_step(Rank r) {
  auto& st = state(r);
  st.step_scheduled = false;
  while (st.polling) {
    if (st.stop()) {
      wake(r);
      return;
    }
    if (st.inbox.empty()) return;
    Message msg = std::move(st.inbox.front());
    st.inbox.pop_front();
    const Duration cost = service(r, msg);
    if (cost.count() > 0) {
      st.busy_until = engine().now() + cost;
      kick(r);
      return;
    }
  }
}

void AmEngine::wake(Rank r) {
  auto& st = state(r);
  st.polling = false;
  st.stop = nullptr;
  auto h = std::exchange(st.waiter, {});
  engine().schedule(Duration{0}, [h] { h.resume(); });
}

void AmEngine::notify(Rank r) {
  if (state(r).polling) kick(r);
}

Task<void> AmEngine::poll_until(Rank self, std::function<bool()> stop) {
  auto& st = state(self);
  if (stop()) co_return;
  sim::Engine::ParkAwaiter park([this, self, &st, &stop](std::coroutine_handle<> h) {
    st.waiter = h;
    st.stop = std::move(stop);
    st.polling = true;
    kick(self);
  });
  co_await park;
}

Task<Bytes> AmEngine::wait(Rank self, Ticket ticket) {
  if (!ticket.valid()) throw ArgumentError("wait on an empty ticket");
  co_await poll_until(self, [&ticket] { return ticket.done(); });
  co_return ticket.reply();
}

Task<std::size_t> AmEngine::progress(Rank self) {
  auto& st = state(self);
  if (st.busy_until > engine().now()) co_await engine().sleep(st.busy_until - engine().now());
  std::size_t n = st.inbox.size();
  for (std::size_t i = 0; i < n; ++i) {
    Message msg = std::move(st.inbox.front());
    st.inbox.pop_front();
    const Duration cost = service(self, msg);
    if (cost.count() > 0) {
      co_await engine().sleep(cost);
      st.busy_until = engine().now();
    }
  }
  co_return n;
}

Task<void> AmEngine::compute(Rank self, Duration d) {
  state(self);
  co_await engine().sleep(d);
}

void AmEngine::set_progress_thread(Rank r, bool enabled, std::optional<Duration> penalty) {
  auto& st = state(r);
  st.progress_thread = enabled;
  st.pt_penalty = penalty.value_or(fabric_.config().progress_thread_penalty);
}

Task<void> AmEngine::attend(Rank self, AttentivenessPolicy policy, std::function<bool()> stop) {
  using Mode = AttentivenessPolicy::Mode;
  switch (policy.mode) {
    case Mode::poll_loop:
      co_await poll_until(self, stop);
      break;
    case Mode::compute_interleave:
      while (!stop()) {
        co_await compute(self, policy.compute);
        (void)co_await progress(self);
      }
      break;
    case Mode::progress_thread:
      set_progress_thread(self, true, policy.penalty);
      if (policy.compute.count() > 0) {
        while (!stop()) co_await compute(self, policy.compute);
      } else {
        co_await poll_until(self, stop);
      }
      set_progress_thread(self, false);
      break;
  }
}

}  // namespace pgaslab::am
