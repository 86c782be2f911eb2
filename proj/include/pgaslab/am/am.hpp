// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <coroutine>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pgaslab/fabric/sim_fabric.hpp"

namespace pgaslab::am {

using fabric::Bytes;
using fabric::Rank;
using sim::Duration;
using sim::VirtualTime;

using HandlerId = std::uint32_t;
inline constexpr std::size_t max_args_bytes = 64;

class AmEngine;

// What a handler may do: read its request, charge extra local work, and
// reply at most once. Any other communication is a RestrictionViolation.
class HandlerContext {
 public:
  Rank self() const noexcept { return self_; }
  Rank origin() const noexcept { return origin_; }
  std::span<const std::byte> args() const noexcept { return args_; }
  std::span<const std::byte> payload() const noexcept { return payload_; }
  VirtualTime now() const noexcept;

  void reply(std::span<const std::byte> data = {});
  // Service time on top of the configured handler cost.
  void charge(Duration extra) noexcept { extra_ += extra; }

  bool replied() const noexcept { return reply_.has_value(); }

 private:
  friend class AmEngine;
  HandlerContext(AmEngine& engine, Rank self, Rank origin, std::span<const std::byte> args,
                 std::span<const std::byte> payload)
      : engine_(engine), self_(self), origin_(origin), args_(args), payload_(payload) {}

  AmEngine& engine_;
  Rank self_;
  Rank origin_;
  std::span<const std::byte> args_;
  std::span<const std::byte> payload_;
  Duration extra_{0};
  std::optional<Bytes> reply_;
};

using Handler = std::function<void(HandlerContext&)>;

// Origin-side completion slot of one request. Completes when the origin
// processes the reply during its own progress.
class Ticket {
 public:
  Ticket() = default;
  bool valid() const noexcept { return static_cast<bool>(slot_); }
  bool done() const noexcept { return slot_ && slot_->done; }
  // Reply data; empty if the reply carried none.
  const Bytes& reply() const { return slot_->data; }

 private:
  friend class AmEngine;
  struct Slot {
    bool done = false;
    Bytes data;
  };
  std::shared_ptr<Slot> slot_;
};

struct AttentivenessPolicy {
  enum class Mode { poll_loop, compute_interleave, progress_thread };
  Mode mode = Mode::poll_loop;
  // Length of each compute block (compute_interleave; progress_thread main
  // thread when nonzero).
  Duration compute{0};
  // Progress-thread service delay; unset uses the latency config.
  std::optional<Duration> penalty;

  static AttentivenessPolicy poll_loop() { return {}; }
  static AttentivenessPolicy compute_interleave(Duration d) { return {Mode::compute_interleave, d, std::nullopt}; }
  static AttentivenessPolicy progress_thread(Duration main_compute = Duration{0},
                                             std::optional<Duration> penalty = std::nullopt) {
    return {Mode::progress_thread, main_compute, penalty};
  }
};

// Active messages over a simulated fabric.
//
// Timing: a message arrives am_oneway after it is sent. A request's handler
// starts at the first moment its target is attentive at or after arrival,
// and no earlier than the end of the target's previous handler. The reply
// leaves at handler start + handler cost. A rank is attentive inside a poll
// region (wait / poll_until) and during an explicit progress() call; while it
// computes, arrivals queue up. A rank with its progress thread enabled has
// requests serviced at arrival + penalty on a separate handler timeline.
class AmEngine {
 public:
  explicit AmEngine(fabric::SimFabric& fabric);

  fabric::SimFabric& fabric() noexcept { return fabric_; }
  sim::Engine& engine() noexcept { return fabric_.engine(); }
  int size() const noexcept { return fabric_.size(); }

  // Collective: every rank sees the same table. LifecycleError once the
  // first request has been sent.
  HandlerId register_handler(Handler fn);

  // Sends a request and returns its ticket. ArgumentError if args exceed
  // max_args_bytes or the handler id is unknown; RestrictionViolation when
  // called from inside a handler.
  Ticket request(Rank self, Rank target, HandlerId handler, std::span<const std::byte> args,
                 std::span<const std::byte> payload = {});

  // Polls (servicing incoming messages) until the ticket completes; returns
  // the reply data.
  Task<Bytes> wait(Rank self, Ticket ticket);
  // Polls until `stop()` holds. The predicate is re-evaluated after every
  // serviced message and on notify().
  Task<void> poll_until(Rank self, std::function<bool()> stop);
  // Services every message that had arrived by the time of the call, in
  // arrival order, and returns how many.
  Task<std::size_t> progress(Rank self);
  // Inattentive local computation.
  Task<void> compute(Rank self, Duration d);
  // Wakes `r`'s poll region to re-check its predicate.
  void notify(Rank r);

  // Runs `self`'s servicing loop under `policy` until `stop()` holds.
  Task<void> attend(Rank self, AttentivenessPolicy policy, std::function<bool()> stop);

  void set_progress_thread(Rank r, bool enabled, std::optional<Duration> penalty = std::nullopt);

  std::uint64_t completions(Rank r) const { return ranks_.at(static_cast<std::size_t>(r)).completions; }
  std::uint64_t handled(Rank r) const { return ranks_.at(static_cast<std::size_t>(r)).handled; }
  bool in_handler() const noexcept { return in_handler_; }

 private:
  friend class HandlerContext;

  struct Message {
    bool is_reply = false;
    Rank origin = 0;
    HandlerId handler = 0;
    Bytes args;
    Bytes payload;
    std::shared_ptr<Ticket::Slot> slot;
  };

  struct RankState {
    std::deque<Message> inbox;
    VirtualTime busy_until{};
    bool step_scheduled = false;
    bool polling = false;
    std::function<bool()> stop;
    std::coroutine_handle<> waiter;
    bool progress_thread = false;
    Duration pt_penalty{0};
    struct Pending {
      VirtualTime ready;
      Message msg;
    };
    std::deque<Pending> pt_queue;
    bool pt_scheduled = false;
    VirtualTime pt_busy_until{};
    std::uint64_t completions = 0;
    std::uint64_t handled = 0;
  };

  RankState& state(Rank r);
  void arrive(Rank target, Message msg);
  // Runs one message at now; returns the service time it occupies.
  Duration service(Rank self, Message& msg);
  void send_after(Duration delay, Rank target, Message msg);
  void kick(Rank r);
  void pt_kick(Rank r);
  void poll_step(Rank r);
  void wake(Rank r);

  fabric::SimFabric& fabric_;
  std::vector<Handler> handlers_;
  std::vector<RankState> ranks_;
  bool epoch_started_ = false;
  bool in_handler_ = false;
};

}  // namespace pgaslab::am
