// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <coroutine>
#include <exception>
#include <optional>
#include <stdexcept>
#include <utility>

namespace pgaslab {

namespace detail {

// Shared promise state. A child started from an awaiting parent runs inline
// inside the parent's await_suspend; if it finishes before suspending, the
// parent simply continues (await_suspend returns false). Only a child that
// really suspended resumes its parent from final_suspend. Loops of
// synchronously completing awaits therefore use constant stack.
struct PromiseBase {
  std::coroutine_handle<> continuation = std::noop_coroutine();
  std::exception_ptr error;
  bool running_inline = false;
  bool finished_inline = false;

  std::suspend_always initial_suspend() noexcept { return {}; }

  struct FinalAwaiter {
    bool await_ready() noexcept { return false; }
    template <typename Promise>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<Promise> h) noexcept {
      PromiseBase& p = h.promise();
      if (p.running_inline) {
        p.finished_inline = true;
        return std::noop_coroutine();
      }
      return p.continuation;
    }
    void await_resume() noexcept {}
  };
  FinalAwaiter final_suspend() noexcept { return {}; }
  void unhandled_exception() noexcept { error = std::current_exception(); }
};

template <typename T>
struct Promise;

}  // namespace detail

// Lazily started coroutine returning T. Owns its frame.
template <typename T = void>
class [[nodiscard]] Task {
 public:
  using promise_type = detail::Promise<T>;
  using Handle = std::coroutine_handle<promise_type>;

  Task() = default;
  explicit Task(Handle h) noexcept : handle_(h) {}
  Task(Task&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
  Task& operator=(Task&& other) noexcept {
    if (this != &other) {
      reset();
      handle_ = std::exchange(other.handle_, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() { reset(); }

  bool valid() const noexcept { return static_cast<bool>(handle_); }
  bool done() const noexcept { return handle_ && handle_.done(); }

  bool await_ready() const noexcept { return false; }
  bool await_suspend(std::coroutine_handle<> parent) {
    auto& p = handle_.promise();
    p.continuation = parent;
    p.running_inline = true;
    handle_.resume();
    p.running_inline = false;
    return !p.finished_inline;
  }
  T await_resume() { return handle_.promise().take(); }

  // Start without a parent. Used by drivers (engine roots, sync_wait).
  void start() {
    auto& p = handle_.promise();
    p.running_inline = true;
    handle_.resume();
    p.running_inline = false;
  }
  T result() { return handle_.promise().take(); }

 private:
  void reset() noexcept {
    if (handle_) {
      handle_.destroy();
      handle_ = {};
    }
  }
  Handle handle_{};
};

namespace detail {

template <typename T>
struct Promise : PromiseBase {
  std::optional<T> value;
  Task<T> get_return_object() noexcept {
    return Task<T>{std::coroutine_handle<Promise>::from_promise(*this)};
  }
  template <typename U>
  void return_value(U&& v) {
    value.emplace(std::forward<U>(v));
  }
  T take() {
    if (error) std::rethrow_exception(error);
    return std::move(*value);
  }
};

template <>
struct Promise<void> : PromiseBase {
  Task<void> get_return_object() noexcept {
    return Task<void>{std::coroutine_handle<Promise>::from_promise(*this)};
  }
  void return_void() noexcept {}
  void take() {
    if (error) std::rethrow_exception(error);
  }
};

}  // namespace detail

// Runs a task that must complete without suspending (the thread backend,
// where every fabric operation finishes synchronously).
template <typename T>
T sync_wait(Task<T> task) {
  task.start();
  if (!task.done()) {
    throw std::logic_error("sync_wait: task suspended with no event loop to resume it");
  }
  return task.result();
}

}  // namespace pgaslab
