#include "weft/clock.hpp"

#include <chrono>
#include <queue>
#include <thread>
#include <unordered_set>
#include <vector>

#include "weft/error.hpp"

namespace weft {

std::string to_string(ClockMode mode) { return mode == ClockMode::SIMULATED ? "sim" : "wall"; }

ClockMode clock_mode_from_string(const std::string& s) {
  if (s == "sim" || s == "simulated") return ClockMode::SIMULATED;
  if (s == "wall") return ClockMode::WALL;
  throw ValidationError("unknown clock mode: '" + s + "'");
}

namespace {

struct Event {
  std::int64_t ts;
  Scheduler::Handle handle;
  std::function<void()> fn;
};

struct EventOrder {
  // Min-heap on (ts, handle); handles are issued monotonically so they
  // double as the same-instant tie-break.
  bool operator()(const Event& a, const Event& b) const {
    if (a.ts != b.ts) return a.ts > b.ts;
    return a.handle > b.handle;
  }
};

class QueueScheduler : public Scheduler {
 public:
  std::int64_t now() const override { return now_; }

  Handle schedule_at(std::int64_t ts, std::function<void()> fn) override {
    const Handle h = next_handle_++;
    queue_.push(Event{ts < now_ ? now_ : ts, h, std::move(fn)});
    live_.insert(h);
    return h;
  }

  bool cancel(Handle h) override {
    if (h == kInvalidHandle || live_.erase(h) == 0) return false;
    cancelled_.insert(h);
    return true;
  }

  bool pending() const override { return !live_.empty(); }

 protected:
  bool pop_next(Event& out) {
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      if (cancelled_.erase(ev.handle) > 0) continue;
      live_.erase(ev.handle);
      out = std::move(ev);
      return true;
    }
    return false;
  }

  std::int64_t now_ = 0;

 private:
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::unordered_set<Handle> live_;
  std::unordered_set<Handle> cancelled_;
  Handle next_handle_ = 1;
};

class SimScheduler final : public QueueScheduler {
 public:
  ClockMode mode() const override { return ClockMode::SIMULATED; }

  void run_until_idle() override {
    Event ev;
    while (pop_next(ev)) {
      now_ = ev.ts;
      ev.fn();
    }
  }
};

class WallScheduler final : public QueueScheduler {
 public:
  WallScheduler() : start_(std::chrono::steady_clock::now()) {}

  ClockMode mode() const override { return ClockMode::WALL; }

  std::int64_t now() const override {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    return ms > now_ ? ms : now_;
  }

  void run_until_idle() override {
    Event ev;
    while (pop_next(ev)) {
      const std::int64_t current = now();
      if (ev.ts > current) {
        std::this_thread::sleep_for(std::chrono::milliseconds(ev.ts - current));
      }
      now_ = now();
      ev.fn();
    }
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::unique_ptr<Scheduler> make_sim_scheduler() { return std::make_unique<SimScheduler>(); }
std::unique_ptr<Scheduler> make_wall_scheduler() { return std::make_unique<WallScheduler>(); }

std::unique_ptr<Scheduler> make_scheduler(ClockMode mode) {
  return mode == ClockMode::SIMULATED ? make_sim_scheduler() : make_wall_scheduler();
}

}  // namespace weft
