#pragma once
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace weft {

enum class ClockMode { SIMULATED, WALL };

std::string to_string(ClockMode mode);
ClockMode clock_mode_from_string(const std::string& s);

// Discrete-event scheduler. All time is in milliseconds. Events scheduled
// for the same instant run in schedule order; the clock advances only
// between events, never inside one.
class Scheduler {
 public:
  using Handle = std::uint64_t;
  static constexpr Handle kInvalidHandle = 0;

  virtual ~Scheduler() = default;

  virtual std::int64_t now() const = 0;
  virtual Handle schedule_at(std::int64_t ts, std::function<void()> fn) = 0;
  Handle schedule_after(std::int64_t delay_ms, std::function<void()> fn) {
    return schedule_at(now() + (delay_ms < 0 ? 0 : delay_ms), std::move(fn));
  }

  // True if the event was still pending and is now dropped.
  virtual bool cancel(Handle h) = 0;

  // Drains the event queue. Reentrant scheduling from inside events is fine.
  virtual void run_until_idle() = 0;

  virtual bool pending() const = 0;
  virtual ClockMode mode() const = 0;
};

// Logical clock starting at 0; run_until_idle consumes no wall time.
std::unique_ptr<Scheduler> make_sim_scheduler();

// Wall clock: now() is elapsed real milliseconds since construction and
// run_until_idle sleeps until each event's due time. No replay guarantees.
std::unique_ptr<Scheduler> make_wall_scheduler();

std::unique_ptr<Scheduler> make_scheduler(ClockMode mode);

}  // namespace weft
