#pragma once
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "weft/message.hpp"

namespace weft {

// Append-only, totally ordered, tagged message log. Thread-safe: appends
// may come from any execution context; seq assignment is atomic under the
// log's lock. Messages are immutable after append.
class StreamLog {
 public:
  using ClockFn = std::function<std::int64_t()>;
  using Observer = std::function<void(const Message&)>;

  StreamLog(std::string id, std::string name, TagSet tags, std::string producer,
            ClockFn clock = nullptr);

  const std::string& id() const { return id_; }
  const std::string& name() const { return name_; }
  const TagSet& tags() const { return tags_; }
  const std::string& producer() const { return producer_; }

  // Returns the assigned seq (== length before the append). Message tags
  // are the union of `tags` and the stream's tags. Throws StateError if
  // the stream is closed.
  std::uint64_t append(MessageKind kind, const TagSet& tags, Payload payload,
                       const std::string& producer);

  // Idempotent: closing a closed stream is a no-op (returns false).
  bool close();
  bool closed() const;

  std::uint64_t size() const;
  Message at(std::uint64_t seq) const;  // throws OutOfRangeError

  struct ReadResult {
    enum class Status { MSG, PENDING, END };
    Status status = Status::PENDING;
    std::optional<Message> message;
  };

  // Snapshot read used by cursors: the message at `pos`, or
  // PENDING (pos == length, open) / END (pos == length, closed).
  ReadResult read(std::uint64_t pos) const;

  // Wakeup contract for non-simulated consumers: blocks until the stream
  // grows past `known_len` or closes, or the timeout expires. Returns
  // true if there was a change.
  bool wait_for_change(std::uint64_t known_len, std::chrono::milliseconds timeout) const;

  // Fires after each successful append, outside the log's lock, on the
  // appending thread. One observer slot (the owning session's router).
  void set_observer(Observer obs);

 private:
  const std::string id_;
  const std::string name_;
  const TagSet tags_;
  const std::string producer_;
  ClockFn clock_;
  Observer observer_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::vector<Message> log_;
  std::int64_t last_ts_ = 0;
  bool closed_ = false;
};

using StreamPtr = std::shared_ptr<StreamLog>;

// Independent read position over one stream, owned by a single consumer.
// Never skips and never rereads under normal advance.
class Cursor {
 public:
  Cursor() = default;
  Cursor(StreamPtr stream, std::uint64_t position, std::string owner);

  // The message at the current position (advancing past it), or
  // PENDING/END at the tail.
  StreamLog::ReadResult next();

  std::uint64_t position() const { return position_; }
  const std::string& owner() const { return owner_; }
  const StreamPtr& stream() const { return stream_; }

 private:
  StreamPtr stream_;
  std::uint64_t position_ = 0;
  std::string owner_;
};

// Throws OutOfRangeError unless 0 <= from <= stream length (from == length
// is the tail position).
Cursor open_cursor(StreamPtr stream, std::uint64_t from, std::string owner);

}  // namespace weft
