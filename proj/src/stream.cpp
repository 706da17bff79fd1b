#include "weft/stream.hpp"

#include "weft/error.hpp"

namespace weft {

StreamLog::StreamLog(std::string id, std::string name, TagSet tags, std::string producer,
                     ClockFn clock)
    : id_(std::move(id)),
      name_(std::move(name)),
      tags_(std::move(tags)),
      producer_(std::move(producer)),
      clock_(std::move(clock)) {
  require_tag_tokens(tags_);
}

std::uint64_t StreamLog::append(MessageKind kind, const TagSet& tags, Payload payload,
                                const std::string& producer) {
  require_tag_tokens(tags);
  Message copy;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (closed_) throw StateError("stream '" + name_ + "' is closed");
    Message m;
    m.stream_id = id_;
    m.seq = log_.size();
    m.id = id_ + ":" + std::to_string(m.seq);
    m.kind = kind;
    m.tags = tag_union(tags, tags_);
    m.payload = std::move(payload);
    m.producer = producer;
    std::int64_t ts = clock_ ? clock_() : 0;
    if (ts < last_ts_) ts = last_ts_;  // ts non-decreasing with seq
    last_ts_ = ts;
    m.ts = ts;
    log_.push_back(std::move(m));
    copy = log_.back();
  }
  cv_.notify_all();
  if (observer_) observer_(copy);
  return copy.seq;
}

bool StreamLog::close() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (closed_) return false;
    closed_ = true;
  }
  cv_.notify_all();
  return true;
}

bool StreamLog::closed() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return closed_;
}

std::uint64_t StreamLog::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return log_.size();
}

Message StreamLog::at(std::uint64_t seq) const {
  std::lock_guard<std::mutex> lock(mutex_);
  if (seq >= log_.size()) throw OutOfRangeError("seq " + std::to_string(seq) + " out of range");
  return log_[seq];
}

StreamLog::ReadResult StreamLog::read(std::uint64_t pos) const {
  std::lock_guard<std::mutex> lock(mutex_);
  ReadResult r;
  if (pos < log_.size()) {
    r.status = ReadResult::Status::MSG;
    r.message = log_[pos];
  } else {
    r.status = closed_ ? ReadResult::Status::END : ReadResult::Status::PENDING;
  }
  return r;
}

bool StreamLog::wait_for_change(std::uint64_t known_len, std::chrono::milliseconds timeout) const {
  std::unique_lock<std::mutex> lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return log_.size() > known_len || closed_; });
}

void StreamLog::set_observer(Observer obs) { observer_ = std::move(obs); }

Cursor::Cursor(StreamPtr stream, std::uint64_t position, std::string owner)
    : stream_(std::move(stream)), position_(position), owner_(std::move(owner)) {}

StreamLog::ReadResult Cursor::next() {
  StreamLog::ReadResult r = stream_->read(position_);
  if (r.status == StreamLog::ReadResult::Status::MSG) ++position_;
  return r;
}

Cursor open_cursor(StreamPtr stream, std::uint64_t from, std::string owner) {
  const std::uint64_t len = stream->size();
  if (from > len) {
    throw OutOfRangeError("cursor position " + std::to_string(from) + " beyond stream length " +
                          std::to_string(len));
  }
  return Cursor(std::move(stream), from, std::move(owner));
}

}  // namespace weft
