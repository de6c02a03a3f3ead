#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <vector>

namespace tamperled::sim {

// Single-threaded discrete-event loop with a logical millisecond clock.
// Events at equal times run in scheduling order, so a fixed schedule replays
// identically on every run.
class EventLoop {
 public:
  using Fn = std::function<void()>;

  uint64_t now_ms() const { return now_; }

  void post(Fn fn) { schedule_at(now_, std::move(fn)); }
  void schedule_in(uint64_t delay_ms, Fn fn) { schedule_at(now_ + delay_ms, std::move(fn)); }
  void schedule_at(uint64_t at_ms, Fn fn) {
    if (at_ms < now_) at_ms = now_;
    queue_.push(Event{at_ms, next_seq_++, std::move(fn)});
  }

  bool run_one() {
    if (queue_.empty()) return false;
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.at;
    ev.fn();
    return true;
  }

  void run_until_idle() {
    while (run_one()) {
    }
  }

  // Runs everything scheduled up to and including deadline_ms, then parks the
  // clock there.
  void run_until(uint64_t deadline_ms) {
    while (!queue_.empty() && queue_.top().at <= deadline_ms) run_one();
    if (now_ < deadline_ms) now_ = deadline_ms;
  }

  size_t pending() const { return queue_.size(); }

 private:
  struct Event {
    uint64_t at;
    uint64_t seq;
    Fn fn;
    bool operator>(const Event& o) const {
      return at != o.at ? at > o.at : seq > o.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  uint64_t now_ = 0;
  uint64_t next_seq_ = 0;
};

// Seeded RNG for everything that must be reproducible: block nonces, tx
// nonces, key derivation, synthetic sensor values.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  void fill(uint8_t* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = uint8_t(gen_() >> 32);
  }

  template <size_t N>
  std::array<uint8_t, N> bytes() {
    std::array<uint8_t, N> out;
    fill(out.data(), out.size());
    return out;
  }

  // Uniform in [lo, hi].
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  uint64_t below(uint64_t n) {
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(gen_);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace tamperled::sim
