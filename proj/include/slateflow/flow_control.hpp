#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "slateflow/bytes.hpp"
#include "slateflow/workflow.hpp"

namespace slateflow {

/// Admission gate for one external input stream. Sources block in
/// wait_permit; a paused or rate-limited gate slows only external-input
/// consumption, never internal event passing, which is what keeps throttling
/// deadlock-free. Reads on the hot path are a single relaxed atomic load.
class SourceGate {
 public:
  enum class Mode : std::uint8_t { Unlimited, Rate, Paused };

  void pause();
  void resume();  // back to the last configured rate (or unlimited)
  void set_rate(double events_per_sec);
  void set_unlimited();

  /// Blocks until the gate admits one event (or `stop` turns true).
  /// Returns false when stopped.
  bool wait_permit(const std::atomic<bool>& stop);

  Mode mode() const { return mode_.load(std::memory_order_relaxed); }
  std::uint64_t pause_count() const { return pauses_.load(std::memory_order_relaxed); }

 private:
  std::atomic<Mode> mode_{Mode::Unlimited};
  std::atomic<std::uint64_t> pauses_{0};
  mutable std::mutex mu_;
  std::condition_variable cv_;
  double rate_ = 0.0;  // configured events/sec, 0 = unlimited
  std::chrono::steady_clock::time_point next_permit_{};
};

/// Gates for every external input of a node, plus the pause bookkeeping the
/// overflow path uses ("pause the externals feeding this stream, resume when
/// the congested queue drains").
class GateRegistry {
 public:
  explicit GateRegistry(const WorkflowGraph& graph);

  /// Throws std::invalid_argument for interior streams: throttling anywhere
  /// but the sources can deadlock cyclic workflows.
  SourceGate& gate_for(const std::string& external_stream);
  bool has(const std::string& stream) const;

  void pause(const std::string& external_stream);
  void resume(const std::string& external_stream);
  std::uint64_t total_pauses() const;

 private:
  std::map<std::string, std::unique_ptr<SourceGate>> gates_;
};

/// --- Hotspot key splitting (associative-commutative updates only) ---
///
/// A hot key K is rewritten by the mapper to K‖sep‖i for i in [0, fanout);
/// each partial slate periodically re-emits its running value as an event
/// keyed K again, and an aggregator updater sums the partials. The caller
/// asserts the wrapped update is associative and commutative.

inline constexpr char kSplitSeparator = '#';

/// Derived key for partial i. Throws std::invalid_argument when fanout < 1.
Bytes split_key(const Bytes& base, int fanout, int i);

/// base for a derived key ("Best Buy#1" -> "Best Buy"); identity for keys
/// without a separator.
Bytes split_base(const Bytes& derived);
int split_index(const Bytes& derived);

/// Round-robin partial chooser; a shared instance is safe across workers.
class RoundRobinSplitter {
 public:
  explicit RoundRobinSplitter(int fanout);
  Bytes derive(const Bytes& base);
  int fanout() const { return fanout_; }

 private:
  int fanout_;
  std::atomic<std::uint64_t> next_{0};
};

/// Hash-based chooser: deterministic per (base, salt), no shared state.
Bytes split_by_hash(const Bytes& base, int fanout, const Bytes& salt);

/// Partial emission cadence: re-emit after `events` updates or once the
/// event-time clock advances `interval_ms` past the last emission, whichever
/// comes first.
struct PartialEmitCadence {
  std::uint64_t events = 100;
  std::uint64_t interval_ms = 1000;
};

}  // namespace slateflow
