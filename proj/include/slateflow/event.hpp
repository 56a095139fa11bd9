#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "slateflow/bytes.hpp"

namespace slateflow {

/// Global logical time. `millis` comes from the producing source's clock;
/// `seq` is a sub-millisecond sequence assigned by the source or by the
/// operator that emitted the event. Ordering is lexicographic, so an operator
/// can stamp outputs strictly after its input without touching a clock.
struct Timestamp {
  std::uint64_t millis = 0;
  std::uint64_t seq = 0;

  auto operator<=>(const Timestamp&) const = default;
};

/// The unit of flow. `key` and `value` are opaque byte sequences; `producer`
/// identifies who emitted the event and participates only in tie-breaking.
struct Event {
  std::string sid;
  Timestamp ts;
  Bytes key;
  Bytes value;
  std::string producer;

  bool operator==(const Event&) const = default;
};

/// Total, deterministic event order: (millis, seq), then sid, then key bytes,
/// then producer. Two distinct events never compare equivalent within one run
/// because producers stamp unique (producer, seq) pairs.
std::strong_ordering compare_events(const Event& a, const Event& b);

/// Stamps the `position`-th buffered publish of an invocation. The output
/// timestamp is (input.millis, input.seq + position + 1), strictly greater
/// than the input's, and the producer is the emitting function name plus a
/// digest of the input event's identity so outputs of distinct invocations
/// stay distinct even when their timestamps collide.
Event stamp_output(const Event& input, const std::string& emitter,
                   std::string stream, Bytes key, Bytes value,
                   std::size_t position);

}  // namespace slateflow
