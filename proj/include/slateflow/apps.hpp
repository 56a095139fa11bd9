#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slateflow/flow_control.hpp"
#include "slateflow/operators.hpp"

namespace slateflow {

/// Minute of day in [0, 1439]: 00:14 -> 14, 23:59 -> 1439.
inline std::uint64_t minute_of(Timestamp ts) {
  return ts.millis % 86'400'000 / 60'000;
}

/// Day index of a timestamp (whole days since the epoch of the millis clock).
inline std::uint64_t day_index(Timestamp ts) { return ts.millis / 86'400'000; }

/// Venue-name classification for the check-in counter: case-insensitive
/// pattern match, wal*mart -> "Walmart", sam's club variants -> "Sam's Club".
std::optional<std::string> retailer_match(const std::string& venue);

/// Pulls the "venue" field out of a check-in value (a JSON object).
std::optional<std::string> venue_of_checkin(const Bytes& value);

/// Map for the per-retailer counter: identifies the retailer of each
/// check-in and republishes the check-in under the retailer key. Emits
/// nothing for unrecognized venues. Undecodable values count as no match.
class RetailerMapper : public Mapper {
 public:
  RetailerMapper(const AppConfig& cfg, const std::string& name);
  void map(EmitContext& ctx, const std::string& stream, const Bytes& key,
           const Bytes& value) override;

  std::uint64_t undecodable_count() const { return undecodable_.load(); }

 private:
  std::string emit_stream_;
  std::atomic<std::uint64_t> undecodable_{0};
};

/// The counting updater: slate is the decimal count as text; an absent or
/// unparsable slate restarts from zero.
class CounterUpdater : public Updater {
 public:
  CounterUpdater(const AppConfig& cfg, const std::string& name);
  void update(EmitContext& ctx, const std::string& stream, const Bytes& key,
              const Bytes& value, const Bytes* slate) override;

  static std::uint64_t step(const Bytes* slate);

 private:
  std::uint64_t delay_us_ = 0;  // simulated per-event cost, for load tests
};

struct TopicTable {
  struct Entry {
    std::string topic;
    std::vector<std::string> keywords;  // case-insensitive substrings
  };
  std::vector<Entry> entries;

  /// "earthquake:earthquake|quake;concert:concert" — keywords default to the
  /// topic name itself.
  static TopicTable parse(const std::string& text);
  std::vector<std::string> classify(const std::string& text) const;
};

/// Map for hot-topic detection: classifies a tweet into topics and publishes
/// one event per matched topic v under the key "v.m" (m = minute of day).
class TopicMapper : public Mapper {
 public:
  TopicMapper(const AppConfig& cfg, const std::string& name);
  void map(EmitContext& ctx, const std::string& stream, const Bytes& key,
           const Bytes& value) override;

 private:
  std::string emit_stream_;
  TopicTable table_;
};

/// Per-minute counter (U1 of the hot-topic app): counts events per "v.m"
/// key; once an incoming event's timestamp passes the window's first event
/// by the window length, publishes (key, count) and starts the next window
/// at the closing event. The end-of-stream flush event closes trailing
/// windows.
class MinuteCounterUpdater : public Updater {
 public:
  MinuteCounterUpdater(const AppConfig& cfg, const std::string& name);
  void update(EmitContext& ctx, const std::string& stream, const Bytes& key,
              const Bytes& value, const Bytes* slate) override;

 private:
  std::string emit_stream_;
  std::uint64_t window_ms_ = 60'000;
};

/// Hot-topic detector (U2): keeps total_count and days per "v.m" slate; an
/// incoming per-minute count is hot when count / (total_count / days)
/// exceeds the threshold. The first observation of a key defines the ratio
/// as 1 (never hot at thresholds above 1).
class HotDetectorUpdater : public Updater {
 public:
  HotDetectorUpdater(const AppConfig& cfg, const std::string& name);
  void update(EmitContext& ctx, const std::string& stream, const Bytes& key,
              const Bytes& value, const Bytes* slate) override;

 private:
  std::string emit_stream_;
  double threshold_ = 4.0;
};

/// Hotspot splitting map: rewrites each event key to key#i so a hot key's
/// load spreads over `fanout` partial slates. Round-robin or hash choice.
class SplitKeyMapper : public Mapper {
 public:
  SplitKeyMapper(const AppConfig& cfg, const std::string& name);
  void map(EmitContext& ctx, const std::string& stream, const Bytes& key,
           const Bytes& value) override;

 private:
  std::string emit_stream_;
  bool by_hash_ = false;
  RoundRobinSplitter splitter_;
};

/// Partial counter: counts events per split key and periodically re-emits
/// its absolute count as an event keyed by the base key, value "i:count".
/// Absolute values make re-emission idempotent at the aggregator.
class PartialCountUpdater : public Updater {
 public:
  PartialCountUpdater(const AppConfig& cfg, const std::string& name);
  void update(EmitContext& ctx, const std::string& stream, const Bytes& key,
              const Bytes& value, const Bytes* slate) override;

 private:
  std::string emit_stream_;
  PartialEmitCadence cadence_;
};

/// Aggregator over partial counts: tracks the latest absolute value per
/// partial and keeps the sum in the slate ({"parts": {...}, "total": n}).
class PartialSumAggregator : public Updater {
 public:
  PartialSumAggregator(const AppConfig& cfg, const std::string& name);
  void update(EmitContext& ctx, const std::string& stream, const Bytes& key,
              const Bytes& value, const Bytes* slate) override;

  static std::uint64_t total_of(const Bytes& slate);
};

/// Registers every example operator class under its config name:
/// retailer_map, counter, topic_map, minute_counter, hot_detector,
/// split_map, partial_count, partial_sum.
void register_builtin_operators(OperatorRegistry& registry);

}  // namespace slateflow
