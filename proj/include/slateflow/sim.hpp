#pragma once
#include <memory>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slateflow/artifacts.hpp"
#include "slateflow/config.hpp"
#include "slateflow/event.hpp"
#include "slateflow/operators.hpp"
#include "slateflow/slate_store.hpp"

namespace slateflow {

/// Deterministic single-execution-unit run of a whole workflow: a global
/// priority queue ordered by compare_events, pop-min / invoke / push
/// emissions until quiescence, then the end-of-stream flush passes. The
/// resulting trace (slate-update log, output streams, final slates) is the
/// normative reference the concurrent engine is checked against.
class Simulator {
 public:
  Simulator(const AppConfig& config, const OperatorRegistry& registry);

  struct Result {
    std::shared_ptr<RunRecorder> trace = std::make_shared<RunRecorder>();
    std::uint64_t steps = 0;
    std::map<SlateKey, Bytes> final_slates;
  };

  /// Throws std::runtime_error when a cyclic workflow exceeds `max_steps`
  /// (events forever): the run is not quiescing.
  Result run(const std::vector<Event>& inputs, std::uint64_t max_steps = 10'000'000);

 private:
  void deliver(const Event& e);

  const AppConfig& config_;
  const OperatorRegistry& registry_;
  std::map<std::string, std::unique_ptr<Mapper>> mappers_;
  std::map<std::string, std::unique_ptr<Updater>> updaters_;
};

Simulator::Result sim_run(const AppConfig& config, const OperatorRegistry& registry,
                          const std::vector<Event>& inputs,
                          std::uint64_t max_steps = 10'000'000);

/// Trace comparison. Strict mode (single node, single worker, lockstep, zero
/// losses) demands bit-identical slate-update order and output streams.
/// Relaxed mode (concurrent runs) checks per-(updater, key) slate-update
/// subsequences, final slates, and per-stream output multisets.
struct CheckReport {
  bool pass = false;
  bool strict = false;
  std::vector<std::string> diffs;  // first divergence per key / stream

  std::string to_string() const;
};

CheckReport oracle_check(const std::string& reference_dir, const std::string& run_dir);

/// In-memory variant used by tests.
CheckReport compare_traces(const RunRecorder& reference, const RunRecorder& run,
                           bool strict);

}  // namespace slateflow
