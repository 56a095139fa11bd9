#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace slateflow {

enum class FunctionKind { Map, Update };

/// When dirty slates reach the durable store.
struct FlushPolicy {
  enum class Kind { WriteThrough, Interval, OnEvict };
  Kind kind = Kind::WriteThrough;
  std::uint64_t interval_ms = 0;  // meaningful for Kind::Interval only

  bool operator==(const FlushPolicy&) const = default;
};

/// Slate time-to-live. 0 means forever.
struct Ttl {
  std::uint64_t millis = 0;

  static Ttl forever() { return Ttl{0}; }
  static Ttl of_millis(std::uint64_t ms) { return Ttl{ms}; }
  bool is_forever() const { return millis == 0; }
  bool operator==(const Ttl&) const = default;
};

struct FunctionDef {
  std::string name;
  FunctionKind kind = FunctionKind::Map;
  // Operator class to instantiate from the registry; defaults to `name`.
  std::string op_class;
  std::vector<std::string> subscriptions;  // sorted, unique
  // Declared publish targets. Optional metadata; required only to validate
  // source-throttling ancestry for internal streams.
  std::vector<std::string> publishes;

  // Update-only settings.
  Ttl ttl = Ttl::forever();
  FlushPolicy flush;
  // Update-only: receive one control event per live slate when the harness
  // flushes at end of stream (closes trailing windows, emits final partials).
  bool end_flush = false;

  bool is_update() const { return kind == FunctionKind::Update; }
};

/// Reserved stream id for end-of-stream flush control events. Never declared
/// in configs; deliverable only by the engine/simulator to end_flush updaters.
inline constexpr const char* kFlushStream = "__flush";

struct Violation {
  std::string code;
  std::string message;
};

/// Directed (possibly cyclic) graph of map/update functions connected by
/// named streams. Immutable after construction; shared freely across workers.
struct WorkflowGraph {
  std::vector<FunctionDef> functions;
  std::set<std::string> external_inputs;
  std::set<std::string> internal_streams;
  std::set<std::string> output_streams;

  const FunctionDef* find(const std::string& name) const;

  // All streams a subscription or publish may legally reference.
  bool stream_known(const std::string& sid) const;
  bool is_external_input(const std::string& sid) const;

  // Functions subscribed to `sid`, ordered by name (the deterministic
  // delivery order for multi-subscriber streams).
  std::vector<const FunctionDef*> subscribers_of(const std::string& sid) const;

  // Functions that declared publishing into `sid`.
  std::vector<const FunctionDef*> publishers_of(const std::string& sid) const;

  // True when every producer chain feeding `sid` bottoms out at external
  // inputs, judged from declared publishes. Streams inside cycles, and
  // streams whose producers are undeclared, fail. External inputs pass
  // trivially. This is the precondition that makes source throttling safe.
  bool traces_to_external_inputs(const std::string& sid) const;

  // External inputs that feed `sid` through declared publish edges.
  std::set<std::string> ancestor_external_inputs(const std::string& sid) const;
};

/// Structural checks: duplicate names, dangling subscriptions, update-only
/// settings on map nodes, empty subscription sets, bad publish declarations.
/// Violations are data, not failures; an empty result means well-defined.
std::vector<Violation> validate_workflow(const WorkflowGraph& g);

}  // namespace slateflow
