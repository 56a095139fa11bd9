#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slateflow/config.hpp"
#include "slateflow/event.hpp"
#include "slateflow/workflow.hpp"

namespace slateflow {

class PublishError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collects the effects of one operator invocation. Publishes and the slate
/// replacement are buffered here and applied by the runtime only after the
/// body returns normally; a throwing body leaves no partial effects.
class EmitContext {
 public:
  EmitContext(const Event& input, const WorkflowGraph& graph, bool is_update)
      : input_(input), graph_(graph), is_update_(is_update) {}

  const Event& input_event() const { return input_; }

  /// Buffers an output event. The runtime stamps its timestamp strictly
  /// greater than the input's when applying. Publishing into an external
  /// input stream is a workflow bug and is rejected here.
  void publish(std::string stream, Bytes key, Bytes value);

  /// Replaces the slate for the invocation's key; last call wins. Applied
  /// atomically with the buffered publishes. Update invocations only.
  void replace_slate(Bytes new_slate);

  struct Publish {
    std::string stream;
    Bytes key;
    Bytes value;
  };
  const std::vector<Publish>& publishes() const { return publishes_; }
  const std::optional<Bytes>& slate_replacement() const { return slate_; }

 private:
  const Event& input_;
  const WorkflowGraph& graph_;
  bool is_update_;
  std::vector<Publish> publishes_;
  std::optional<Bytes> slate_;
};

/// Stateless ("memoryless") operator. One instance per node is shared by all
/// workers, so bodies must be reentrant and must not keep per-call state.
class Mapper {
 public:
  virtual ~Mapper() = default;
  virtual void map(EmitContext& ctx, const std::string& stream,
                   const Bytes& key, const Bytes& value) = 0;
};

/// Stateful operator. `slate` is nullptr the first time a key is seen (or
/// after TTL expiry); the body must initialize its state via replace_slate
/// before relying on it. No state may live outside the slate.
class Updater {
 public:
  virtual ~Updater() = default;
  virtual void update(EmitContext& ctx, const std::string& stream,
                      const Bytes& key, const Bytes& value,
                      const Bytes* slate) = 0;
};

struct InvocationResult {
  bool ok = false;
  std::string error;                  // when !ok
  std::vector<Event> outputs;         // stamped, in publish order
  std::optional<Bytes> slate_replacement;
};

/// Runs a map body and stamps its buffered publishes. A throwing body yields
/// ok = false with every effect discarded; the runtime logs the event as
/// failed and does not retry.
InvocationResult invoke_map(Mapper& fn, const FunctionDef& def,
                            const Event& event, const WorkflowGraph& graph);

/// Same contract for update bodies, with the current slate (or nullptr).
InvocationResult invoke_update(Updater& fn, const FunctionDef& def,
                               const Event& event, const Bytes* slate,
                               const WorkflowGraph& graph);

/// Named operator constructors. Applications register factories keyed by
/// class name at startup; the engine instantiates each configured function
/// exactly once per node and shares the instance across workers.
class OperatorRegistry {
 public:
  using MapperFactory =
      std::function<std::unique_ptr<Mapper>(const AppConfig&, const std::string&)>;
  using UpdaterFactory =
      std::function<std::unique_ptr<Updater>(const AppConfig&, const std::string&)>;

  void register_mapper(std::string op_class, MapperFactory f);
  void register_updater(std::string op_class, UpdaterFactory f);

  bool has(const std::string& op_class) const;

  /// Throws std::out_of_range when the class is unregistered or its kind
  /// does not match the definition.
  std::unique_ptr<Mapper> make_mapper(const FunctionDef& def,
                                      const AppConfig& cfg) const;
  std::unique_ptr<Updater> make_updater(const FunctionDef& def,
                                        const AppConfig& cfg) const;

 private:
  std::map<std::string, MapperFactory> mappers_;
  std::map<std::string, UpdaterFactory> updaters_;
};

}  // namespace slateflow
