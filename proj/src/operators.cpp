#include "slateflow/operators.hpp"

namespace slateflow {

void EmitContext::publish(std::string stream, Bytes key, Bytes value) {
  if (graph_.is_external_input(stream))
    throw PublishError("publish into external input stream '" + stream +
                       "' (functions may never feed source streams)");
  if (!graph_.stream_known(stream))
    throw PublishError("publish to undeclared stream '" + stream + "'");
  publishes_.push_back({std::move(stream), std::move(key), std::move(value)});
}

void EmitContext::replace_slate(Bytes new_slate) {
  if (!is_update_)
    throw PublishError("replace_slate called from a map invocation");
  slate_ = std::move(new_slate);
}

namespace {

InvocationResult apply_effects(EmitContext& ctx, const FunctionDef& def,
                               const Event& event) {
  InvocationResult res;
  res.ok = true;
  res.outputs.reserve(ctx.publishes().size());
  std::size_t pos = 0;
  for (const auto& p : ctx.publishes()) {
    res.outputs.push_back(
        stamp_output(event, def.name, p.stream, p.key, p.value, pos));
    ++pos;
  }
  res.slate_replacement = ctx.slate_replacement();
  return res;
}

}  // namespace

InvocationResult invoke_map(Mapper& fn, const FunctionDef& def,
                            const Event& event, const WorkflowGraph& graph) {
  EmitContext ctx(event, graph, /*is_update=*/false);
  try {
    fn.map(ctx, event.sid, event.key, event.value);
  } catch (const std::exception& e) {
    return {.ok = false, .error = e.what()};
  } catch (...) {
    return {.ok = false, .error = "unknown operator exception"};
  }
  return apply_effects(ctx, def, event);
}

InvocationResult invoke_update(Updater& fn, const FunctionDef& def,
                               const Event& event, const Bytes* slate,
                               const WorkflowGraph& graph) {
  EmitContext ctx(event, graph, /*is_update=*/true);
  try {
    fn.update(ctx, event.sid, event.key, event.value, slate);
  } catch (const std::exception& e) {
    return {.ok = false, .error = e.what()};
  } catch (...) {
    return {.ok = false, .error = "unknown operator exception"};
  }
  return apply_effects(ctx, def, event);
}

void OperatorRegistry::register_mapper(std::string op_class, MapperFactory f) {
  mappers_[std::move(op_class)] = std::move(f);
}

void OperatorRegistry::register_updater(std::string op_class, UpdaterFactory f) {
  updaters_[std::move(op_class)] = std::move(f);
}

bool OperatorRegistry::has(const std::string& op_class) const {
  return mappers_.count(op_class) || updaters_.count(op_class);
}

std::unique_ptr<Mapper> OperatorRegistry::make_mapper(const FunctionDef& def,
                                                      const AppConfig& cfg) const {
  auto it = mappers_.find(def.op_class);
  if (it == mappers_.end())
    throw std::out_of_range("no registered mapper class '" + def.op_class + "'");
  return it->second(cfg, def.name);
}

std::unique_ptr<Updater> OperatorRegistry::make_updater(const FunctionDef& def,
                                                        const AppConfig& cfg) const {
  auto it = updaters_.find(def.op_class);
  if (it == updaters_.end())
    throw std::out_of_range("no registered updater class '" + def.op_class + "'");
  return it->second(cfg, def.name);
}

}  // namespace slateflow
