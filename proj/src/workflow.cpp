#include "slateflow/workflow.hpp"

#include <algorithm>
#include <map>

namespace slateflow {

const FunctionDef* WorkflowGraph::find(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

bool WorkflowGraph::stream_known(const std::string& sid) const {
  return external_inputs.count(sid) || internal_streams.count(sid) ||
         output_streams.count(sid);
}

bool WorkflowGraph::is_external_input(const std::string& sid) const {
  return external_inputs.count(sid) > 0;
}

std::vector<const FunctionDef*> WorkflowGraph::subscribers_of(
    const std::string& sid) const {
  std::vector<const FunctionDef*> out;
  for (const auto& f : functions)
    if (std::find(f.subscriptions.begin(), f.subscriptions.end(), sid) !=
        f.subscriptions.end())
      out.push_back(&f);
  std::sort(out.begin(), out.end(),
            [](auto* a, auto* b) { return a->name < b->name; });
  return out;
}

std::vector<const FunctionDef*> WorkflowGraph::publishers_of(
    const std::string& sid) const {
  std::vector<const FunctionDef*> out;
  for (const auto& f : functions)
    if (std::find(f.publishes.begin(), f.publishes.end(), sid) !=
        f.publishes.end())
      out.push_back(&f);
  std::sort(out.begin(), out.end(),
            [](auto* a, auto* b) { return a->name < b->name; });
  return out;
}

namespace {

enum class Trace { Unknown, Visiting, Ok, Bad };

Trace trace_stream(const WorkflowGraph& g, const std::string& sid,
                   std::map<std::string, Trace>& memo) {
  if (g.is_external_input(sid)) return Trace::Ok;
  auto [it, inserted] = memo.emplace(sid, Trace::Visiting);
  if (!inserted) {
    // Re-entering a stream under evaluation means a cycle feeds it.
    return it->second == Trace::Visiting ? Trace::Bad : it->second;
  }
  auto producers = g.publishers_of(sid);
  Trace result = producers.empty() ? Trace::Bad : Trace::Ok;
  for (const auto* f : producers) {
    for (const auto& in : f->subscriptions) {
      if (trace_stream(g, in, memo) != Trace::Ok) {
        result = Trace::Bad;
        break;
      }
    }
    if (result == Trace::Bad) break;
  }
  memo[sid] = result;
  return result;
}

void collect_externals(const WorkflowGraph& g, const std::string& sid,
                       std::set<std::string>& seen,
                       std::set<std::string>& out) {
  if (g.is_external_input(sid)) {
    out.insert(sid);
    return;
  }
  if (!seen.insert(sid).second) return;
  for (const auto* f : g.publishers_of(sid))
    for (const auto& in : f->subscriptions) collect_externals(g, in, seen, out);
}

}  // namespace

bool WorkflowGraph::traces_to_external_inputs(const std::string& sid) const {
  std::map<std::string, Trace> memo;
  return trace_stream(*this, sid, memo) == Trace::Ok;
}

std::set<std::string> WorkflowGraph::ancestor_external_inputs(
    const std::string& sid) const {
  std::set<std::string> seen, out;
  collect_externals(*this, sid, seen, out);
  return out;
}

std::vector<Violation> validate_workflow(const WorkflowGraph& g) {
  std::vector<Violation> v;
  std::set<std::string> names;
  for (const auto& f : g.functions) {
    if (!names.insert(f.name).second)
      v.push_back({"duplicate-name", "duplicate function name '" + f.name + "'"});
    if (f.subscriptions.empty())
      v.push_back({"no-subscriptions",
                   "function '" + f.name + "' subscribes to no streams"});
    for (const auto& s : f.subscriptions) {
      if (!g.stream_known(s))
        v.push_back({"dangling-subscription", "function '" + f.name +
                                                  "' subscribes to undeclared stream '" +
                                                  s + "'"});
      if (s == kFlushStream)
        v.push_back({"reserved-stream",
                     "function '" + f.name + "' subscribes to reserved stream"});
    }
    for (const auto& s : f.publishes) {
      if (!g.stream_known(s))
        v.push_back({"dangling-publish", "function '" + f.name +
                                             "' declares publishing to undeclared stream '" +
                                             s + "'"});
      else if (g.is_external_input(s))
        v.push_back({"publish-to-external",
                     "function '" + f.name +
                         "' declares publishing into external input '" + s + "'"});
    }
    if (!f.is_update()) {
      if (!f.ttl.is_forever())
        v.push_back({"ttl-on-map", "map '" + f.name + "' sets ttl"});
      if (f.flush != FlushPolicy{})
        v.push_back({"flush-on-map", "map '" + f.name + "' sets flush policy"});
      if (f.end_flush)
        v.push_back({"end-flush-on-map", "map '" + f.name + "' sets end_flush"});
    }
  }
  return v;
}

}  // namespace slateflow
