#include "slateflow/sim.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

#include "slateflow/bytes.hpp"
#include "slateflow/workflow.hpp"

namespace fs = std::filesystem;

namespace slateflow {

Simulator::Simulator(const AppConfig& config, const OperatorRegistry& registry)
    : config_(config), registry_(registry) {
  for (const auto& f : config_.workflow.functions) {
    if (f.is_update())
      updaters_[f.name] = registry_.make_updater(f, config_);
    else
      mappers_[f.name] = registry_.make_mapper(f, config_);
  }
}

Simulator::Result Simulator::run(const std::vector<Event>& inputs,
                                 std::uint64_t max_steps) {
  auto later = [](const Event& a, const Event& b) {
    return compare_events(a, b) == std::strong_ordering::greater;
  };
  std::priority_queue<Event, std::vector<Event>, decltype(later)> heap(later);
  for (const auto& e : inputs) heap.push(e);

  Result result;
  std::map<SlateKey, Bytes>& slates = result.final_slates;
  std::map<SlateKey, Timestamp> flush_ts;

  auto apply_invocation = [&](const FunctionDef& fn, const Event& e,
                              bool is_flush) {
    ++result.steps;
    if (result.steps > max_steps)
      throw std::runtime_error(
          "simulation exceeded " + std::to_string(max_steps) +
          " steps without quiescing; the workflow is generating events forever");
    InvocationResult res;
    if (fn.is_update()) {
      SlateKey sk{fn.name, e.key};
      auto it = slates.find(sk);
      const Bytes* slate = it == slates.end() ? nullptr : &it->second;
      res = invoke_update(*updaters_.at(fn.name), fn, e, slate, config_.workflow);
      if (res.ok && res.slate_replacement) {
        slates[sk] = *res.slate_replacement;
        result.trace->record_slate_update(sk, *res.slate_replacement);
        if (fn.end_flush && !is_flush) flush_ts[sk] = e.ts;
      }
    } else {
      res = invoke_map(*mappers_.at(fn.name), fn, e, config_.workflow);
    }
    if (!res.ok) return;  // failed event: effects discarded, not retried
    for (const auto& out : res.outputs) {
      if (config_.workflow.output_streams.count(out.sid))
        result.trace->record_output(out);
      if (!config_.workflow.subscribers_of(out.sid).empty()) heap.push(out);
    }
  };

  auto drain = [&] {
    while (!heap.empty()) {
      Event e = heap.top();
      heap.pop();
      for (const auto* fn : config_.workflow.subscribers_of(e.sid))
        apply_invocation(*fn, e, false);
    }
  };

  drain();

  // End-of-stream flush: one control event per live slate of each end_flush
  // updater, in (function name, key) order, quiescing after each.
  std::vector<const FunctionDef*> flush_fns;
  for (const auto& f : config_.workflow.functions)
    if (f.is_update() && f.end_flush) flush_fns.push_back(&f);
  std::sort(flush_fns.begin(), flush_fns.end(),
            [](auto* a, auto* b) { return a->name < b->name; });
  for (const auto* fn : flush_fns) {
    std::vector<SlateKey> keys;
    for (const auto& [sk, body] : slates)
      if (sk.updater == fn->name && flush_ts.count(sk)) keys.push_back(sk);
    for (const auto& sk : keys) {
      Timestamp last = flush_ts.at(sk);
      Event flush;
      flush.sid = kFlushStream;
      flush.ts = Timestamp{last.millis, last.seq + 1};
      flush.key = sk.key;
      flush.producer = "flush";
      apply_invocation(*fn, flush, true);
      drain();
    }
  }

  result.trace->set_final_slates(slates);
  result.trace->set_meta(1, 1, /*lockstep=*/true, /*losses=*/0);
  return result;
}

Simulator::Result sim_run(const AppConfig& config,
                          const OperatorRegistry& registry,
                          const std::vector<Event>& inputs,
                          std::uint64_t max_steps) {
  Simulator sim(config, registry);
  return sim.run(inputs, max_steps);
}

namespace {

struct TraceData {
  std::vector<std::string> updates;  // "updater\tb64key\tb64body"
  std::map<std::string, std::vector<std::string>> outputs;  // sid -> lines
  std::vector<std::string> finals;
  RunMeta meta;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

TraceData load_dir(const std::string& dir) {
  TraceData t;
  t.updates = read_lines(dir + "/slate_updates.log");
  t.finals = read_lines(dir + "/final_slates.tsv");
  t.meta = read_run_meta(dir);
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir + "/outputs", ec)) {
    auto name = e.path().filename().string();
    if (!name.ends_with(".events")) continue;
    t.outputs[name.substr(0, name.size() - 7)] = read_lines(e.path().string());
  }
  return t;
}

TraceData from_recorder(const RunRecorder& r) {
  TraceData t;
  for (const auto& u : r.slate_updates())
    t.updates.push_back(u.key.updater + "\t" + base64_encode(u.key.key) + "\t" +
                        base64_encode(u.body));
  for (const auto& [sid, events] : r.outputs()) {
    auto& lines = t.outputs[sid];
    for (const auto& e : events) {
      std::string line = format_output_line(e);
      line.pop_back();  // trailing newline
      lines.push_back(std::move(line));
    }
  }
  for (const auto& [sk, body] : r.final_slates())
    t.finals.push_back(sk.updater + "\t" + base64_encode(sk.key) + "\t" +
                       base64_encode(body));
  return t;
}

std::string update_key_of(const std::string& line) {
  auto second_tab = line.find('\t', line.find('\t') + 1);
  return line.substr(0, second_tab);
}

CheckReport compare(const TraceData& ref, const TraceData& run, bool strict) {
  CheckReport report;
  report.strict = strict;
  auto& diffs = report.diffs;

  if (strict) {
    std::size_t n = std::min(ref.updates.size(), run.updates.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (ref.updates[i] != run.updates[i]) {
        diffs.push_back("slate update #" + std::to_string(i) +
                        ": expected [" + ref.updates[i] + "], got [" +
                        run.updates[i] + "]");
        break;
      }
    }
    if (diffs.empty() && ref.updates.size() != run.updates.size())
      diffs.push_back("slate update count: expected " +
                      std::to_string(ref.updates.size()) + ", got " +
                      std::to_string(run.updates.size()));
  } else {
    // Per-(updater, key) subsequences must match exactly.
    std::map<std::string, std::vector<std::string>> ref_seq, run_seq;
    for (const auto& u : ref.updates) ref_seq[update_key_of(u)].push_back(u);
    for (const auto& u : run.updates) run_seq[update_key_of(u)].push_back(u);
    for (const auto& [k, seq] : ref_seq) {
      auto it = run_seq.find(k);
      if (it == run_seq.end()) {
        diffs.push_back("slate " + k + ": missing from run");
        continue;
      }
      if (it->second != seq) {
        std::size_t i = 0;
        while (i < seq.size() && i < it->second.size() && seq[i] == it->second[i])
          ++i;
        diffs.push_back("slate " + k + ": first divergence at update #" +
                        std::to_string(i));
      }
    }
    for (const auto& [k, seq] : run_seq)
      if (!ref_seq.count(k)) diffs.push_back("slate " + k + ": unexpected in run");
  }

  // Output streams: exact order in strict mode, multiset otherwise.
  auto all_sids = [&] {
    std::vector<std::string> sids;
    for (const auto& [sid, lines] : ref.outputs) sids.push_back(sid);
    for (const auto& [sid, lines] : run.outputs)
      if (!ref.outputs.count(sid)) sids.push_back(sid);
    return sids;
  }();
  for (const auto& sid : all_sids) {
    auto r = ref.outputs.count(sid) ? ref.outputs.at(sid) : std::vector<std::string>{};
    auto g = run.outputs.count(sid) ? run.outputs.at(sid) : std::vector<std::string>{};
    if (!strict) {
      std::sort(r.begin(), r.end());
      std::sort(g.begin(), g.end());
    }
    if (r != g) {
      std::size_t i = 0;
      while (i < r.size() && i < g.size() && r[i] == g[i]) ++i;
      diffs.push_back("output stream " + sid + ": diverges at event #" +
                      std::to_string(i) + " (expected " +
                      std::to_string(r.size()) + " events, got " +
                      std::to_string(g.size()) + ")");
    }
  }

  // Final slates always compare as sorted sets.
  auto rf = ref.finals;
  auto gf = run.finals;
  std::sort(rf.begin(), rf.end());
  std::sort(gf.begin(), gf.end());
  if (rf != gf) {
    std::size_t i = 0;
    while (i < rf.size() && i < gf.size() && rf[i] == gf[i]) ++i;
    std::string want = i < rf.size() ? rf[i] : "<none>";
    std::string got = i < gf.size() ? gf[i] : "<none>";
    diffs.push_back("final slates differ: expected [" + want + "], got [" +
                    got + "]");
  }

  report.pass = diffs.empty();
  return report;
}

}  // namespace

std::string CheckReport::to_string() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " (" << (strict ? "strict" : "relaxed")
     << " mode)";
  for (const auto& d : diffs) os << "\n  " << d;
  return os.str();
}

CheckReport oracle_check(const std::string& reference_dir,
                         const std::string& run_dir) {
  TraceData ref = load_dir(reference_dir);
  TraceData run = load_dir(run_dir);
  bool strict = run.meta.nodes == 1 && run.meta.workers == 1 &&
                run.meta.lockstep && run.meta.losses == 0;
  return compare(ref, run, strict);
}

CheckReport compare_traces(const RunRecorder& reference, const RunRecorder& run,
                           bool strict) {
  return compare(from_recorder(reference), from_recorder(run), strict);
}

}  // namespace slateflow
