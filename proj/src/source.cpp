#include "slateflow/source.hpp"

#include <charconv>
#include <chrono>
#include <fstream>

#include "slateflow/bytes.hpp"
#include "slateflow/runtime.hpp"

namespace slateflow {

namespace {

std::uint64_t steady_ns_now() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::uint64_t to_u64(const std::string& s, int lineno, const char* what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw SourceParseError(lineno, std::string("invalid ") + what + ": '" + s + "'");
  return v;
}

}  // namespace

Event parse_source_line(const std::string& line, int lineno) {
  auto fields = split_tabs(line);
  if (fields.size() != 5)
    throw SourceParseError(lineno, "expected 5 tab-separated fields, got " +
                                       std::to_string(fields.size()));
  Event e;
  e.sid = fields[0];
  if (e.sid.empty()) throw SourceParseError(lineno, "empty stream id");
  e.ts.millis = to_u64(fields[1], lineno, "millis");
  e.ts.seq = to_u64(fields[2], lineno, "seq");
  e.key = fields[3];
  if (e.key.empty()) throw SourceParseError(lineno, "empty key");
  try {
    e.value = base64_decode(fields[4]);
  } catch (const std::invalid_argument& err) {
    throw SourceParseError(lineno, err.what());
  }
  e.producer = "src:" + e.sid;
  return e;
}

std::string format_source_line(const Event& e) {
  return e.sid + "\t" + std::to_string(e.ts.millis) + "\t" +
         std::to_string(e.ts.seq) + "\t" + e.key + "\t" +
         base64_encode(e.value) + "\n";
}

std::vector<Event> load_source_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SourceParseError(0, "cannot open source file: " + path);
  std::vector<Event> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Event e = parse_source_line(line, lineno);
    if (!events.empty() && Timestamp{e.ts} < events.back().ts)
      throw SourceParseError(lineno, "events out of (millis, seq) order");
    events.push_back(std::move(e));
  }
  return events;
}

FileSource::FileSource(std::string path, SourceGate& gate, Options options)
    : path_(std::move(path)), gate_(gate), options_(options) {}

std::size_t FileSource::pump(const Inject& inject, const Quiesce& quiesce) {
  auto prev = set_thread_enqueue_origin(EnqueueOrigin::Source);
  auto events = load_source_file(path_);  // may throw: source halts with a position
  std::size_t n = 0;
  for (const auto& e : events) {
    if (stop_.load(std::memory_order_relaxed)) break;
    if (!gate_.wait_permit(stop_)) break;
    if (options_.lockstep && quiesce) quiesce();
    inject(e, options_.stamp_origin ? steady_ns_now() : 0);
    ++n;
  }
  if (options_.lockstep && quiesce) quiesce();
  set_thread_enqueue_origin(prev);
  return n;
}

}  // namespace slateflow
