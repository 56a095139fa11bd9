#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slateflow/event.hpp"
#include "slateflow/flow_control.hpp"

namespace slateflow {

/// Replay file format, one event per line:
///   sid TAB millis TAB seq TAB key TAB base64(value)
/// Lines must be sorted by (millis, seq); seq is unique per (millis,
/// producer). The producer of replayed events is "src:<sid>".
struct SourceRecord {
  Event event;
};

class SourceParseError : public std::runtime_error {
 public:
  SourceParseError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses one line. Throws SourceParseError.
Event parse_source_line(const std::string& line, int lineno);

/// Loads and validates a whole file (ordering enforced).
std::vector<Event> load_source_file(const std::string& path);

std::string format_source_line(const Event& e);

/// The source-mapper role: replays a file into the workflow, one event at a
/// time, obeying the stream's gate. With `lockstep` set it waits for the
/// sink to go quiescent before each injection, which makes a single-node
/// single-worker run reproduce the reference semantics exactly.
struct FileSourceOptions {
  bool lockstep = false;
  bool stamp_origin = true;  // record steady-clock origin for latency
};

class FileSource {
 public:
  using Options = FileSourceOptions;
  using Inject = std::function<void(const Event&, std::uint64_t origin_ns)>;
  using Quiesce = std::function<void()>;

  FileSource(std::string path, SourceGate& gate, Options options = {});

  /// Runs to end of file on the calling thread (which is tagged as a source
  /// for enqueue-origin purposes). Returns the number of injected events.
  std::size_t pump(const Inject& inject, const Quiesce& quiesce);

  void request_stop() { stop_.store(true); }

 private:
  std::string path_;
  SourceGate& gate_;
  Options options_;
  std::atomic<bool> stop_{false};
};

}  // namespace slateflow
