#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "slateflow/workflow.hpp"

namespace slateflow {

struct NodeAddress {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
  bool operator==(const NodeAddress&) const = default;
  auto operator<=>(const NodeAddress&) const = default;
};

enum class Consistency { One, Quorum, All };

struct StoreSettings {
  std::string path;
  Consistency consistency = Consistency::Quorum;
  int replicas = 1;
};

/// What to do when a destination queue is full, configured per stream.
struct OverflowPolicy {
  enum class Kind { DropAndLog, OverflowStream, ThrottleSource };
  Kind kind = Kind::DropAndLog;
  std::string target;  // OverflowStream only

  bool operator==(const OverflowPolicy&) const = default;
};

struct RuntimeSettings {
  std::size_t queue_capacity = 10000;
  int workers = 8;  // per node
  // Two-queue dispatch: divert to the secondary only when its queue is
  // shorter than theta times the primary's, and the primary already holds at
  // least divert_floor entries.
  double theta = 0.5;
  std::size_t divert_floor = 16;
  std::uint64_t flush_tick_ms = 1000;
  bool audit_contention = true;
  // HTTP service listens on node wire port + http_offset.
  int http_offset = 1;
  std::uint64_t connect_timeout_ms = 500;
  std::size_t slate_cache_capacity = 1 << 20;
};

struct AppConfig {
  WorkflowGraph workflow;
  std::vector<NodeAddress> nodes;
  NodeAddress master;
  StoreSettings store;
  RuntimeSettings runtime;
  std::map<std::string, OverflowPolicy> overflow;      // by destination stream
  std::map<std::string, std::string> source_inputs;    // external stream -> file
  std::map<std::string, std::string> app;              // operator settings

  OverflowPolicy overflow_for(const std::string& sid) const {
    auto it = overflow.find(sid);
    return it == overflow.end() ? OverflowPolicy{} : it->second;
  }
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        line_(line) {}
  explicit ConfigError(std::vector<Violation> violations);

  int line() const { return line_; }
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<Violation>& v);
  int line_ = 0;
  std::vector<Violation> violations_;
};

/// Parses the documented config format and applies validate_workflow plus
/// cross-section checks (overflow targets, throttle ancestry, bounds).
/// Throws ConfigError with a line number for syntax errors, or with the
/// violation list for semantic ones.
AppConfig parse_config(std::string_view text);
AppConfig parse_config_file(const std::string& path);

/// "5s", "250ms", "2m", "1h" -> milliseconds. Bare digits are milliseconds.
std::uint64_t parse_duration_ms(std::string_view text);

}  // namespace slateflow
