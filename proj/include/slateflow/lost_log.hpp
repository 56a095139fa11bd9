#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "slateflow/event.hpp"

namespace slateflow {

enum class LostReason { SendFailed, QueueDropped, OperatorError, StoreError };

const char* to_string(LostReason r);

/// Append-only ledger of every event that was neither delivered to its
/// operator nor processed. Each (event, destination) unit appears at most
/// once. Shared across all nodes of a run; the accounting side of the
/// conservation invariant injected = processed + lost.
class LostEventLog {
 public:
  struct Record {
    Event event;
    std::string destination;  // function the unit was bound for
    LostReason reason;
    std::uint64_t wall_millis;
  };

  void append(Event event, std::string destination, LostReason reason);

  std::size_t size() const;
  std::vector<Record> snapshot() const;

  // Units lost on their way to `destination`, grouped by event key.
  std::map<Bytes, std::uint64_t> lost_by_key(const std::string& destination) const;
  std::uint64_t count_for(const std::string& destination) const;
  std::uint64_t count_reason(LostReason r) const;

 private:
  mutable std::mutex mu_;
  std::vector<Record> records_;
};

}  // namespace slateflow
