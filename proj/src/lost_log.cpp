#include "slateflow/lost_log.hpp"

#include <chrono>

namespace slateflow {

const char* to_string(LostReason r) {
  switch (r) {
    case LostReason::SendFailed: return "SEND_FAILED";
    case LostReason::QueueDropped: return "QUEUE_DROPPED";
    case LostReason::OperatorError: return "OPERATOR_ERROR";
    case LostReason::StoreError: return "STORE_ERROR";
  }
  return "?";
}

void LostEventLog::append(Event event, std::string destination, LostReason reason) {
  auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count();
  std::lock_guard lock(mu_);
  records_.push_back({std::move(event), std::move(destination), reason,
                      static_cast<std::uint64_t>(now)});
}

std::size_t LostEventLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::vector<LostEventLog::Record> LostEventLog::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::map<Bytes, std::uint64_t> LostEventLog::lost_by_key(
    const std::string& destination) const {
  std::lock_guard lock(mu_);
  std::map<Bytes, std::uint64_t> out;
  for (const auto& r : records_)
    if (r.destination == destination) ++out[r.event.key];
  return out;
}

std::uint64_t LostEventLog::count_for(const std::string& destination) const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& r : records_)
    if (r.destination == destination) ++n;
  return n;
}

std::uint64_t LostEventLog::count_reason(LostReason reason) const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& r : records_)
    if (r.reason == reason) ++n;
  return n;
}

}  // namespace slateflow
