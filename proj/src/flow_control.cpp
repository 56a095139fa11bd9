#include "slateflow/flow_control.hpp"

#include <chrono>
#include <stdexcept>

#include "slateflow/hash.hpp"

namespace slateflow {

void SourceGate::pause() {
  {
    std::lock_guard lock(mu_);
    if (mode_.load(std::memory_order_relaxed) != Mode::Paused)
      pauses_.fetch_add(1, std::memory_order_relaxed);
    mode_.store(Mode::Paused, std::memory_order_relaxed);
  }
  cv_.notify_all();
}

void SourceGate::resume() {
  {
    std::lock_guard lock(mu_);
    mode_.store(rate_ > 0.0 ? Mode::Rate : Mode::Unlimited,
                std::memory_order_relaxed);
  }
  cv_.notify_all();
}

void SourceGate::set_rate(double events_per_sec) {
  if (events_per_sec <= 0.0)
    throw std::invalid_argument("rate must be positive; use pause() instead");
  {
    std::lock_guard lock(mu_);
    rate_ = events_per_sec;
    if (mode_.load(std::memory_order_relaxed) != Mode::Paused)
      mode_.store(Mode::Rate, std::memory_order_relaxed);
    next_permit_ = std::chrono::steady_clock::now();
  }
  cv_.notify_all();
}

void SourceGate::set_unlimited() {
  {
    std::lock_guard lock(mu_);
    rate_ = 0.0;
    if (mode_.load(std::memory_order_relaxed) != Mode::Paused)
      mode_.store(Mode::Unlimited, std::memory_order_relaxed);
  }
  cv_.notify_all();
}

bool SourceGate::wait_permit(const std::atomic<bool>& stop) {
  // Fast path: unlimited gate, one atomic load.
  if (mode_.load(std::memory_order_relaxed) == Mode::Unlimited &&
      !stop.load(std::memory_order_relaxed))
    return true;

  std::unique_lock lock(mu_);
  for (;;) {
    if (stop.load(std::memory_order_relaxed)) return false;
    switch (mode_.load(std::memory_order_relaxed)) {
      case Mode::Unlimited:
        return true;
      case Mode::Paused:
        cv_.wait_for(lock, std::chrono::milliseconds(5));
        break;
      case Mode::Rate: {
        auto now = std::chrono::steady_clock::now();
        if (now >= next_permit_) {
          auto step = std::chrono::nanoseconds(
              static_cast<std::int64_t>(1e9 / rate_));
          next_permit_ = std::max(next_permit_ + step, now - step * 4);
          return true;
        }
        cv_.wait_until(lock, next_permit_);
        break;
      }
    }
  }
}

GateRegistry::GateRegistry(const WorkflowGraph& graph) {
  for (const auto& s : graph.external_inputs)
    gates_.emplace(s, std::make_unique<SourceGate>());
}

SourceGate& GateRegistry::gate_for(const std::string& external_stream) {
  auto it = gates_.find(external_stream);
  if (it == gates_.end())
    throw std::invalid_argument("'" + external_stream +
                                "' is not an external input stream; only "
                                "sources may be throttled");
  return *it->second;
}

bool GateRegistry::has(const std::string& stream) const {
  return gates_.count(stream) > 0;
}

void GateRegistry::pause(const std::string& external_stream) {
  gate_for(external_stream).pause();
}

void GateRegistry::resume(const std::string& external_stream) {
  gate_for(external_stream).resume();
}

std::uint64_t GateRegistry::total_pauses() const {
  std::uint64_t n = 0;
  for (const auto& [name, g] : gates_) n += g->pause_count();
  return n;
}

Bytes split_key(const Bytes& base, int fanout, int i) {
  if (fanout < 1) throw std::invalid_argument("fanout must be >= 1");
  if (i < 0 || i >= fanout) throw std::invalid_argument("partial index out of range");
  return base + kSplitSeparator + std::to_string(i);
}

Bytes split_base(const Bytes& derived) {
  auto pos = derived.rfind(kSplitSeparator);
  if (pos == Bytes::npos) return derived;
  for (std::size_t i = pos + 1; i < derived.size(); ++i)
    if (derived[i] < '0' || derived[i] > '9') return derived;
  if (pos + 1 == derived.size()) return derived;
  return derived.substr(0, pos);
}

int split_index(const Bytes& derived) {
  auto pos = derived.rfind(kSplitSeparator);
  if (pos == Bytes::npos || pos + 1 == derived.size()) return 0;
  return std::stoi(derived.substr(pos + 1));
}

RoundRobinSplitter::RoundRobinSplitter(int fanout) : fanout_(fanout) {
  if (fanout < 1) throw std::invalid_argument("fanout must be >= 1");
}

Bytes RoundRobinSplitter::derive(const Bytes& base) {
  auto n = next_.fetch_add(1, std::memory_order_relaxed);
  return split_key(base, fanout_, static_cast<int>(n % static_cast<std::uint64_t>(fanout_)));
}

Bytes split_by_hash(const Bytes& base, int fanout, const Bytes& salt) {
  if (fanout < 1) throw std::invalid_argument("fanout must be >= 1");
  auto h = mix64(fnv1a64(salt, fnv1a64(base)));
  return split_key(base, fanout, static_cast<int>(h % static_cast<std::uint64_t>(fanout)));
}

}  // namespace slateflow
