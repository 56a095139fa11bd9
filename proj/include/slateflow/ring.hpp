#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slateflow/bytes.hpp"

namespace slateflow {

using NodeId = int;

/// Cluster view, rebuilt by the master on every failure broadcast. The ring
/// is a pure function of (live nodes, their addresses); epochs only count
/// broadcasts.
struct Membership {
  std::uint64_t epoch = 0;
  std::set<NodeId> live_nodes;
};

/// Consistent-hash ring mapping (event key, destination function) to the
/// owning node. Every node builds the identical ring from the membership, so
/// any worker can compute any event's owner locally. Virtual points per node
/// smooth the key distribution; points of surviving nodes never move, so a
/// node's failure reassigns only the keys it owned.
class HashRing {
 public:
  static constexpr int kVirtualPoints = 64;

  HashRing() = default;
  /// `addresses[i]` names node i; only ids in `live` get points.
  HashRing(const std::vector<std::string>& addresses, const std::set<NodeId>& live);

  bool empty() const { return points_.empty(); }
  std::size_t live_count() const { return live_.size(); }
  bool is_live(NodeId n) const { return live_.count(n) > 0; }

  /// First ring point clockwise from hash(key ‖ 0x00 ‖ function). Throws
  /// std::runtime_error on an empty ring (all nodes dead: fatal).
  NodeId owner(const Bytes& key, const std::string& function) const;

 private:
  std::vector<std::pair<std::uint64_t, NodeId>> points_;
  std::set<NodeId> live_;
};

}  // namespace slateflow
