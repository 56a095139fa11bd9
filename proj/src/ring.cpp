#include "slateflow/ring.hpp"

#include <algorithm>
#include <stdexcept>

#include "slateflow/hash.hpp"

namespace slateflow {

HashRing::HashRing(const std::vector<std::string>& addresses,
                   const std::set<NodeId>& live)
    : live_(live) {
  points_.reserve(live.size() * kVirtualPoints);
  for (NodeId n : live) {
    const std::string& addr = addresses.at(static_cast<std::size_t>(n));
    for (int i = 0; i < kVirtualPoints; ++i) {
      std::uint64_t pos = fnv1a64(addr + "#" + std::to_string(i));
      points_.emplace_back(pos, n);
    }
  }
  std::sort(points_.begin(), points_.end());
}

NodeId HashRing::owner(const Bytes& key, const std::string& function) const {
  if (points_.empty())
    throw std::runtime_error("hash ring is empty: no live nodes");
  std::uint64_t h = key_function_hash(key, function);
  auto it = std::lower_bound(points_.begin(), points_.end(),
                             std::make_pair(h, NodeId{0}),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it == points_.end()) it = points_.begin();
  return it->second;
}

}  // namespace slateflow
