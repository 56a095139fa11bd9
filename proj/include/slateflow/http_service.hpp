#pragma once

#include <memory>
#include <string>
#include <thread>

#include "slateflow/cluster.hpp"

namespace slateflow {

/// Per-node HTTP endpoint for live slate reads and status:
///   GET /slates/{updater}/{percent-encoded key} -> 200 raw slate bytes,
///       404 (empty body) when absent, 502 (text reason) when the owning
///       node is unreachable
///   GET /status -> JSON node stats
/// Slate reads come from the cache (the durable store may lag under
/// non-write-through policies); requests for keys owned elsewhere are
/// forwarded internally over the wire protocol.
class HttpService {
 public:
  HttpService(ClusterNode& node, const std::string& host, std::uint16_t port);
  ~HttpService();

  bool start();
  void stop();

  std::uint16_t port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  ClusterNode& node_;
  std::string host_;
  std::uint16_t port_;
  std::thread server_thread_;
};

std::string status_json(NodeEngine& engine, std::uint64_t epoch);

}  // namespace slateflow
