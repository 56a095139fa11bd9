#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "slateflow/config.hpp"
#include "slateflow/lost_log.hpp"
#include "slateflow/ring.hpp"
#include "slateflow/runtime.hpp"
#include "slateflow/transport.hpp"

namespace slateflow {

/// The master is a minimal coordinator: it tracks membership, broadcasts
/// failures, and relays throttle control messages. It never routes events;
/// data flow continues even if the master is down (membership just freezes).
class Master {
 public:
  Master(const AppConfig& config, Transport& transport);
  ~Master();

  void start();
  void stop();

  std::uint64_t epoch() const;
  std::set<NodeId> live() const;

  /// Marks a node dead (idempotent per node), bumps the epoch and broadcasts
  /// the new membership to every live node. Also the FAILURE_REPORT handler.
  void handle_failure_report(const std::string& dead_address);

 private:
  void on_frame(std::string frame);
  void broadcast_membership_locked();

  AppConfig config_;
  Transport& transport_;
  mutable std::mutex mu_;
  std::uint64_t epoch_ = 0;
  std::set<NodeId> live_;
  bool running_ = false;
};

/// One engine plus its cluster plumbing: the shared hash ring, the wire
/// listener feeding local dispatch, direct worker-to-worker event passing
/// with send-failure detection, failure reporting with retry, and slate
/// fetch forwarding.
class ClusterNode {
 public:
  ClusterNode(const AppConfig& config, NodeId id,
              const OperatorRegistry& registry,
              std::shared_ptr<DurableStore> durable,
              std::shared_ptr<LostEventLog> lost_log, Transport& transport,
              SlateStore::Clock clock = {});
  ~ClusterNode();

  void start();
  void drain_and_stop();
  /// Abrupt stop: deregisters the listener (sends to this node start
  /// failing) and halts the engine with queues preserved.
  void kill();

  NodeEngine& engine() { return engine_; }
  const NodeAddress& address() const { return config_.nodes[static_cast<std::size_t>(id_)]; }
  NodeId id() const { return id_; }

  std::uint64_t epoch() const;
  NodeId owner_of(const Bytes& key, const std::string& function) const;

  /// Applies a membership broadcast: swap the ring atomically and treat
  /// slates that moved here as cold (next access reads the durable store).
  void apply_membership(std::uint64_t epoch, const std::vector<std::string>& live_addresses);

  struct FetchOutcome {
    enum class Status { Found, NotFound, Unreachable, Error } status;
    Bytes body;
    std::string detail;
  };
  /// Live slate read: served from this node's cache when it owns the key,
  /// forwarded over the wire to the owner otherwise.
  FetchOutcome fetch(const SlateKey& sk);

 private:
  void on_frame(std::string frame);
  std::string on_request(const std::string& frame);
  void emit(Event e, const FunctionDef& fn, std::uint64_t origin_ns);
  void enqueue_failure_report(const std::string& dead_address);
  void reporter_loop();

  AppConfig config_;
  NodeId id_;
  Transport& transport_;
  std::shared_ptr<LostEventLog> lost_log_;
  NodeEngine engine_;
  std::vector<std::string> node_addresses_;

  mutable std::mutex ring_mu_;
  HashRing ring_;
  Membership membership_;

  std::mutex report_mu_;
  std::condition_variable report_cv_;
  std::set<std::string> pending_reports_;
  std::thread reporter_;
  std::atomic<bool> stop_reporter_{false};

  std::atomic<bool> listening_{false};
};

/// Whole-cluster harness for one process: a master and every node wired over
/// the in-process transport with a shared durable store and lost-event log.
/// This is the failure-injection rig: killing a node here has exact
/// accounting (no bytes in flight outside the log).
class InprocCluster {
 public:
  InprocCluster(const AppConfig& config, const OperatorRegistry& registry,
                SlateStore::Clock clock = {});
  ~InprocCluster();

  void start();

  ClusterNode& node(NodeId id) { return *nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t node_count() const { return nodes_.size(); }
  Master& master() { return *master_; }
  LostEventLog& lost_log() { return *lost_log_; }
  DurableStore& durable() { return *durable_; }

  /// Routes one external event from its source: every subscriber of the
  /// event's stream, each at its ring owner.
  void inject(const Event& event, std::uint64_t origin_ns = 0);

  /// Blocks until no unit is queued or executing on any live node.
  void quiesce();

  /// End-of-stream flush across the cluster, deterministic order per node.
  void run_end_flush();

  /// Kills a node and logs every queued unit it held as lost, keeping
  /// cluster-wide conservation exact.
  void kill_node(NodeId id);

  /// Graceful shutdown of all live nodes (drains, flushes dirty slates).
  void shutdown();

  std::set<NodeId> live_nodes() const;
  std::uint64_t processed_total() const;
  std::uint64_t processed_for(const std::string& function) const;

 private:
  AppConfig config_;
  std::shared_ptr<InprocTransport::Hub> hub_;
  std::vector<std::unique_ptr<InprocTransport>> transports_;
  std::shared_ptr<DurableStore> durable_;
  std::shared_ptr<LostEventLog> lost_log_;
  std::unique_ptr<Master> master_;
  std::vector<std::unique_ptr<ClusterNode>> nodes_;
  std::set<NodeId> killed_;
  mutable std::mutex mu_;
};

}  // namespace slateflow
