#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "slateflow/artifacts.hpp"
#include "slateflow/config.hpp"
#include "slateflow/event.hpp"
#include "slateflow/flow_control.hpp"
#include "slateflow/lost_log.hpp"
#include "slateflow/operators.hpp"
#include "slateflow/ring.hpp"
#include "slateflow/slate_store.hpp"

namespace slateflow {

/// One (event, destination function) unit moving through a node.
struct Delivery {
  Event event;
  const FunctionDef* dest = nullptr;
  std::uint64_t enqueue_seq = 0;    // node-wide dispatch order stamp
  std::uint64_t origin_ns = 0;      // steady clock at source injection
  std::uint64_t dispatch_hash = 0;  // key_function_hash(key, dest)
  bool retried = false;             // store-error requeue already spent
  bool control = false;             // end-of-stream flush unit
};

/// Where an enqueue originates; determines how a full queue may be handled.
/// Worker- and receiver-origin pushes must never block (blocking them can
/// deadlock the very queues they are draining), so under THROTTLE_SOURCE
/// only source threads block.
enum class EnqueueOrigin { Source, Worker, Receiver, Control };

/// Sets the calling thread's enqueue origin; returns the previous value.
/// Source pumps and network receivers tag their threads once at startup.
EnqueueOrigin set_thread_enqueue_origin(EnqueueOrigin origin);

/// Bounded FIFO, many producers, one consuming worker.
class WorkerQueue {
 public:
  explicit WorkerQueue(std::size_t capacity);

  /// Moves from `d` only on success; on a full queue `d` is left intact.
  bool try_push(Delivery& d);
  /// Capacity-exempt push for control units and deadlock-avoidance paths.
  void force_push(Delivery d);
  /// Blocks until size < low_water, then pushes (moving from `d`).
  /// Returns false (leaving `d` intact) if aborted.
  bool push_below_low_water(Delivery& d, std::size_t low_water,
                            const std::atomic<bool>& abort);

  std::optional<Delivery> pop_for(std::chrono::milliseconds timeout);
  std::size_t size() const { return size_.load(std::memory_order_relaxed); }
  std::size_t capacity() const { return capacity_; }
  void notify_all();

  std::vector<Delivery> drain_remaining();

 private:
  const std::size_t capacity_;
  std::atomic<std::size_t> size_{0};
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable below_water_;
  std::deque<Delivery> items_;
};

/// Deterministic (key, destination function) -> (primary, secondary) worker
/// mapping; identical on every node. With a single worker the secondary
/// collapses onto the primary.
struct DispatchTable {
  int workers = 1;

  std::pair<int, int> target_workers(const Bytes& key,
                                     const std::string& function) const;
};

struct NodeStats {
  std::vector<std::size_t> queue_lengths;
  std::size_t largest_queue = 0;
  std::uint64_t events_processed = 0;
  std::uint64_t events_lost = 0;
  std::uint64_t slates_cached = 0;
  std::uint64_t epoch = 0;
};

/// Per-node execution engine: a worker pool with one bounded queue each, the
/// two-queue dispatch rule with pending-key stickiness, per-slate exclusion,
/// the invoke/apply loop, queue-overflow policies, and a background flusher
/// driving flush/GC ticks.
class NodeEngine {
 public:
  /// Routes a stamped output event to one subscriber, wherever it lives.
  /// The default emitter dispatches locally (single-node operation).
  using Emitter = std::function<void(Event, const FunctionDef&, std::uint64_t origin_ns)>;
  using ProcessedHook = std::function<void(const Delivery&, int worker)>;
  /// Pause/resume an external stream's gates cluster-wide.
  using GateController = std::function<void(const std::string& stream, bool pause)>;

  NodeEngine(const AppConfig& config, NodeId node_id,
             const OperatorRegistry& registry,
             std::shared_ptr<DurableStore> durable,
             std::shared_ptr<LostEventLog> lost_log,
             SlateStore::Clock clock = {});
  ~NodeEngine();

  NodeEngine(const NodeEngine&) = delete;
  NodeEngine& operator=(const NodeEngine&) = delete;

  void set_emitter(Emitter e) { emitter_ = std::move(e); }
  void set_recorder(RunRecorder* r) { recorder_ = r; }
  void set_processed_hook(ProcessedHook h) { processed_hook_ = std::move(h); }
  void set_gate_controller(GateController c) { gate_controller_ = std::move(c); }
  void set_latency_sampling(bool on) { sample_latency_ = on; }

  void start();

  /// Two-queue dispatch of one unit to this node's workers, applying the
  /// destination stream's overflow policy when the chosen queue is full.
  void dispatch(Event event, const FunctionDef& dest, EnqueueOrigin origin,
                std::uint64_t origin_ns = 0);

  /// Routes an event to every subscriber of its stream through the emitter
  /// (used by sources and by the overflow-stream republish path).
  void route_to_subscribers(const Event& event, std::uint64_t origin_ns);

  /// Blocks until no unit is queued or executing on this node.
  void wait_quiescent();
  long long pending() const { return pending_.load(std::memory_order_acquire); }

  // End-of-stream flush: updaters with end_flush receive one control event
  // per live slate, one at a time, in deterministic order.
  std::vector<const FunctionDef*> end_flush_functions() const;
  std::vector<SlateKey> flushable_keys(const FunctionDef& fn) const;
  bool inject_flush(const FunctionDef& fn, const SlateKey& sk);
  void run_end_flush();  // single-node convenience: all functions, quiescing between units

  /// Graceful: waits for quiescence, flushes all dirty slates, joins workers.
  void drain_and_stop();
  /// Abrupt: stops intake and workers immediately, preserving queue contents.
  void kill();
  bool killed() const { return killed_.load(std::memory_order_acquire); }
  /// Queue contents at kill time (the accounting harness logs them as lost).
  std::vector<Delivery> autopsy_queues();

  NodeStats stats() const;
  std::uint64_t processed_total() const { return processed_.load(); }
  std::uint64_t processed_for(const std::string& function) const;
  std::vector<double> latency_samples_ms() const;

  SlateStore& slates() { return *slates_; }
  GateRegistry& gates() { return gates_; }
  LostEventLog& lost_log() { return *lost_log_; }
  const WorkflowGraph& graph() const { return config_.workflow; }
  const AppConfig& config() const { return config_; }
  NodeId id() const { return node_id_; }

  void set_epoch(std::uint64_t e) { epoch_.store(e, std::memory_order_relaxed); }
  std::uint64_t epoch() const { return epoch_.load(std::memory_order_relaxed); }

  struct FetchResult {
    enum class Status { Found, Absent, Error } status = Status::Absent;
    Bytes body;
    std::string error;
  };
  /// Serves slate reads from the cache (loading from the store on a cold
  /// miss) under the slate's exclusion. Live read path for HTTP and
  /// forwarded fetches.
  FetchResult fetch_slate_local(const SlateKey& sk);

 private:
  friend class WorkerLoopTestPeer;

  void worker_loop(int worker_id);
  void process(Delivery& d, int worker_id);
  void apply_outputs(const Delivery& d, const InvocationResult& res);
  void complete(const Delivery& d, int target_worker);
  void handle_overflow(Delivery& d, int target_worker, EnqueueOrigin origin);
  void note_queue_drained(int worker_id);
  void flusher_loop();
  void track_flush_ts(const SlateKey& sk, Timestamp ts);

  AppConfig config_;
  NodeId node_id_;
  const OperatorRegistry& registry_;
  std::shared_ptr<LostEventLog> lost_log_;
  std::unique_ptr<SlateStore> slates_;
  GateRegistry gates_;
  DispatchTable table_;

  std::unordered_map<std::string, std::unique_ptr<Mapper>> mappers_;
  std::unordered_map<std::string, std::unique_ptr<Updater>> updaters_;

  std::vector<std::unique_ptr<WorkerQueue>> queues_;
  std::vector<std::thread> workers_;
  std::thread flusher_;

  Emitter emitter_;
  RunRecorder* recorder_ = nullptr;
  ProcessedHook processed_hook_;
  GateController gate_controller_;

  // Dispatch bookkeeping: per worker, live (function,key) unit counts, keyed
  // by the dispatch hash. Guarded by dispatch_mu_.
  std::mutex dispatch_mu_;
  std::vector<std::unordered_map<std::uint64_t, int>> live_units_;
  std::atomic<std::uint64_t> enqueue_seq_{0};

  std::atomic<long long> pending_{0};
  std::mutex quiesce_mu_;
  std::condition_variable quiesce_cv_;

  // Throttle state: streams paused on behalf of a congested worker queue.
  std::mutex throttle_mu_;
  std::map<std::string, int> throttled_streams_;  // stream -> congested worker
  std::atomic<bool> throttle_active_{false};

  // Event-time of the last applied write per slate of end_flush updaters;
  // flush control events are stamped just after it.
  mutable std::mutex flush_ts_mu_;
  std::map<SlateKey, Timestamp> flush_ts_;

  std::atomic<bool> started_{false};
  std::atomic<bool> stop_{false};
  std::atomic<bool> killed_{false};

  std::atomic<std::uint64_t> processed_{0};
  std::atomic<std::uint64_t> lost_local_{0};
  mutable std::mutex per_fn_mu_;
  std::map<std::string, std::uint64_t> processed_per_fn_;
  std::atomic<std::uint64_t> epoch_{0};

  bool sample_latency_ = false;
  mutable std::mutex latency_mu_;
  std::vector<double> latency_ms_;
};

}  // namespace slateflow
