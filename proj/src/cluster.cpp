#include "slateflow/cluster.hpp"

#include <algorithm>
#include <chrono>

#include "slateflow/wire.hpp"

namespace slateflow {

namespace {

std::uint64_t steady_ns_now() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

}  // namespace

Master::Master(const AppConfig& config, Transport& transport)
    : config_(config), transport_(transport) {
  for (std::size_t i = 0; i < config_.nodes.size(); ++i)
    live_.insert(static_cast<NodeId>(i));
}

Master::~Master() { stop(); }

void Master::start() {
  std::lock_guard lock(mu_);
  if (running_) return;
  transport_.listen(config_.master.str(),
                    [this](std::string frame) { on_frame(std::move(frame)); },
                    nullptr);
  running_ = true;
}

void Master::stop() {
  std::lock_guard lock(mu_);
  if (!running_) return;
  transport_.stop_listening(config_.master.str());
  running_ = false;
}

std::uint64_t Master::epoch() const {
  std::lock_guard lock(mu_);
  return epoch_;
}

std::set<NodeId> Master::live() const {
  std::lock_guard lock(mu_);
  return live_;
}

void Master::handle_failure_report(const std::string& dead_address) {
  std::lock_guard lock(mu_);
  NodeId dead = -1;
  for (std::size_t i = 0; i < config_.nodes.size(); ++i)
    if (config_.nodes[i].str() == dead_address) dead = static_cast<NodeId>(i);
  // Unknown node or duplicate report within this epoch: no-op.
  if (dead < 0 || live_.count(dead) == 0) return;
  live_.erase(dead);
  ++epoch_;
  broadcast_membership_locked();
}

void Master::broadcast_membership_locked() {
  wire::MembershipFrame f;
  f.epoch = epoch_;
  for (NodeId n : live_)
    f.live_addresses.push_back(config_.nodes[static_cast<std::size_t>(n)].str());
  std::string frame = wire::encode_membership(f);
  for (NodeId n : live_)
    transport_.send(config_.nodes[static_cast<std::size_t>(n)].str(), frame);
}

void Master::on_frame(std::string frame) {
  try {
    switch (wire::frame_type(frame)) {
      case wire::MsgType::FailureReport: {
        auto f = wire::decode_failure_report(frame);
        handle_failure_report(f.dead_address);
        break;
      }
      case wire::MsgType::Throttle: {
        // Relay source-gate control to every live node.
        std::lock_guard lock(mu_);
        for (NodeId n : live_)
          transport_.send(config_.nodes[static_cast<std::size_t>(n)].str(), frame);
        break;
      }
      default:
        break;  // the master never handles data traffic
    }
  } catch (const wire::WireError&) {
    // Malformed frame: ignore.
  }
}

ClusterNode::ClusterNode(const AppConfig& config, NodeId id,
                         const OperatorRegistry& registry,
                         std::shared_ptr<DurableStore> durable,
                         std::shared_ptr<LostEventLog> lost_log,
                         Transport& transport, SlateStore::Clock clock)
    : config_(config),
      id_(id),
      transport_(transport),
      lost_log_(lost_log),
      engine_(config, id, registry, std::move(durable), std::move(lost_log),
              std::move(clock)) {
  for (const auto& n : config_.nodes) node_addresses_.push_back(n.str());
  for (std::size_t i = 0; i < config_.nodes.size(); ++i)
    membership_.live_nodes.insert(static_cast<NodeId>(i));
  membership_.epoch = 0;
  ring_ = HashRing(node_addresses_, membership_.live_nodes);

  engine_.set_emitter([this](Event e, const FunctionDef& fn, std::uint64_t origin_ns) {
    emit(std::move(e), fn, origin_ns);
  });
  engine_.set_gate_controller([this](const std::string& stream, bool pause) {
    // Apply locally first, then ask the master to relay cluster-wide.
    if (pause) engine_.gates().pause(stream);
    else engine_.gates().resume(stream);
    transport_.send(config_.master.str(),
                    wire::encode_throttle({pause, stream}));
  });
}

ClusterNode::~ClusterNode() {
  stop_reporter_.store(true);
  report_cv_.notify_all();
  if (reporter_.joinable()) reporter_.join();
  if (listening_.load()) transport_.stop_listening(address().str());
}

void ClusterNode::start() {
  transport_.listen(
      address().str(),
      [this](std::string frame) { on_frame(std::move(frame)); },
      [this](const std::string& frame) { return on_request(frame); });
  listening_.store(true);
  reporter_ = std::thread([this] { reporter_loop(); });
  engine_.start();
}

void ClusterNode::drain_and_stop() {
  engine_.drain_and_stop();
  if (listening_.exchange(false)) transport_.stop_listening(address().str());
  stop_reporter_.store(true);
  report_cv_.notify_all();
}

void ClusterNode::kill() {
  if (listening_.exchange(false)) transport_.stop_listening(address().str());
  engine_.kill();
  stop_reporter_.store(true);
  report_cv_.notify_all();
}

std::uint64_t ClusterNode::epoch() const {
  std::lock_guard lock(ring_mu_);
  return membership_.epoch;
}

NodeId ClusterNode::owner_of(const Bytes& key, const std::string& function) const {
  std::lock_guard lock(ring_mu_);
  return ring_.owner(key, function);
}

void ClusterNode::apply_membership(std::uint64_t epoch,
                                   const std::vector<std::string>& live_addresses) {
  std::set<NodeId> live;
  for (const auto& addr : live_addresses) {
    auto it = std::find(node_addresses_.begin(), node_addresses_.end(), addr);
    if (it != node_addresses_.end())
      live.insert(static_cast<NodeId>(it - node_addresses_.begin()));
  }
  {
    std::lock_guard lock(ring_mu_);
    if (epoch <= membership_.epoch) return;  // stale broadcast
    membership_.epoch = epoch;
    membership_.live_nodes = live;
    ring_ = HashRing(node_addresses_, live);
  }
  engine_.set_epoch(epoch);
  // Slates that just moved here have no cache entry, so the first access
  // reads the durable store: last flushed version, by design. Re-scan picks
  // up segments another process may have appended.
  engine_.slates().durable().refresh();
}

void ClusterNode::emit(Event e, const FunctionDef& fn, std::uint64_t origin_ns) {
  NodeId owner;
  {
    std::lock_guard lock(ring_mu_);
    owner = ring_.owner(e.key, fn.name);
  }
  if (owner == id_) {
    engine_.dispatch(std::move(e), fn, EnqueueOrigin::Worker, origin_ns);
    return;
  }
  const std::string& addr = node_addresses_[static_cast<std::size_t>(owner)];
  std::string frame = wire::encode_event({e, fn.name});
  if (transport_.send(addr, frame)) return;
  // The event is lost (and logged as lost) rather than re-dispatched; the
  // failure goes to the master so everyone reroutes.
  lost_log_->append(std::move(e), fn.name, LostReason::SendFailed);
  enqueue_failure_report(addr);
}

void ClusterNode::enqueue_failure_report(const std::string& dead_address) {
  {
    std::lock_guard lock(report_mu_);
    pending_reports_.insert(dead_address);
  }
  report_cv_.notify_all();
}

void ClusterNode::reporter_loop() {
  std::uint64_t backoff_ms = 100;
  std::unique_lock lock(report_mu_);
  while (!stop_reporter_.load()) {
    if (pending_reports_.empty()) {
      report_cv_.wait_for(lock, std::chrono::milliseconds(50));
      backoff_ms = 100;
      continue;
    }
    auto reports = pending_reports_;
    lock.unlock();
    bool all_ok = true;
    for (const auto& addr : reports) {
      wire::FailureReportFrame f{epoch(), addr};
      if (transport_.send(config_.master.str(), wire::encode_failure_report(f))) {
        std::lock_guard g(report_mu_);
        pending_reports_.erase(addr);
      } else {
        all_ok = false;  // master unreachable: retry with backoff
      }
    }
    if (!all_ok) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms = std::min<std::uint64_t>(backoff_ms * 2, 2000);
    }
    lock.lock();
  }
}

void ClusterNode::on_frame(std::string frame) {
  auto prev = set_thread_enqueue_origin(EnqueueOrigin::Receiver);
  try {
    switch (wire::frame_type(frame)) {
      case wire::MsgType::Event: {
        auto f = wire::decode_event(frame);
        const FunctionDef* fn = config_.workflow.find(f.dest_function);
        if (fn == nullptr) break;
        engine_.dispatch(std::move(f.event), *fn, EnqueueOrigin::Receiver,
                         steady_ns_now());
        break;
      }
      case wire::MsgType::Membership: {
        auto f = wire::decode_membership(frame);
        apply_membership(f.epoch, f.live_addresses);
        break;
      }
      case wire::MsgType::Throttle: {
        auto f = wire::decode_throttle(frame);
        if (engine_.gates().has(f.stream)) {
          if (f.pause) engine_.gates().pause(f.stream);
          else engine_.gates().resume(f.stream);
        }
        break;
      }
      default:
        break;
    }
  } catch (const wire::WireError&) {
    // Malformed frame: drop it.
  }
  set_thread_enqueue_origin(prev);
}

std::string ClusterNode::on_request(const std::string& frame) {
  try {
    auto f = wire::decode_slate_fetch(frame);
    auto res = engine_.fetch_slate_local({f.updater, f.key});
    wire::SlateFetchReply reply;
    switch (res.status) {
      case NodeEngine::FetchResult::Status::Found:
        reply.status = wire::SlateFetchReply::Status::Ok;
        reply.body = std::move(res.body);
        break;
      case NodeEngine::FetchResult::Status::Absent:
        reply.status = wire::SlateFetchReply::Status::NotFound;
        break;
      case NodeEngine::FetchResult::Status::Error:
        reply.status = wire::SlateFetchReply::Status::Error;
        reply.body = res.error;
        break;
    }
    return wire::encode_slate_fetch_reply(reply);
  } catch (const wire::WireError&) {
    return wire::encode_slate_fetch_reply(
        {wire::SlateFetchReply::Status::Error, "bad fetch frame"});
  }
}

ClusterNode::FetchOutcome ClusterNode::fetch(const SlateKey& sk) {
  if (config_.workflow.find(sk.updater) == nullptr ||
      !config_.workflow.find(sk.updater)->is_update())
    return {FetchOutcome::Status::NotFound, {}, "unknown updater"};

  NodeId owner;
  {
    std::lock_guard lock(ring_mu_);
    owner = ring_.owner(sk.key, sk.updater);
  }
  if (owner == id_) {
    auto res = engine_.fetch_slate_local(sk);
    switch (res.status) {
      case NodeEngine::FetchResult::Status::Found:
        return {FetchOutcome::Status::Found, std::move(res.body), {}};
      case NodeEngine::FetchResult::Status::Absent:
        return {FetchOutcome::Status::NotFound, {}, {}};
      case NodeEngine::FetchResult::Status::Error:
        return {FetchOutcome::Status::Error, {}, res.error};
    }
  }
  auto reply_frame = transport_.request(
      node_addresses_[static_cast<std::size_t>(owner)],
      wire::encode_slate_fetch({sk.updater, sk.key}));
  if (!reply_frame)
    return {FetchOutcome::Status::Unreachable, {},
            "owner node " + node_addresses_[static_cast<std::size_t>(owner)] +
                " unreachable"};
  try {
    auto reply = wire::decode_slate_fetch_reply(*reply_frame);
    switch (reply.status) {
      case wire::SlateFetchReply::Status::Ok:
        return {FetchOutcome::Status::Found, std::move(reply.body), {}};
      case wire::SlateFetchReply::Status::NotFound:
        return {FetchOutcome::Status::NotFound, {}, {}};
      case wire::SlateFetchReply::Status::Error:
        return {FetchOutcome::Status::Error, {}, reply.body};
    }
  } catch (const wire::WireError& e) {
    return {FetchOutcome::Status::Error, {}, e.what()};
  }
  return {FetchOutcome::Status::Error, {}, "unreachable"};
}

InprocCluster::InprocCluster(const AppConfig& config,
                             const OperatorRegistry& registry,
                             SlateStore::Clock clock)
    : config_(config), hub_(std::make_shared<InprocTransport::Hub>()) {
  durable_ = std::make_shared<DurableStore>(
      config_.store.path, config_.store.replicas, config_.store.consistency);
  lost_log_ = std::make_shared<LostEventLog>();
  transports_.push_back(std::make_unique<InprocTransport>(hub_));
  master_ = std::make_unique<Master>(config_, *transports_.back());
  for (std::size_t i = 0; i < config_.nodes.size(); ++i) {
    transports_.push_back(std::make_unique<InprocTransport>(hub_));
    nodes_.push_back(std::make_unique<ClusterNode>(
        config_, static_cast<NodeId>(i), registry, durable_, lost_log_,
        *transports_.back(), clock));
  }
}

InprocCluster::~InprocCluster() {
  for (auto& n : nodes_)
    if (n) n->kill();
}

void InprocCluster::start() {
  master_->start();
  for (auto& n : nodes_) n->start();
}

void InprocCluster::inject(const Event& event, std::uint64_t origin_ns) {
  // Sources hand events to the cluster via any live node's router; node 0
  // plays the special source-mapper role while alive.
  std::lock_guard lock(mu_);
  for (auto& n : nodes_) {
    if (killed_.count(n->id())) continue;
    n->engine().route_to_subscribers(event, origin_ns);
    return;
  }
}

void InprocCluster::quiesce() {
  // Inproc delivery enqueues a child before its parent resolves, so summed
  // pending counts can only hit zero at global quiescence.
  auto live = live_nodes();
  for (;;) {
    bool all_idle = true;
    for (NodeId id : live) node(id).engine().wait_quiescent();
    for (NodeId id : live)
      if (node(id).engine().pending() > 0) all_idle = false;
    if (all_idle) return;
  }
}

void InprocCluster::run_end_flush() {
  auto live = live_nodes();
  if (live.empty()) return;
  auto fns = node(*live.begin()).engine().end_flush_functions();
  for (const auto* fn : fns) {
    for (NodeId id : live) {
      auto& n = node(id);
      for (const auto& sk : n.engine().flushable_keys(*fn)) {
        // Only the ring owner closes a slate; others may see store rows for
        // keys they never ran.
        if (n.owner_of(sk.key, fn->name) != n.id()) continue;
        n.engine().inject_flush(*fn, sk);
        quiesce();
      }
    }
  }
}

void InprocCluster::kill_node(NodeId id) {
  auto& victim = node(id);
  victim.kill();
  {
    std::lock_guard lock(mu_);
    killed_.insert(id);
  }
  // Exact conservation: everything still queued on the dead node is lost.
  for (auto& d : victim.engine().autopsy_queues()) {
    if (d.control) continue;
    lost_log_->append(std::move(d.event), d.dest->name, LostReason::QueueDropped);
  }
}

void InprocCluster::shutdown() {
  for (auto& n : nodes_) {
    if (killed_.count(n->id())) continue;
    n->drain_and_stop();
  }
  master_->stop();
}

std::set<NodeId> InprocCluster::live_nodes() const {
  std::lock_guard lock(mu_);
  std::set<NodeId> live;
  for (const auto& n : nodes_)
    if (!killed_.count(n->id())) live.insert(n->id());
  return live;
}

std::uint64_t InprocCluster::processed_total() const {
  std::uint64_t n = 0;
  for (const auto& node : nodes_) n += node->engine().processed_total();
  return n;
}

std::uint64_t InprocCluster::processed_for(const std::string& function) const {
  std::uint64_t n = 0;
  for (const auto& node : nodes_) n += node->engine().processed_for(function);
  return n;
}

}  // namespace slateflow
