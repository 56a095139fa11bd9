#include "slateflow/runtime.hpp"

#include <algorithm>
#include <chrono>

#include "slateflow/hash.hpp"

namespace slateflow {

namespace {

thread_local EnqueueOrigin tls_origin = EnqueueOrigin::Worker;

std::uint64_t steady_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

// Producer tag appended to events republished by the overflow-stream path.
// A republished event that overflows again falls back to drop-and-log, which
// terminates any overflow cascade.
constexpr std::string_view kOverflowTag = "~ovf";

bool is_overflow_republish(const Event& e) {
  return e.producer.size() >= kOverflowTag.size() &&
         e.producer.compare(e.producer.size() - kOverflowTag.size(),
                            kOverflowTag.size(), kOverflowTag) == 0;
}

}  // namespace

EnqueueOrigin set_thread_enqueue_origin(EnqueueOrigin o) {
  EnqueueOrigin prev = tls_origin;
  tls_origin = o;
  return prev;
}

WorkerQueue::WorkerQueue(std::size_t capacity)
    : capacity_(std::max<std::size_t>(1, capacity)) {}

bool WorkerQueue::try_push(Delivery& d) {
  std::lock_guard lock(mu_);
  if (items_.size() >= capacity_) return false;
  items_.push_back(std::move(d));
  size_.store(items_.size(), std::memory_order_relaxed);
  not_empty_.notify_one();
  return true;
}

void WorkerQueue::force_push(Delivery d) {
  std::lock_guard lock(mu_);
  items_.push_back(std::move(d));
  size_.store(items_.size(), std::memory_order_relaxed);
  not_empty_.notify_one();
}

bool WorkerQueue::push_below_low_water(Delivery& d, std::size_t low_water,
                                       const std::atomic<bool>& abort) {
  std::unique_lock lock(mu_);
  while (items_.size() >= low_water) {
    if (abort.load(std::memory_order_relaxed)) return false;
    below_water_.wait_for(lock, std::chrono::milliseconds(5));
  }
  items_.push_back(std::move(d));
  size_.store(items_.size(), std::memory_order_relaxed);
  not_empty_.notify_one();
  return true;
}

std::optional<Delivery> WorkerQueue::pop_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!not_empty_.wait_for(lock, timeout, [&] { return !items_.empty(); }))
    return std::nullopt;
  Delivery d = std::move(items_.front());
  items_.pop_front();
  size_.store(items_.size(), std::memory_order_relaxed);
  below_water_.notify_all();
  return d;
}

void WorkerQueue::notify_all() {
  std::lock_guard lock(mu_);
  not_empty_.notify_all();
  below_water_.notify_all();
}

std::vector<Delivery> WorkerQueue::drain_remaining() {
  std::lock_guard lock(mu_);
  std::vector<Delivery> out(std::make_move_iterator(items_.begin()),
                            std::make_move_iterator(items_.end()));
  items_.clear();
  size_.store(0, std::memory_order_relaxed);
  below_water_.notify_all();
  return out;
}

std::pair<int, int> DispatchTable::target_workers(
    const Bytes& key, const std::string& function) const {
  std::uint64_t h = key_function_hash(key, function);
  int w = std::max(1, workers);
  int p = static_cast<int>(h % static_cast<std::uint64_t>(w));
  if (w == 1) return {0, 0};
  int s = static_cast<int>(
      (static_cast<std::uint64_t>(p) + 1 +
       mix64(h) % static_cast<std::uint64_t>(w - 1)) %
      static_cast<std::uint64_t>(w));
  return {p, s};
}

NodeEngine::NodeEngine(const AppConfig& config, NodeId node_id,
                       const OperatorRegistry& registry,
                       std::shared_ptr<DurableStore> durable,
                       std::shared_ptr<LostEventLog> lost_log,
                       SlateStore::Clock clock)
    : config_(config),
      node_id_(node_id),
      registry_(registry),
      lost_log_(std::move(lost_log)),
      gates_(config_.workflow),
      table_{config_.runtime.workers} {
  std::map<std::string, SlateStore::UpdaterPolicy> policies;
  for (const auto& f : config_.workflow.functions)
    if (f.is_update()) policies[f.name] = {f.ttl, f.flush};
  slates_ = std::make_unique<SlateStore>(
      std::move(durable), config_.runtime.slate_cache_capacity,
      std::move(policies), std::move(clock), config_.runtime.audit_contention);

  live_units_.resize(static_cast<std::size_t>(config_.runtime.workers));
  for (int i = 0; i < config_.runtime.workers; ++i)
    queues_.push_back(std::make_unique<WorkerQueue>(config_.runtime.queue_capacity));

  emitter_ = [this](Event e, const FunctionDef& fn, std::uint64_t origin_ns) {
    dispatch(std::move(e), fn, tls_origin, origin_ns);
  };
}

NodeEngine::~NodeEngine() {
  if (started_.load() && !stop_.load() && !killed_.load()) kill();
}

void NodeEngine::start() {
  if (started_.exchange(true)) return;
  // One instance per function per node, shared by every worker.
  for (const auto& f : config_.workflow.functions) {
    if (f.is_update())
      updaters_[f.name] = registry_.make_updater(f, config_);
    else
      mappers_[f.name] = registry_.make_mapper(f, config_);
  }
  for (int i = 0; i < config_.runtime.workers; ++i)
    workers_.emplace_back([this, i] { worker_loop(i); });
  flusher_ = std::thread([this] { flusher_loop(); });
}

void NodeEngine::dispatch(Event event, const FunctionDef& dest,
                          EnqueueOrigin origin, std::uint64_t origin_ns) {
  if (killed_.load(std::memory_order_acquire) ||
      (stop_.load(std::memory_order_acquire) && origin != EnqueueOrigin::Control)) {
    if (origin != EnqueueOrigin::Control)
      lost_log_->append(std::move(event), dest.name, LostReason::QueueDropped);
    return;
  }

  Delivery d;
  d.dest = &dest;
  d.origin_ns = origin_ns;
  d.control = origin == EnqueueOrigin::Control;
  d.event = std::move(event);

  std::uint64_t fk = key_function_hash(d.event.key, dest.name);
  auto [p, s] = table_.target_workers(d.event.key, dest.name);
  d.dispatch_hash = fk;
  int target;
  bool pushed;
  {
    // Decide, stamp and push atomically so same-key units enter their queue
    // in dispatch order.
    std::lock_guard lock(dispatch_mu_);
    // Pending-key stickiness: a key already enqueued or executing on one of
    // its two workers stays there, preserving same-key FIFO.
    if (live_units_[static_cast<std::size_t>(p)].count(fk)) {
      target = p;
    } else if (p != s && live_units_[static_cast<std::size_t>(s)].count(fk)) {
      target = s;
    } else {
      std::size_t lp = queues_[static_cast<std::size_t>(p)]->size();
      std::size_t ls = queues_[static_cast<std::size_t>(s)]->size();
      bool divert = p != s && lp >= config_.runtime.divert_floor &&
                    static_cast<double>(ls) < config_.runtime.theta * static_cast<double>(lp);
      target = divert ? s : p;
    }
    ++live_units_[static_cast<std::size_t>(target)][fk];
    pending_.fetch_add(1, std::memory_order_acq_rel);
    d.enqueue_seq = enqueue_seq_.fetch_add(1, std::memory_order_relaxed);

    auto& q = *queues_[static_cast<std::size_t>(target)];
    if (d.control) {
      q.force_push(std::move(d));
      return;
    }
    pushed = q.try_push(d);
  }
  if (!pushed) handle_overflow(d, target, origin);
}

void NodeEngine::handle_overflow(Delivery& d, int target, EnqueueOrigin origin) {
  OverflowPolicy policy = config_.overflow_for(d.event.sid);
  if (is_overflow_republish(d.event))
    policy = OverflowPolicy{};  // cascade terminator: drop and log

  switch (policy.kind) {
    case OverflowPolicy::Kind::DropAndLog: {
      lost_log_->append(d.event, d.dest->name, LostReason::QueueDropped);
      lost_local_.fetch_add(1, std::memory_order_relaxed);
      complete(d, target);
      return;
    }
    case OverflowPolicy::Kind::OverflowStream: {
      // The declined event continues on the overflow stream toward the
      // degraded-service operators; re-stamped so it still orders after the
      // original, and tagged so a second overflow terminates at drop.
      Event replacement;
      replacement.sid = policy.target;
      replacement.ts = Timestamp{d.event.ts.millis, d.event.ts.seq + 1};
      replacement.key = d.event.key;
      replacement.value = d.event.value;
      replacement.producer = d.event.producer + std::string(kOverflowTag);
      // Children enqueue before this unit resolves, so quiescence holds.
      route_to_subscribers(replacement, d.origin_ns);
      complete(d, target);
      return;
    }
    case OverflowPolicy::Kind::ThrottleSource: {
      // Pause every external input feeding this stream; resume happens once
      // the congested queue drains below the low-water mark.
      auto ancestors = config_.workflow.ancestor_external_inputs(d.event.sid);
      {
        std::lock_guard lock(throttle_mu_);
        for (const auto& s : ancestors) throttled_streams_[s] = target;
        throttle_active_.store(true, std::memory_order_release);
      }
      for (const auto& s : ancestors) {
        if (gate_controller_) gate_controller_(s, /*pause=*/true);
        else gates_.pause(s);
      }
      auto& q = *queues_[static_cast<std::size_t>(target)];
      if (origin == EnqueueOrigin::Source) {
        // Holding the event: only source threads may block here. Blocking a
        // worker or receiver can deadlock the queues they drain.
        if (!q.push_below_low_water(d, q.capacity() / 2, killed_)) {
          lost_log_->append(d.event, d.dest->name, LostReason::QueueDropped);
          lost_local_.fetch_add(1, std::memory_order_relaxed);
          complete(d, target);
          return;
        }
        note_queue_drained(target);
      } else {
        q.force_push(std::move(d));
      }
      return;
    }
  }
}

void NodeEngine::note_queue_drained(int worker_id) {
  if (!throttle_active_.load(std::memory_order_acquire)) return;
  if (queues_[static_cast<std::size_t>(worker_id)]->size() >
      config_.runtime.queue_capacity / 2)
    return;
  std::vector<std::string> to_resume;
  {
    std::lock_guard lock(throttle_mu_);
    for (auto it = throttled_streams_.begin(); it != throttled_streams_.end();) {
      if (it->second == worker_id) {
        to_resume.push_back(it->first);
        it = throttled_streams_.erase(it);
      } else {
        ++it;
      }
    }
    if (throttled_streams_.empty())
      throttle_active_.store(false, std::memory_order_release);
  }
  for (const auto& s : to_resume) {
    if (gate_controller_) gate_controller_(s, /*pause=*/false);
    else gates_.resume(s);
  }
}

void NodeEngine::route_to_subscribers(const Event& event, std::uint64_t origin_ns) {
  auto subs = config_.workflow.subscribers_of(event.sid);
  for (const auto* fn : subs) emitter_(event, *fn, origin_ns);
}

void NodeEngine::worker_loop(int worker_id) {
  set_thread_enqueue_origin(EnqueueOrigin::Worker);
  auto& q = *queues_[static_cast<std::size_t>(worker_id)];
  for (;;) {
    if (killed_.load(std::memory_order_acquire)) return;
    auto d = q.pop_for(std::chrono::milliseconds(20));
    if (!d) {
      if (stop_.load(std::memory_order_acquire) && q.size() == 0) return;
      continue;
    }
    if (killed_.load(std::memory_order_acquire)) {
      // Unit popped but not processed; keep it for the accounting autopsy.
      q.force_push(std::move(*d));
      return;
    }
    process(*d, worker_id);
    if (throttle_active_.load(std::memory_order_acquire))
      note_queue_drained(worker_id);
  }
}

void NodeEngine::track_flush_ts(const SlateKey& sk, Timestamp ts) {
  std::lock_guard lock(flush_ts_mu_);
  flush_ts_[sk] = ts;
}

void NodeEngine::process(Delivery& d, int worker_id) {
  const FunctionDef& fn = *d.dest;
  InvocationResult res;

  if (!fn.is_update()) {
    res = invoke_map(*mappers_.at(fn.name), fn, d.event, config_.workflow);
  } else {
    SlateKey sk{fn.name, d.event.key};
    auto guard = slates_->locks().acquire(sk, worker_id);
    std::optional<Bytes> slate;
    bool unavailable = false;
    try {
      slate = slates_->get_slate(sk);
    } catch (const StoreUnavailable&) {
      unavailable = true;
    }
    if (unavailable) {
      guard.release();
      // Deferred once, then dropped: storage faults follow the lost-event
      // philosophy rather than blocking the worker.
      if (!d.retried) {
        d.retried = true;
        if (queues_[static_cast<std::size_t>(worker_id)]->try_push(d)) return;
      }
      if (!d.control) {
        lost_log_->append(d.event, fn.name, LostReason::StoreError);
        lost_local_.fetch_add(1, std::memory_order_relaxed);
      }
      complete(d, worker_id);
      return;
    }
    res = invoke_update(*updaters_.at(fn.name), fn, d.event,
                        slate ? &*slate : nullptr, config_.workflow);
    if (res.ok && res.slate_replacement) {
      slates_->put_slate(sk, *res.slate_replacement, d.event.ts);
      if (fn.end_flush && !d.control) track_flush_ts(sk, d.event.ts);
      if (recorder_) recorder_->record_slate_update(sk, *res.slate_replacement);
    }
  }

  if (!res.ok) {
    if (!d.control) {
      lost_log_->append(d.event, fn.name, LostReason::OperatorError);
      lost_local_.fetch_add(1, std::memory_order_relaxed);
    }
    complete(d, worker_id);
    return;
  }

  if (!d.control) {
    processed_.fetch_add(1, std::memory_order_relaxed);
    {
      std::lock_guard lock(per_fn_mu_);
      ++processed_per_fn_[fn.name];
    }
    if (processed_hook_) processed_hook_(d, worker_id);
    if (sample_latency_ && fn.is_update() && d.origin_ns != 0) {
      double ms = static_cast<double>(steady_ns() - d.origin_ns) / 1e6;
      std::lock_guard lock(latency_mu_);
      latency_ms_.push_back(ms);
    }
  }

  apply_outputs(d, res);
  complete(d, worker_id);
}

void NodeEngine::apply_outputs(const Delivery& d, const InvocationResult& res) {
  for (const auto& out : res.outputs) {
    if (recorder_ && config_.workflow.output_streams.count(out.sid))
      recorder_->record_output(out);
    route_to_subscribers(out, d.origin_ns);
  }
}

void NodeEngine::complete(const Delivery& d, int target_worker) {
  {
    std::lock_guard lock(dispatch_mu_);
    auto& units = live_units_[static_cast<std::size_t>(target_worker)];
    auto it = units.find(d.dispatch_hash);
    if (it != units.end() && --it->second == 0) units.erase(it);
  }
  if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
    std::lock_guard lock(quiesce_mu_);
    quiesce_cv_.notify_all();
  }
}

void NodeEngine::wait_quiescent() {
  std::unique_lock lock(quiesce_mu_);
  quiesce_cv_.wait(lock, [&] {
    return pending_.load(std::memory_order_acquire) == 0 ||
           killed_.load(std::memory_order_acquire);
  });
}

std::vector<const FunctionDef*> NodeEngine::end_flush_functions() const {
  std::vector<const FunctionDef*> out;
  for (const auto& f : config_.workflow.functions)
    if (f.is_update() && f.end_flush) out.push_back(&f);
  std::sort(out.begin(), out.end(),
            [](auto* a, auto* b) { return a->name < b->name; });
  return out;
}

std::vector<SlateKey> NodeEngine::flushable_keys(const FunctionDef& fn) const {
  std::set<SlateKey> keys;
  for (auto& sk : slates_->cached_keys(fn.name)) keys.insert(sk);
  for (auto& sk : slates_->durable().live_keys(fn.name, slates_->now_ms()))
    keys.insert(sk);
  std::vector<SlateKey> out;
  {
    std::lock_guard lock(flush_ts_mu_);
    for (const auto& sk : keys)
      if (flush_ts_.count(sk)) out.push_back(sk);
  }
  return out;
}

bool NodeEngine::inject_flush(const FunctionDef& fn, const SlateKey& sk) {
  Timestamp last;
  {
    std::lock_guard lock(flush_ts_mu_);
    auto it = flush_ts_.find(sk);
    if (it == flush_ts_.end()) return false;
    last = it->second;
  }
  Event flush;
  flush.sid = kFlushStream;
  flush.ts = Timestamp{last.millis, last.seq + 1};
  flush.key = sk.key;
  flush.producer = "flush";
  dispatch(std::move(flush), fn, EnqueueOrigin::Control);
  return true;
}

void NodeEngine::run_end_flush() {
  for (const auto* fn : end_flush_functions()) {
    for (const auto& sk : flushable_keys(*fn)) {
      inject_flush(*fn, sk);
      wait_quiescent();
    }
  }
}

void NodeEngine::drain_and_stop() {
  if (!started_.load()) return;
  wait_quiescent();
  stop_.store(true, std::memory_order_release);
  for (auto& q : queues_) q->notify_all();
  for (auto& w : workers_) w.join();
  workers_.clear();
  if (flusher_.joinable()) flusher_.join();
  slates_->flush_all();
}

void NodeEngine::kill() {
  if (!started_.load()) {
    killed_.store(true, std::memory_order_release);
    return;
  }
  killed_.store(true, std::memory_order_release);
  for (auto& q : queues_) q->notify_all();
  for (auto& w : workers_) w.join();
  workers_.clear();
  if (flusher_.joinable()) flusher_.join();
}

std::vector<Delivery> NodeEngine::autopsy_queues() {
  std::vector<Delivery> out;
  for (auto& q : queues_) {
    auto rest = q->drain_remaining();
    for (auto& d : rest) out.push_back(std::move(d));
  }
  return out;
}

NodeStats NodeEngine::stats() const {
  NodeStats s;
  s.queue_lengths.reserve(queues_.size());
  for (const auto& q : queues_) s.queue_lengths.push_back(q->size());
  s.largest_queue = s.queue_lengths.empty()
                        ? 0
                        : *std::max_element(s.queue_lengths.begin(),
                                            s.queue_lengths.end());
  s.events_processed = processed_.load(std::memory_order_relaxed);
  s.events_lost = lost_local_.load(std::memory_order_relaxed);
  s.slates_cached = slates_->cached_count();
  s.epoch = epoch_.load(std::memory_order_relaxed);
  return s;
}

std::uint64_t NodeEngine::processed_for(const std::string& function) const {
  std::lock_guard lock(per_fn_mu_);
  auto it = processed_per_fn_.find(function);
  return it == processed_per_fn_.end() ? 0 : it->second;
}

std::vector<double> NodeEngine::latency_samples_ms() const {
  std::lock_guard lock(latency_mu_);
  return latency_ms_;
}

NodeEngine::FetchResult NodeEngine::fetch_slate_local(const SlateKey& sk) {
  auto guard = slates_->locks().acquire(sk, -1);
  try {
    auto body = slates_->get_slate(sk);
    if (!body) return {FetchResult::Status::Absent, {}, {}};
    return {FetchResult::Status::Found, *body, {}};
  } catch (const StoreUnavailable& e) {
    return {FetchResult::Status::Error, {}, e.what()};
  }
}

void NodeEngine::flusher_loop() {
  auto tick = std::chrono::milliseconds(std::max<std::uint64_t>(
      10, config_.runtime.flush_tick_ms));
  auto next = std::chrono::steady_clock::now() + tick;
  while (!stop_.load(std::memory_order_acquire) &&
         !killed_.load(std::memory_order_acquire)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (std::chrono::steady_clock::now() < next) continue;
    next = std::chrono::steady_clock::now() + tick;
    auto now = slates_->now_ms();
    slates_->flush_dirty(now);
    slates_->gc_expired(now);
  }
}

}  // namespace slateflow
