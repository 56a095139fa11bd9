#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "slateflow/bytes.hpp"
#include "slateflow/config.hpp"
#include "slateflow/event.hpp"
#include "slateflow/workflow.hpp"

namespace slateflow {

/// Each (update function, key) pair uniquely determines one slate.
struct SlateKey {
  std::string updater;
  Bytes key;

  auto operator<=>(const SlateKey&) const = default;
};

/// Retriable persistence fault: too few replicas reachable for the requested
/// consistency level. The runtime defers the invocation and requeues the
/// event once; a second failure drops and logs it.
class StoreUnavailable : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Embedded durable key-value store with N simulated replicas and a
/// consistency-level parameter (one / quorum / all). Values are stored per
/// (row = key, column = updater), compressed. Each replica is a directory of
/// append-only segment files; the record layout is documented in the README
/// and parsed offline by `slateflow dump-slates`.
///
/// Replica outages are controlled by the test harness via set_replica_up.
/// Writes reach every up replica; a write succeeds iff the ack count meets
/// the level. Reads require the same count of reachable replicas and return
/// the newest acked row. All operations are internally synchronized.
class DurableStore {
 public:
  struct Row {
    Bytes compressed;
    std::uint64_t write_millis = 0;
    std::uint64_t ttl_millis = 0;  // 0 = forever
    bool tombstone = false;
  };

  DurableStore(std::string path, int replicas, Consistency consistency);
  ~DurableStore();

  bool write(const SlateKey& sk, const Bytes& body, Ttl ttl,
             std::uint64_t write_millis);

  /// nullopt: never written, deleted, or TTL-expired at `now`.
  std::optional<Bytes> read(const SlateKey& sk, std::uint64_t now_ms) const;

  /// Appends tombstones for every row with write_time + ttl < now. Returns
  /// the removed slate keys (for cache invalidation).
  std::vector<SlateKey> erase_expired(std::uint64_t now_ms);

  /// Merged live view across up replicas, newest write wins. Decompressed.
  std::map<SlateKey, Bytes> live_rows(std::uint64_t now_ms) const;
  std::vector<SlateKey> live_keys(const std::string& updater,
                                  std::uint64_t now_ms) const;

  /// Picks up records appended by other processes since open (failover path).
  void refresh();

  void set_replica_up(int replica, bool up);
  int replicas() const { return static_cast<int>(replicas_.size()); }
  Consistency consistency() const { return consistency_; }
  int required_acks() const;
  const std::string& path() const { return path_; }

 private:
  struct Replica {
    std::string dir;
    bool up = true;
    std::map<SlateKey, Row> rows;
    std::string segment_path;
    // Byte offsets already replayed, per segment file.
    std::map<std::string, std::uint64_t> consumed;
  };

  void append_record(Replica& r, const SlateKey& sk, const Row& row);
  void replay_locked(Replica& r);

  mutable std::mutex mu_;
  std::string path_;
  Consistency consistency_;
  std::vector<Replica> replicas_;
};

/// One record parsed from a segment file; used by the offline dump reader.
struct StoreRecord {
  std::uint8_t codec = 0;
  SlateKey key;
  std::uint64_t write_millis = 0;
  std::uint64_t ttl_millis = 0;
  Bytes compressed;
  bool tombstone() const { return codec == 0xff; }
};

/// Offline segment-file reader (serves bulk slate dumps without touching a
/// running node). Applies records in replay order, newest write wins across
/// replicas; returns live rows with decompressed bodies.
std::map<SlateKey, DurableStore::Row> read_store_offline(const std::string& path);

/// Per-slate mutual exclusion plus the contention audit: the set of distinct
/// workers that ever requested each slate (bounded at 2 by dispatch).
class SlateLockTable {
 public:
  explicit SlateLockTable(bool audit) : audit_(audit) {}

  class Guard {
   public:
    Guard() = default;
    Guard(Guard&& o) noexcept : m_(o.m_) { o.m_ = nullptr; }
    Guard& operator=(Guard&& o) noexcept;
    ~Guard() { release(); }
    void release();
    explicit operator bool() const { return m_ != nullptr; }

   private:
    friend class SlateLockTable;
    explicit Guard(std::mutex* m) : m_(m) {}
    std::mutex* m_ = nullptr;
  };

  /// Blocks until exclusive. worker_id >= 0 is recorded in the audit.
  Guard acquire(const SlateKey& sk, int worker_id);
  /// Non-blocking variant for eviction scans.
  Guard try_acquire(const SlateKey& sk);

  /// Largest number of distinct workers that ever requested one slate.
  std::size_t max_distinct_workers() const;
  std::map<SlateKey, std::vector<int>> audit() const;

 private:
  struct Entry {
    std::mutex m;
    std::vector<int> workers;
  };
  Entry& entry_for(const SlateKey& sk, int worker_id);

  mutable std::mutex mu_;
  std::map<SlateKey, std::unique_ptr<Entry>> entries_;
  bool audit_;
};

/// Node-level slate access: an LRU cache in front of the durable store, with
/// per-updater TTL and flush policy. Writes mark entries dirty; dirty data
/// reaches the store synchronously (write-through), on a flush interval, or
/// at eviction/shutdown. Callers must hold the slate's lock-table entry for
/// get/put; the background flusher does the same.
class SlateStore {
 public:
  struct UpdaterPolicy {
    Ttl ttl = Ttl::forever();
    FlushPolicy flush;
  };
  using Clock = std::function<std::uint64_t()>;  // store-clock millis

  SlateStore(std::shared_ptr<DurableStore> durable, std::size_t cache_capacity,
             std::map<std::string, UpdaterPolicy> policies, Clock clock,
             bool audit_contention);

  /// Cache, then durable store, then ABSENT. A miss served by the store
  /// populates the cache (clean). Throws StoreUnavailable when the store
  /// cannot answer at its consistency level.
  std::optional<Bytes> get_slate(const SlateKey& sk);

  /// Updates the cache entry (dirty) and, under write-through, synchronously
  /// persists it; a failed write-through leaves the entry dirty for the
  /// flusher to retry. Evicts the LRU entry first when at capacity.
  void put_slate(const SlateKey& sk, Bytes body, Timestamp event_ts);

  /// Flushes dirty entries that are due at `now` under their policy.
  std::size_t flush_dirty(std::uint64_t now_ms);

  /// Removes expired durable rows and invalidates their clean cache entries.
  std::size_t gc_expired(std::uint64_t now_ms);

  /// Shutdown flush: every dirty entry, regardless of policy.
  std::size_t flush_all();

  std::size_t cached_count() const;
  std::vector<SlateKey> cached_keys(const std::string& updater) const;
  std::optional<Timestamp> last_write_of(const SlateKey& sk) const;
  bool is_dirty(const SlateKey& sk) const;

  SlateLockTable& locks() { return locks_; }
  DurableStore& durable() { return *durable_; }
  std::uint64_t now_ms() const { return clock_(); }
  const UpdaterPolicy& policy_for(const std::string& updater) const;

 private:
  struct Entry {
    Bytes body;
    bool dirty = false;
    Timestamp last_write{};
    std::optional<std::uint64_t> pending_since;  // store-clock of first unflushed write
    std::list<SlateKey>::iterator lru_pos;
  };

  // All return/operate under mu_.
  void touch_locked(const SlateKey& sk, Entry& e);
  void evict_if_needed_locked();
  bool flush_entry_locked(const SlateKey& sk, Entry& e, std::uint64_t now_ms);

  std::shared_ptr<DurableStore> durable_;
  std::size_t capacity_;
  std::map<std::string, UpdaterPolicy> policies_;
  UpdaterPolicy default_policy_{};
  Clock clock_;
  SlateLockTable locks_;

  mutable std::mutex mu_;
  std::map<SlateKey, Entry> entries_;
  std::list<SlateKey> lru_;  // front = most recent
};

}  // namespace slateflow
