#include "slateflow/slate_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "slateflow/codec.hpp"

namespace fs = std::filesystem;

namespace slateflow {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>((v >> 8) & 0xff);
  out += static_cast<char>(v & 0xff);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

struct Cursor {
  const char* p;
  const char* end;
  bool ok = true;

  bool need(std::size_t n) {
    if (!ok || static_cast<std::size_t>(end - p) < n) {
      ok = false;
      return false;
    }
    return true;
  }
  std::uint16_t u16() {
    if (!need(2)) return 0;
    auto v = (static_cast<std::uint16_t>(static_cast<unsigned char>(p[0])) << 8) |
             static_cast<unsigned char>(p[1]);
    p += 2;
    return v;
  }
  std::uint32_t u32() {
    if (!need(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    if (!need(8)) return 0;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    p += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    if (!need(n)) return {};
    std::string s(p, n);
    p += n;
    return s;
  }
};

// Record: [u8 codec][u16 klen][key][u16 ulen][updater]
//         [u64 write_millis][u64 ttl_millis][u32 blen][body]
std::string encode_record(const SlateKey& sk, const DurableStore::Row& row) {
  std::string out;
  out += static_cast<char>(row.tombstone ? kCodecTombstone : kCodecDeflate);
  put_u16(out, static_cast<std::uint16_t>(sk.key.size()));
  out += sk.key;
  put_u16(out, static_cast<std::uint16_t>(sk.updater.size()));
  out += sk.updater;
  put_u64(out, row.write_millis);
  put_u64(out, row.ttl_millis);
  put_u32(out, static_cast<std::uint32_t>(row.compressed.size()));
  out += row.compressed;
  return out;
}

bool decode_record(Cursor& c, StoreRecord& rec) {
  if (!c.need(1)) return false;
  rec.codec = static_cast<unsigned char>(*c.p++);
  rec.key.key = c.bytes(c.u16());
  rec.key.updater = c.bytes(c.u16());
  rec.write_millis = c.u64();
  rec.ttl_millis = c.u64();
  rec.compressed = c.bytes(c.u32());
  return c.ok;
}

bool expired(const DurableStore::Row& row, std::uint64_t now_ms) {
  return row.ttl_millis != 0 && row.write_millis + row.ttl_millis < now_ms;
}

void replay_file(const std::string& file, std::uint64_t& consumed,
                 std::map<SlateKey, DurableStore::Row>& rows) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return;
  in.seekg(0, std::ios::end);
  auto size = static_cast<std::uint64_t>(in.tellg());
  if (size <= consumed) return;
  in.seekg(static_cast<std::streamoff>(consumed));
  std::string buf(size - consumed, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  Cursor c{buf.data(), buf.data() + buf.size()};
  while (c.p < c.end) {
    const char* before = c.p;
    StoreRecord rec;
    if (!decode_record(c, rec)) {
      // Torn tail write: stop at the last complete record.
      consumed += static_cast<std::uint64_t>(before - buf.data());
      return;
    }
    auto it = rows.find(rec.key);
    // Newest write wins when segments from several processes interleave.
    if (it == rows.end() || it->second.write_millis <= rec.write_millis)
      rows[rec.key] = {rec.compressed, rec.write_millis, rec.ttl_millis,
                       rec.tombstone()};
  }
  consumed = size;
}

}  // namespace

DurableStore::DurableStore(std::string path, int replicas, Consistency consistency)
    : path_(std::move(path)), consistency_(consistency) {
  replicas_.resize(static_cast<std::size_t>(std::max(1, replicas)));
  auto pid = static_cast<unsigned long>(::getpid());
  for (std::size_t i = 0; i < replicas_.size(); ++i) {
    auto& r = replicas_[i];
    r.dir = path_ + "/replica-" + std::to_string(i);
    fs::create_directories(r.dir);
    r.segment_path = r.dir + "/segment-" + std::to_string(pid) + ".log";
    std::lock_guard lock(mu_);
    replay_locked(r);
  }
}

DurableStore::~DurableStore() = default;

int DurableStore::required_acks() const {
  int n = static_cast<int>(replicas_.size());
  switch (consistency_) {
    case Consistency::One: return 1;
    case Consistency::Quorum: return n / 2 + 1;
    case Consistency::All: return n;
  }
  return n;
}

void DurableStore::replay_locked(Replica& r) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(r.dir, ec)) {
    auto name = e.path().filename().string();
    if (name.starts_with("segment-") && name.ends_with(".log"))
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) replay_file(f, r.consumed[f], r.rows);
}

void DurableStore::append_record(Replica& r, const SlateKey& sk, const Row& row) {
  std::ofstream out(r.segment_path, std::ios::binary | std::ios::app);
  std::string rec = encode_record(sk, row);
  out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  out.flush();
  r.consumed[r.segment_path] += rec.size();
}

bool DurableStore::write(const SlateKey& sk, const Bytes& body, Ttl ttl,
                         std::uint64_t write_millis) {
  Row row{compress_slate(body), write_millis, ttl.millis, false};
  std::lock_guard lock(mu_);
  int acks = 0;
  for (auto& r : replicas_) {
    if (!r.up) continue;
    append_record(r, sk, row);
    r.rows[sk] = row;
    ++acks;
  }
  return acks >= required_acks();
}

std::optional<Bytes> DurableStore::read(const SlateKey& sk,
                                        std::uint64_t now_ms) const {
  std::lock_guard lock(mu_);
  int reachable = 0;
  const Row* newest = nullptr;
  for (const auto& r : replicas_) {
    if (!r.up) continue;
    ++reachable;
    auto it = r.rows.find(sk);
    if (it != r.rows.end() &&
        (newest == nullptr || it->second.write_millis > newest->write_millis))
      newest = &it->second;
  }
  if (reachable < required_acks())
    throw StoreUnavailable("store read needs " + std::to_string(required_acks()) +
                           " replicas, " + std::to_string(reachable) + " reachable");
  if (newest == nullptr || newest->tombstone || expired(*newest, now_ms))
    return std::nullopt;
  return decompress_slate(newest->compressed);
}

std::vector<SlateKey> DurableStore::erase_expired(std::uint64_t now_ms) {
  std::lock_guard lock(mu_);
  std::set<SlateKey> removed;
  for (auto& r : replicas_) {
    if (!r.up) continue;
    for (auto& [sk, row] : r.rows) {
      if (!row.tombstone && expired(row, now_ms)) removed.insert(sk);
    }
  }
  for (const auto& sk : removed) {
    Row tomb{{}, now_ms, 0, true};
    for (auto& r : replicas_) {
      if (!r.up) continue;
      auto it = r.rows.find(sk);
      if (it == r.rows.end() || it->second.tombstone) continue;
      append_record(r, sk, tomb);
      it->second = tomb;
    }
  }
  return {removed.begin(), removed.end()};
}

std::map<SlateKey, Bytes> DurableStore::live_rows(std::uint64_t now_ms) const {
  std::lock_guard lock(mu_);
  std::map<SlateKey, Row> merged;
  for (const auto& r : replicas_) {
    if (!r.up) continue;
    for (const auto& [sk, row] : r.rows) {
      auto it = merged.find(sk);
      if (it == merged.end() || it->second.write_millis <= row.write_millis)
        merged[sk] = row;
    }
  }
  std::map<SlateKey, Bytes> out;
  for (const auto& [sk, row] : merged)
    if (!row.tombstone && !expired(row, now_ms))
      out[sk] = decompress_slate(row.compressed);
  return out;
}

std::vector<SlateKey> DurableStore::live_keys(const std::string& updater,
                                              std::uint64_t now_ms) const {
  std::vector<SlateKey> out;
  for (auto& [sk, body] : live_rows(now_ms))
    if (sk.updater == updater) out.push_back(sk);
  return out;
}

void DurableStore::refresh() {
  std::lock_guard lock(mu_);
  for (auto& r : replicas_) replay_locked(r);
}

void DurableStore::set_replica_up(int replica, bool up) {
  std::lock_guard lock(mu_);
  auto& r = replicas_.at(static_cast<std::size_t>(replica));
  bool was_down = !r.up;
  r.up = up;
  if (up && was_down) replay_locked(r);
}

std::map<SlateKey, DurableStore::Row> read_store_offline(const std::string& path) {
  std::map<SlateKey, DurableStore::Row> rows;
  std::error_code ec;
  std::vector<std::string> files;
  for (const auto& rep : fs::directory_iterator(path, ec)) {
    if (!rep.is_directory()) continue;
    for (const auto& e : fs::directory_iterator(rep.path(), ec)) {
      auto name = e.path().filename().string();
      if (name.starts_with("segment-") && name.ends_with(".log"))
        files.push_back(e.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::uint64_t consumed = 0;
    replay_file(f, consumed, rows);
  }
  for (auto it = rows.begin(); it != rows.end();)
    it = it->second.tombstone ? rows.erase(it) : std::next(it);
  return rows;
}

SlateLockTable::Guard& SlateLockTable::Guard::operator=(Guard&& o) noexcept {
  if (this != &o) {
    release();
    m_ = o.m_;
    o.m_ = nullptr;
  }
  return *this;
}

void SlateLockTable::Guard::release() {
  if (m_ != nullptr) {
    m_->unlock();
    m_ = nullptr;
  }
}

SlateLockTable::Entry& SlateLockTable::entry_for(const SlateKey& sk,
                                                 int worker_id) {
  std::lock_guard lock(mu_);
  auto& slot = entries_[sk];
  if (!slot) slot = std::make_unique<Entry>();
  if (audit_ && worker_id >= 0) {
    auto& w = slot->workers;
    if (std::find(w.begin(), w.end(), worker_id) == w.end())
      w.push_back(worker_id);
  }
  return *slot;
}

SlateLockTable::Guard SlateLockTable::acquire(const SlateKey& sk, int worker_id) {
  Entry& e = entry_for(sk, worker_id);
  e.m.lock();
  return Guard(&e.m);
}

SlateLockTable::Guard SlateLockTable::try_acquire(const SlateKey& sk) {
  Entry& e = entry_for(sk, -1);
  if (!e.m.try_lock()) return Guard();
  return Guard(&e.m);
}

std::size_t SlateLockTable::max_distinct_workers() const {
  std::lock_guard lock(mu_);
  std::size_t m = 0;
  for (const auto& [sk, e] : entries_) m = std::max(m, e->workers.size());
  return m;
}

std::map<SlateKey, std::vector<int>> SlateLockTable::audit() const {
  std::lock_guard lock(mu_);
  std::map<SlateKey, std::vector<int>> out;
  for (const auto& [sk, e] : entries_) out[sk] = e->workers;
  return out;
}

SlateStore::SlateStore(std::shared_ptr<DurableStore> durable,
                       std::size_t cache_capacity,
                       std::map<std::string, UpdaterPolicy> policies, Clock clock,
                       bool audit_contention)
    : durable_(std::move(durable)),
      capacity_(std::max<std::size_t>(1, cache_capacity)),
      policies_(std::move(policies)),
      clock_(std::move(clock)),
      locks_(audit_contention) {
  if (!clock_) {
    clock_ = [] {
      return static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::system_clock::now().time_since_epoch())
              .count());
    };
  }
}

const SlateStore::UpdaterPolicy& SlateStore::policy_for(
    const std::string& updater) const {
  auto it = policies_.find(updater);
  return it == policies_.end() ? default_policy_ : it->second;
}

void SlateStore::touch_locked(const SlateKey& sk, Entry& e) {
  lru_.erase(e.lru_pos);
  lru_.push_front(sk);
  e.lru_pos = lru_.begin();
}

void SlateStore::evict_if_needed_locked() {
  while (entries_.size() > capacity_) {
    bool evicted = false;
    // Oldest first; skip entries currently locked by a worker.
    for (auto it = lru_.rbegin(); it != lru_.rend(); ++it) {
      const SlateKey victim = *it;
      auto guard = locks_.try_acquire(victim);
      if (!guard) continue;
      auto ent = entries_.find(victim);
      if (ent == entries_.end()) continue;
      if (ent->second.dirty) {
        // Eviction must never lose data: persist before dropping.
        if (!durable_->write(victim, ent->second.body,
                             policy_for(victim.updater).ttl, clock_()))
          continue;  // store degraded; try another victim
      }
      lru_.erase(ent->second.lru_pos);
      entries_.erase(ent);
      evicted = true;
      break;
    }
    if (!evicted) break;  // everything pinned; allow temporary overgrowth
  }
}

std::optional<Bytes> SlateStore::get_slate(const SlateKey& sk) {
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find(sk);
    if (it != entries_.end()) {
      touch_locked(sk, it->second);
      return it->second.body;
    }
  }
  auto from_store = durable_->read(sk, clock_());  // may throw StoreUnavailable
  if (!from_store) return std::nullopt;
  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.try_emplace(sk);
  if (inserted) {
    lru_.push_front(sk);
    it->second.lru_pos = lru_.begin();
    it->second.body = *from_store;
    it->second.dirty = false;
    evict_if_needed_locked();
  }
  return it->second.body;
}

void SlateStore::put_slate(const SlateKey& sk, Bytes body, Timestamp event_ts) {
  const auto& policy = policy_for(sk.updater);
  bool write_through_ok = false;
  if (policy.flush.kind == FlushPolicy::Kind::WriteThrough)
    write_through_ok = durable_->write(sk, body, policy.ttl, clock_());

  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.try_emplace(sk);
  if (inserted) {
    lru_.push_front(sk);
    it->second.lru_pos = lru_.begin();
  } else {
    touch_locked(sk, it->second);
  }
  auto& e = it->second;
  e.body = std::move(body);
  e.last_write = event_ts;
  if (write_through_ok) {
    e.dirty = false;
    e.pending_since.reset();
  } else {
    e.dirty = true;
    if (!e.pending_since) e.pending_since = clock_();
  }
  if (inserted) evict_if_needed_locked();
}

bool SlateStore::flush_entry_locked(const SlateKey& sk, Entry& e,
                                    std::uint64_t now_ms) {
  if (!durable_->write(sk, e.body, policy_for(sk.updater).ttl, now_ms))
    return false;  // stays dirty, retried next cycle
  e.dirty = false;
  e.pending_since.reset();
  return true;
}

std::size_t SlateStore::flush_dirty(std::uint64_t now_ms) {
  std::vector<SlateKey> candidates;
  {
    std::lock_guard lock(mu_);
    for (const auto& [sk, e] : entries_) {
      if (!e.dirty) continue;
      const auto& policy = policy_for(sk.updater);
      switch (policy.flush.kind) {
        case FlushPolicy::Kind::WriteThrough:
          // Only reachable after a failed synchronous write; retry now.
          candidates.push_back(sk);
          break;
        case FlushPolicy::Kind::Interval:
          if (e.pending_since && *e.pending_since + policy.flush.interval_ms <= now_ms)
            candidates.push_back(sk);
          break;
        case FlushPolicy::Kind::OnEvict:
          break;
      }
    }
  }
  std::size_t flushed = 0;
  for (const auto& sk : candidates) {
    auto guard = locks_.acquire(sk, -1);
    std::lock_guard lock(mu_);
    auto it = entries_.find(sk);
    if (it == entries_.end() || !it->second.dirty) continue;
    if (flush_entry_locked(sk, it->second, now_ms)) ++flushed;
  }
  return flushed;
}

std::size_t SlateStore::gc_expired(std::uint64_t now_ms) {
  auto removed = durable_->erase_expired(now_ms);
  for (const auto& sk : removed) {
    auto guard = locks_.acquire(sk, -1);
    std::lock_guard lock(mu_);
    auto it = entries_.find(sk);
    // Dirty entries carry newer unflushed state and survive the sweep.
    if (it != entries_.end() && !it->second.dirty) {
      lru_.erase(it->second.lru_pos);
      entries_.erase(it);
    }
  }
  return removed.size();
}

std::size_t SlateStore::flush_all() {
  std::vector<SlateKey> dirty;
  {
    std::lock_guard lock(mu_);
    for (const auto& [sk, e] : entries_)
      if (e.dirty) dirty.push_back(sk);
  }
  std::size_t flushed = 0;
  for (const auto& sk : dirty) {
    auto guard = locks_.acquire(sk, -1);
    std::lock_guard lock(mu_);
    auto it = entries_.find(sk);
    if (it == entries_.end() || !it->second.dirty) continue;
    if (flush_entry_locked(sk, it->second, clock_())) ++flushed;
  }
  return flushed;
}

std::size_t SlateStore::cached_count() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::vector<SlateKey> SlateStore::cached_keys(const std::string& updater) const {
  std::lock_guard lock(mu_);
  std::vector<SlateKey> out;
  for (const auto& [sk, e] : entries_)
    if (sk.updater == updater) out.push_back(sk);
  return out;
}

std::optional<Timestamp> SlateStore::last_write_of(const SlateKey& sk) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(sk);
  if (it == entries_.end()) return std::nullopt;
  return it->second.last_write;
}

bool SlateStore::is_dirty(const SlateKey& sk) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(sk);
  return it != entries_.end() && it->second.dirty;
}

}  // namespace slateflow
