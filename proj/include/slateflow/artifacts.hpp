#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "slateflow/event.hpp"
#include "slateflow/slate_store.hpp"

namespace slateflow {

/// Collects a run's observable trace: the ordered slate-update log, events
/// published to output streams, and the final slates. Both the simulator and
/// the engine write the same layout, which is what oracle comparison diffs:
///
///   slate_updates.log   updater TAB b64(key) TAB b64(body), apply order
///   outputs/<sid>.events  sid TAB millis TAB seq TAB producer TAB b64(key) TAB b64(value)
///   final_slates.tsv    updater TAB b64(key) TAB b64(body), sorted
///   meta.json           {nodes, workers, lockstep, losses}
class RunRecorder {
 public:
  struct SlateUpdate {
    SlateKey key;
    Bytes body;
  };

  void record_slate_update(const SlateKey& sk, const Bytes& body);
  void record_output(const Event& e);

  void set_final_slates(std::map<SlateKey, Bytes> finals);
  void set_meta(int nodes, int workers, bool lockstep, std::uint64_t losses);

  void write(const std::string& dir) const;

  // In-memory views for tests.
  std::vector<SlateUpdate> slate_updates() const;
  std::map<std::string, std::vector<Event>> outputs() const;
  const std::map<SlateKey, Bytes>& final_slates() const { return finals_; }

 private:
  mutable std::mutex mu_;
  std::vector<SlateUpdate> updates_;
  std::map<std::string, std::vector<Event>> outputs_;
  std::map<SlateKey, Bytes> finals_;
  int nodes_ = 1;
  int workers_ = 1;
  bool lockstep_ = false;
  std::uint64_t losses_ = 0;
};

struct RunMeta {
  int nodes = 1;
  int workers = 1;
  bool lockstep = false;
  std::uint64_t losses = 0;
};

RunMeta read_run_meta(const std::string& dir);

std::string format_output_line(const Event& e);

}  // namespace slateflow
