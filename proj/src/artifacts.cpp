#include "slateflow/artifacts.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slateflow/bytes.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace slateflow {

void RunRecorder::record_slate_update(const SlateKey& sk, const Bytes& body) {
  std::lock_guard lock(mu_);
  updates_.push_back({sk, body});
}

void RunRecorder::record_output(const Event& e) {
  std::lock_guard lock(mu_);
  outputs_[e.sid].push_back(e);
}

void RunRecorder::set_final_slates(std::map<SlateKey, Bytes> finals) {
  std::lock_guard lock(mu_);
  finals_ = std::move(finals);
}

void RunRecorder::set_meta(int nodes, int workers, bool lockstep,
                           std::uint64_t losses) {
  std::lock_guard lock(mu_);
  nodes_ = nodes;
  workers_ = workers;
  lockstep_ = lockstep;
  losses_ = losses;
}

std::string format_output_line(const Event& e) {
  return e.sid + "\t" + std::to_string(e.ts.millis) + "\t" +
         std::to_string(e.ts.seq) + "\t" + e.producer + "\t" +
         base64_encode(e.key) + "\t" + base64_encode(e.value) + "\n";
}

void RunRecorder::write(const std::string& dir) const {
  std::lock_guard lock(mu_);
  fs::create_directories(dir + "/outputs");
  {
    std::ofstream out(dir + "/slate_updates.log", std::ios::binary);
    for (const auto& u : updates_)
      out << u.key.updater << "\t" << base64_encode(u.key.key) << "\t"
          << base64_encode(u.body) << "\n";
  }
  for (const auto& [sid, events] : outputs_) {
    std::ofstream out(dir + "/outputs/" + sid + ".events", std::ios::binary);
    for (const auto& e : events) out << format_output_line(e);
  }
  {
    std::ofstream out(dir + "/final_slates.tsv", std::ios::binary);
    for (const auto& [sk, body] : finals_)
      out << sk.updater << "\t" << base64_encode(sk.key) << "\t"
          << base64_encode(body) << "\n";
  }
  json meta{{"nodes", nodes_},
            {"workers", workers_},
            {"lockstep", lockstep_},
            {"losses", losses_}};
  std::ofstream(dir + "/meta.json") << meta.dump(2) << "\n";
}

std::vector<RunRecorder::SlateUpdate> RunRecorder::slate_updates() const {
  std::lock_guard lock(mu_);
  return updates_;
}

std::map<std::string, std::vector<Event>> RunRecorder::outputs() const {
  std::lock_guard lock(mu_);
  return outputs_;
}

RunMeta read_run_meta(const std::string& dir) {
  std::ifstream in(dir + "/meta.json");
  if (!in) return {};
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return {};
  RunMeta m;
  m.nodes = j.value("nodes", 1);
  m.workers = j.value("workers", 1);
  m.lockstep = j.value("lockstep", false);
  m.losses = j.value("losses", std::uint64_t{0});
  return m;
}

}  // namespace slateflow
