#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace slateflow {

/// Moves encoded wire frames between nodes. One implementation carries them
/// over persistent TCP connections; the other short-circuits within a
/// process (frames are still encoded and decoded, so the byte layout is
/// exercised either way). Send failures are the cluster's failure detector.
class Transport {
 public:
  using FrameHandler = std::function<void(std::string frame)>;
  /// Serves request/response traffic (slate fetch forwarding); returns the
  /// encoded reply frame.
  using RequestHandler = std::function<std::string(const std::string& frame)>;

  virtual ~Transport() = default;

  virtual bool listen(const std::string& addr, FrameHandler on_frame,
                      RequestHandler on_request) = 0;
  virtual void stop_listening(const std::string& addr) = 0;

  /// One-way delivery. False means the peer is unreachable (connect/write
  /// failure or timeout): the caller treats the node as failed.
  virtual bool send(const std::string& addr, const std::string& frame) = 0;

  /// Round trip; nullopt when the peer is unreachable.
  virtual std::optional<std::string> request(const std::string& addr,
                                             const std::string& frame) = 0;
};

/// In-process transport: a shared hub maps addresses to handlers. Delivery
/// runs the receiver's handler on the sending thread, so a delivered frame
/// is in the destination queue before send() returns; a killed (deregistered)
/// address fails sends exactly like a refused connection. This is what makes
/// failure-injection accounting exact.
class InprocTransport : public Transport {
 public:
  struct Hub {
    std::mutex mu;
    std::map<std::string, std::pair<FrameHandler, RequestHandler>> listeners;
  };

  InprocTransport() : hub_(std::make_shared<Hub>()) {}
  explicit InprocTransport(std::shared_ptr<Hub> hub) : hub_(std::move(hub)) {}

  std::shared_ptr<Hub> hub() { return hub_; }

  bool listen(const std::string& addr, FrameHandler on_frame,
              RequestHandler on_request) override;
  void stop_listening(const std::string& addr) override;
  bool send(const std::string& addr, const std::string& frame) override;
  std::optional<std::string> request(const std::string& addr,
                                     const std::string& frame) override;

 private:
  std::shared_ptr<Hub> hub_;
};

/// TCP transport: one listener thread per bound address, one reader thread
/// per accepted connection, cached outbound connections with connect/write
/// timeouts. Unreachable peers surface as failed sends, not exceptions.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(std::uint64_t connect_timeout_ms = 500);
  ~TcpTransport() override;

  bool listen(const std::string& addr, FrameHandler on_frame,
              RequestHandler on_request) override;
  void stop_listening(const std::string& addr) override;
  bool send(const std::string& addr, const std::string& frame) override;
  std::optional<std::string> request(const std::string& addr,
                                     const std::string& frame) override;

 private:
  struct Listener;
  int connect_to(const std::string& addr);

  std::uint64_t connect_timeout_ms_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Listener>> listeners_;
  std::map<std::string, int> outbound_;  // addr -> connected fd
  std::mutex outbound_mu_;
};

}  // namespace slateflow
