#include "slateflow/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

#include "slateflow/wire.hpp"

namespace slateflow {

bool InprocTransport::listen(const std::string& addr, FrameHandler on_frame,
                             RequestHandler on_request) {
  std::lock_guard lock(hub_->mu);
  auto [it, inserted] = hub_->listeners.emplace(
      addr, std::make_pair(std::move(on_frame), std::move(on_request)));
  return inserted;
}

void InprocTransport::stop_listening(const std::string& addr) {
  std::lock_guard lock(hub_->mu);
  hub_->listeners.erase(addr);
}

bool InprocTransport::send(const std::string& addr, const std::string& frame) {
  FrameHandler handler;
  {
    std::lock_guard lock(hub_->mu);
    auto it = hub_->listeners.find(addr);
    if (it == hub_->listeners.end()) return false;
    handler = it->second.first;
  }
  if (!handler) return false;
  handler(frame);
  return true;
}

std::optional<std::string> InprocTransport::request(const std::string& addr,
                                                    const std::string& frame) {
  RequestHandler handler;
  {
    std::lock_guard lock(hub_->mu);
    auto it = hub_->listeners.find(addr);
    if (it == hub_->listeners.end()) return std::nullopt;
    handler = it->second.second;
  }
  if (!handler) return std::nullopt;
  return handler(frame);
}

namespace {

bool split_addr(const std::string& addr, std::string& host, std::uint16_t& port) {
  auto pos = addr.rfind(':');
  if (pos == std::string::npos) return false;
  host = addr.substr(0, pos);
  try {
    port = static_cast<std::uint16_t>(std::stoul(addr.substr(pos + 1)));
  } catch (...) {
    return false;
  }
  return true;
}

bool write_all(int fd, const char* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n <= 0) return false;
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_exact(int fd, char* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::recv(fd, data, len, 0);
    if (n <= 0) return false;
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

// Reads one length-prefixed frame (prefix included in the result).
std::optional<std::string> read_frame(int fd) {
  char head[4];
  if (!read_exact(fd, head, 4)) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<unsigned char>(head[i]);
  if (len == 0 || len > (64u << 20)) return std::nullopt;
  std::string frame(4 + len, '\0');
  std::memcpy(frame.data(), head, 4);
  if (!read_exact(fd, frame.data() + 4, len)) return std::nullopt;
  return frame;
}

}  // namespace

struct TcpTransport::Listener {
  int fd = -1;
  Transport::FrameHandler on_frame;
  Transport::RequestHandler on_request;
  std::thread accept_thread;
  std::atomic<bool> stop{false};
  std::mutex conns_mu;
  std::vector<std::thread> readers;
  std::vector<int> conn_fds;

  ~Listener() {
    stop.store(true);
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
    {
      std::lock_guard lock(conns_mu);
      for (int& c : conn_fds) {
        if (c < 0) continue;
        ::shutdown(c, SHUT_RDWR);
        ::close(c);
        c = -1;
      }
    }
    if (accept_thread.joinable()) accept_thread.join();
    // No new readers after the accept thread exits; join without the lock so
    // finishing readers can still deregister their fds.
    for (auto& t : readers)
      if (t.joinable()) t.join();
  }
};

TcpTransport::TcpTransport(std::uint64_t connect_timeout_ms)
    : connect_timeout_ms_(connect_timeout_ms) {}

TcpTransport::~TcpTransport() {
  {
    std::lock_guard lock(mu_);
    listeners_.clear();
  }
  std::lock_guard lock(outbound_mu_);
  for (auto& [addr, fd] : outbound_) ::close(fd);
  outbound_.clear();
}

bool TcpTransport::listen(const std::string& addr, FrameHandler on_frame,
                          RequestHandler on_request) {
  std::string host;
  std::uint16_t port = 0;
  if (!split_addr(addr, host, port)) return false;

  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return false;
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  sa.sin_addr.s_addr =
      (host == "0.0.0.0" || host.empty()) ? INADDR_ANY : inet_addr(host.c_str());
  if (sa.sin_addr.s_addr == INADDR_NONE) sa.sin_addr.s_addr = INADDR_ANY;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
      ::listen(fd, 64) != 0) {
    ::close(fd);
    return false;
  }

  auto listener = std::make_unique<Listener>();
  Listener* l = listener.get();
  l->fd = fd;
  l->on_frame = std::move(on_frame);
  l->on_request = std::move(on_request);
  l->accept_thread = std::thread([l] {
    while (!l->stop.load()) {
      int conn = ::accept(l->fd, nullptr, nullptr);
      if (conn < 0) break;
      std::lock_guard lock(l->conns_mu);
      if (l->stop.load()) {
        ::close(conn);
        break;
      }
      l->conn_fds.push_back(conn);
      l->readers.emplace_back([conn, l] {
        while (!l->stop.load()) {
          auto frame = read_frame(conn);
          if (!frame) break;
          try {
            if (wire::frame_type(*frame) == wire::MsgType::SlateFetchFwd &&
                l->on_request) {
              std::string reply = l->on_request(*frame);
              if (!write_all(conn, reply.data(), reply.size())) break;
            } else if (l->on_frame) {
              l->on_frame(std::move(*frame));
            }
          } catch (const wire::WireError&) {
            break;  // protocol violation: drop the connection
          }
        }
        bool mine = false;
        {
          std::lock_guard lock(l->conns_mu);
          auto it = std::find(l->conn_fds.begin(), l->conn_fds.end(), conn);
          if (it != l->conn_fds.end()) {
            *it = -1;
            mine = true;
          }
        }
        if (mine) ::close(conn);
      });
    }
  });

  std::lock_guard lock(mu_);
  listeners_[addr] = std::move(listener);
  return true;
}

void TcpTransport::stop_listening(const std::string& addr) {
  std::unique_ptr<Listener> gone;
  {
    std::lock_guard lock(mu_);
    auto it = listeners_.find(addr);
    if (it == listeners_.end()) return;
    gone = std::move(it->second);
    listeners_.erase(it);
  }
  gone.reset();  // joins threads
}

int TcpTransport::connect_to(const std::string& addr) {
  std::string host;
  std::uint16_t port = 0;
  if (!split_addr(addr, host, port)) return -1;

  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);

  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  sa.sin_addr.s_addr =
      host == "localhost" ? inet_addr("127.0.0.1") : inet_addr(host.c_str());
  if (sa.sin_addr.s_addr == INADDR_NONE) {
    ::close(fd);
    return -1;
  }

  int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd pfd{fd, POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(connect_timeout_ms_));
    if (rc == 1) {
      int err = 0;
      socklen_t len = sizeof(err);
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      rc = err == 0 ? 0 : -1;
    } else {
      rc = -1;
    }
  }
  if (rc != 0) {
    ::close(fd);
    return -1;
  }
  ::fcntl(fd, F_SETFL, flags);  // back to blocking for writes
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

bool TcpTransport::send(const std::string& addr, const std::string& frame) {
  std::lock_guard lock(outbound_mu_);
  auto it = outbound_.find(addr);
  int fd = it == outbound_.end() ? -1 : it->second;
  if (fd < 0) {
    fd = connect_to(addr);
    if (fd < 0) return false;
    outbound_[addr] = fd;
  }
  if (write_all(fd, frame.data(), frame.size())) return true;
  // Stale cached connection: retry once on a fresh one.
  ::close(fd);
  outbound_.erase(addr);
  fd = connect_to(addr);
  if (fd < 0) return false;
  if (!write_all(fd, frame.data(), frame.size())) {
    ::close(fd);
    return false;
  }
  outbound_[addr] = fd;
  return true;
}

std::optional<std::string> TcpTransport::request(const std::string& addr,
                                                 const std::string& frame) {
  int fd = connect_to(addr);
  if (fd < 0) return std::nullopt;
  std::optional<std::string> reply;
  if (write_all(fd, frame.data(), frame.size())) reply = read_frame(fd);
  ::close(fd);
  return reply;
}

}  // namespace slateflow
