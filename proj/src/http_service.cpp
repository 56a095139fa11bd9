#include "slateflow/http_service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace slateflow {

std::string status_json(NodeEngine& engine, std::uint64_t epoch) {
  auto s = engine.stats();
  json j{{"queue_lengths", s.queue_lengths},
         {"largest_queue", s.largest_queue},
         {"events_processed", s.events_processed},
         {"events_dropped", s.events_lost},
         {"slates_cached", s.slates_cached},
         {"epoch", epoch}};
  return j.dump();
}

struct HttpService::Impl {
  httplib::Server server;
};

HttpService::HttpService(ClusterNode& node, const std::string& host,
                         std::uint16_t port)
    : impl_(std::make_unique<Impl>()), node_(node), host_(host), port_(port) {
  auto& svr = impl_->server;

  svr.Get(R"(/slates/([^/]+)/(.+))",
          [this](const httplib::Request& req, httplib::Response& res) {
            SlateKey sk{req.matches[1].str(), req.matches[2].str()};
            auto out = node_.fetch(sk);
            switch (out.status) {
              case ClusterNode::FetchOutcome::Status::Found:
                res.status = 200;
                res.set_content(out.body, "application/octet-stream");
                break;
              case ClusterNode::FetchOutcome::Status::NotFound:
                res.status = 404;
                break;
              case ClusterNode::FetchOutcome::Status::Unreachable:
                res.status = 502;
                res.set_content(out.detail, "text/plain");
                break;
              case ClusterNode::FetchOutcome::Status::Error:
                res.status = 502;
                res.set_content(out.detail, "text/plain");
                break;
            }
          });

  svr.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
    res.status = 200;
    res.set_content(status_json(node_.engine(), node_.epoch()),
                    "application/json");
  });
}

HttpService::~HttpService() { stop(); }

bool HttpService::start() {
  auto& svr = impl_->server;
  if (!svr.bind_to_port(host_, port_)) return false;
  server_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return true;
}

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace slateflow
