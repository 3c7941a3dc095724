#pragma once

// Socket transport: every agent endpoint ("host:port") gets its own HTTP
// listener; envelopes arrive as POST /envelope bodies. The listener replies
// 202 as soon as the handler returns — receivers enqueue and process on their
// own worker thread, so two agents posting to each other simultaneously can
// never deadlock on each other's responses.

#include <httplib.h>

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "transport.hpp"

namespace fedtrust {

class HttpTransport : public Transport {
 public:
  ~HttpTransport() override { shutdown(); }

  void attach(const std::string& endpoint, Handler handler) override {
    auto [host, port] = split(endpoint);
    auto listener = std::make_unique<Listener>();
    listener->server = std::make_unique<httplib::Server>();
    listener->server->Post("/envelope",
                           [handler](const httplib::Request& req, httplib::Response& res) {
                             handler(req.body);
                             res.status = 202;
                           });
    if (!listener->server->bind_to_port(host, port))
      throw DeliveryError("cannot bind listener at " + endpoint);
    httplib::Server* srv = listener->server.get();
    listener->thread = std::thread([srv] { srv->listen_after_bind(); });
    listener->server->wait_until_ready();
    std::lock_guard lk(mx_);
    listeners_[endpoint] = std::move(listener);
  }

  void send(const std::string& endpoint, std::string wire) override {
    auto [host, port] = split(endpoint);
    httplib::Client client(host, port);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(5, 0);
    auto res = client.Post("/envelope", wire, "application/json");
    if (!res || res->status != 202)
      throw DeliveryError("post to " + endpoint + " failed" +
                          (res ? " with status " + std::to_string(res->status) : ""));
  }

  bool pump_one() override { return false; }  // push transport: nothing to pump

  void shutdown() {
    std::map<std::string, std::unique_ptr<Listener>> taken;
    {
      std::lock_guard lk(mx_);
      taken.swap(listeners_);
    }
    for (auto& [_, listener] : taken) {
      listener->server->stop();
      if (listener->thread.joinable()) listener->thread.join();
    }
  }

 private:
  struct Listener {
    std::unique_ptr<httplib::Server> server;
    std::thread thread;
  };

  static std::pair<std::string, int> split(const std::string& endpoint) {
    const std::size_t colon = endpoint.rfind(':');
    if (colon == std::string::npos || colon + 1 >= endpoint.size())
      throw ConfigError("endpoint must look like host:port, got " + endpoint);
    try {
      return {endpoint.substr(0, colon), std::stoi(endpoint.substr(colon + 1))};
    } catch (const std::exception&) {
      throw ConfigError("endpoint port is not a number in " + endpoint);
    }
  }

  std::mutex mx_;
  std::map<std::string, std::unique_ptr<Listener>> listeners_;
};

}  // namespace fedtrust
