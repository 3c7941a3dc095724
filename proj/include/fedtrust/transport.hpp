#pragma once

// Transport abstraction. Envelopes travel as opaque wire strings between named
// endpoints. The in-memory bus queues globally and delivers strictly in send
// order, one envelope per pump, which makes whole scenario runs replayable;
// an interceptor hook lets tests tamper with envelopes in flight.

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "errors.hpp"

namespace fedtrust {

class Transport {
 public:
  using Handler = std::function<void(const std::string&)>;

  virtual ~Transport() = default;

  // Registers the receiver for an endpoint. One handler per endpoint.
  virtual void attach(const std::string& endpoint, Handler handler) = 0;

  // Queues (or posts) one wire string towards an endpoint. Throws
  // DeliveryError when the endpoint is unreachable.
  virtual void send(const std::string& endpoint, std::string wire) = 0;

  // Delivers the next pending envelope, if any. Returns whether anything was
  // delivered. Push-style transports have nothing to pump and return false.
  virtual bool pump_one() = 0;
};

class InMemoryBus : public Transport {
 public:
  // May rewrite an envelope in flight (tamper injection for tests). Returning
  // the input unchanged is the identity behaviour.
  using Interceptor = std::function<std::string(const std::string& endpoint,
                                                const std::string& wire)>;

  void attach(const std::string& endpoint, Handler handler) override {
    std::lock_guard lk(mx_);
    handlers_[endpoint] = std::move(handler);
  }

  void send(const std::string& endpoint, std::string wire) override {
    std::lock_guard lk(mx_);
    if (!handlers_.contains(endpoint))
      throw DeliveryError("no receiver attached at " + endpoint);
    queue_.emplace_back(endpoint, std::move(wire));
  }

  bool pump_one() override {
    std::pair<std::string, std::string> item;
    Handler handler;
    {
      std::lock_guard lk(mx_);
      if (queue_.empty()) return false;
      item = std::move(queue_.front());
      queue_.pop_front();
      if (interceptor_) item.second = interceptor_(item.first, item.second);
      handler = handlers_.at(item.first);
    }
    handler(item.second);  // outside the lock: handlers send too
    return true;
  }

  void set_interceptor(Interceptor fn) {
    std::lock_guard lk(mx_);
    interceptor_ = std::move(fn);
  }

  std::size_t pending() const {
    std::lock_guard lk(mx_);
    return queue_.size();
  }

 private:
  mutable std::mutex mx_;
  std::map<std::string, Handler> handlers_;
  std::deque<std::pair<std::string, std::string>> queue_;
  Interceptor interceptor_;
};

}  // namespace fedtrust
