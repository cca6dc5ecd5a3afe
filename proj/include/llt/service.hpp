#pragma once

#include <memory>
#include <string>

#include "llt/config.hpp"

namespace llt::engine {

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  double speedup = 1.0;
  std::string static_dir;  // optional console bundle served under /
};

// HTTP + WebSocket front end for one simulation instance. A single stepper
// thread owns the Simulation; requests reach it through a serialized queue
// and readers only ever see published, immutable snapshots.
class Service {
 public:
  Service(ApparatusConfig cfg, ServiceOptions opt);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and spawns the I/O and stepper threads. Throws Error("bind_failed").
  void start();
  void stop();
  void wait();  // until stop() is called from another thread or a signal

  unsigned short port() const;

  struct Impl;  // shared with the session types in service.cpp

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace llt::engine
