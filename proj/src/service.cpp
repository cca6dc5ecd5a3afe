#include "llt/service.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "llt/engine.hpp"
#include "llt/errors.hpp"

namespace llt::engine {
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using Response = http::response<http::string_body>;
using Request = http::request<http::string_body>;
using Clock = std::chrono::steady_clock;

Response make_response(const Request& req, http::status st, std::string body,
                       const char* type = "application/json") {
  Response res{st, req.version()};
  res.set(http::field::server, "llt");
  res.set(http::field::content_type, type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response error_response(const Request& req, http::status st, const std::string& kind, const std::string& msg) {
  json j = {{"error", {{"kind", kind}, {"message", msg}}}};
  return make_response(req, st, j.dump());
}

std::string query_param(std::string_view target, std::string_view key) {
  const auto q = target.find('?');
  if (q == std::string_view::npos) return {};
  std::istringstream in{std::string(target.substr(q + 1))};
  std::string part;
  while (std::getline(in, part, '&')) {
    const auto eq = part.find('=');
    if (eq != std::string::npos && std::string_view(part).substr(0, eq) == key) return part.substr(eq + 1);
  }
  return {};
}

const char* mime_type(const std::string& path) {
  auto ends = [&](const char* ext) {
    const std::string e(ext);
    return path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0;
  };
  if (ends(".html")) return "text/html";
  if (ends(".js")) return "text/javascript";
  if (ends(".css")) return "text/css";
  if (ends(".json")) return "application/json";
  if (ends(".svg")) return "image/svg+xml";
  if (ends(".png")) return "image/png";
  return "application/octet-stream";
}

}  // namespace

struct Service::Impl {
  ApparatusConfig cfg;
  ServiceOptions opt;

  // Published state; writers are the stepper only.
  std::mutex snap_mu;
  std::shared_ptr<const std::string> snapshot;
  std::shared_mutex tel_mu;
  std::vector<double> tel_times;
  std::vector<std::string> tel_lines;

  // Serialized command queue feeding the stepper.
  std::mutex q_mu;
  std::condition_variable q_cv;
  std::deque<std::function<void()>> jobs;

  std::unique_ptr<Simulation> sim;
  double speedup = 1.0;
  double anchor_sim = 0.0;
  Clock::time_point anchor_wall;

  asio::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::thread io_thread, stepper_thread;
  std::atomic<bool> stopping{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;
  bool started = false;

  std::shared_ptr<const std::string> current_snapshot() {
    std::lock_guard lk(snap_mu);
    return snapshot;
  }

  void post_job(std::function<void()> fn) {
    {
      std::lock_guard lk(q_mu);
      jobs.push_back(std::move(fn));
    }
    q_cv.notify_one();
  }

  // --- stepper side (only this thread touches `sim`) ---

  void publish() {
    for (const auto& r : sim->take_telemetry()) {
      std::string line = to_jsonl(r);
      std::unique_lock lk(tel_mu);
      tel_times.push_back(r.sim_time);
      tel_lines.push_back(std::move(line));
    }
    auto snap = sim->snapshot();
    snap["speedup"] = speedup;
    auto text = std::make_shared<const std::string>(snap.dump());
    std::lock_guard lk(snap_mu);
    snapshot = std::move(text);
  }

  void reanchor() {
    anchor_sim = sim->time();
    anchor_wall = Clock::now();
  }

  void stepper_loop() {
    const auto tick = std::chrono::milliseconds(10);
    while (!stopping) {
      std::deque<std::function<void()>> batch;
      {
        std::unique_lock lk(q_mu);
        q_cv.wait_for(lk, tick, [&] { return !jobs.empty() || stopping.load(); });
        batch.swap(jobs);
      }
      for (auto& job : batch) job();
      if (stopping) break;
      if (speedup > 0.0) {
        const double wall = std::chrono::duration<double>(Clock::now() - anchor_wall).count();
        const double target = anchor_sim + wall * speedup;
        // Bounded work per tick keeps queued commands responsive; when the
        // model cannot keep up the clock slips instead of bursting.
        const double limit = sim->time() + 0.1 * speedup;
        if (target > sim->time()) {
          try {
            sim->advance_to(std::min(target, limit));
          } catch (const Error& e) {
            std::fprintf(stderr, "llt serve: clock paused: %s\n", e.what());
            speedup = 0.0;
            reanchor();
          }
          if (target > limit) reanchor();
        }
      }
      publish();
    }
  }

  // --- request handling (I/O thread) ---

  using Reply = std::function<void(Response)>;

  void handle(Request req, Reply reply) {
    const std::string target(req.target());
    const std::string path = target.substr(0, target.find('?'));
    if (req.method() == http::verb::options) {
      Response res = make_response(req, http::status::no_content, "");
      res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
      return reply(std::move(res));
    }
    if (path == "/api/state") {
      if (req.method() != http::verb::get)
        return reply(error_response(req, http::status::method_not_allowed, "method_not_allowed", "use GET"));
      auto snap = current_snapshot();
      return reply(make_response(req, http::status::ok, snap ? *snap : "{}"));
    }
    if (path == "/api/telemetry") {
      if (req.method() != http::verb::get)
        return reply(error_response(req, http::status::method_not_allowed, "method_not_allowed", "use GET"));
      double from = 0.0;
      std::size_t limit = 10000;
      try {
        if (auto f = query_param(target, "from"); !f.empty()) from = std::stod(f);
        if (auto l = query_param(target, "limit"); !l.empty()) limit = std::stoul(l);
      } catch (const std::exception&) {
        return reply(error_response(req, http::status::bad_request, "malformed", "from and limit must be numbers"));
      }
      std::string body;
      {
        std::shared_lock lk(tel_mu);
        auto it = std::lower_bound(tel_times.begin(), tel_times.end(), from);
        for (std::size_t k = it - tel_times.begin(), n = 0; k < tel_lines.size() && n < limit; ++k, ++n) {
          body += tel_lines[k];
          body += '\n';
        }
      }
      return reply(make_response(req, http::status::ok, std::move(body), "application/x-ndjson"));
    }
    if (path == "/api/command") {
      if (req.method() != http::verb::post)
        return reply(error_response(req, http::status::method_not_allowed, "method_not_allowed", "use POST"));
      app::DeviceCommand cmd;
      try {
        cmd = parse_command(json::parse(req.body()));
      } catch (const json::parse_error& e) {
        return reply(error_response(req, http::status::bad_request, "malformed", e.what()));
      } catch (const Error& e) {
        return reply(error_response(req, http::status::bad_request, e.kind(), e.what()));
      }
      return post_job([this, req = std::move(req), reply = std::move(reply), cmd] {
        Response res;
        try {
          const auto out = sim->submit(cmd);
          json j = {{"status", out.accepted ? "accepted" : "rejected"},
                    {"accepted", out.accepted},
                    {"reason", out.reason},
                    {"event", out.event},
                    {"sim_time", sim->time()}};
          if (out.result) j["result"] = *out.result;
          res = make_response(req, http::status::ok, j.dump());
        } catch (const Error& e) {
          res = error_response(req, http::status::bad_request, e.kind(), e.what());
        }
        publish();
        reply(std::move(res));
      });
    }
    if (path == "/api/clock") {
      if (req.method() != http::verb::post)
        return reply(error_response(req, http::status::method_not_allowed, "method_not_allowed", "use POST"));
      double x = 0.0;
      try {
        const json j = json::parse(req.body());
        if (!j.is_object() || !j.contains("speedup") || !j["speedup"].is_number())
          return reply(error_response(req, http::status::bad_request, "malformed", "expected {\"speedup\": <number>}"));
        x = j["speedup"].get<double>();
      } catch (const json::parse_error& e) {
        return reply(error_response(req, http::status::bad_request, "malformed", e.what()));
      }
      if (!(x >= 0.0) || !std::isfinite(x))
        return reply(error_response(req, http::status::bad_request, "parameter_out_of_range", "speedup must be >= 0"));
      return post_job([this, req = std::move(req), reply = std::move(reply), x] {
        speedup = x;
        reanchor();
        publish();
        json j = {{"sim_time", sim->time()}, {"speedup", speedup}};
        reply(make_response(req, http::status::ok, j.dump()));
      });
    }
    if (path.rfind("/api/", 0) == 0)
      return reply(error_response(req, http::status::not_found, "not_found", "no endpoint " + path));
    if (!opt.static_dir.empty() && req.method() == http::verb::get && path.find("..") == std::string::npos) {
      const std::string file = opt.static_dir + (path == "/" ? "/index.html" : path);
      std::ifstream in(file, std::ios::binary);
      if (in) {
        std::ostringstream ss;
        ss << in.rdbuf();
        return reply(make_response(req, http::status::ok, ss.str(), mime_type(file)));
      }
    }
    return reply(error_response(req, http::status::not_found, "not_found", "no resource " + path));
  }
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& s, Service::Impl& svc)
      : ws_(std::move(s)), timer_(ws_.get_executor()), svc_(svc) {}

  void run(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->read();
      self->tick();
    });
  }

 private:
  // Client frames are ignored; the pending read notices the close.
  void read() {
    ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->timer_.cancel();
        return;
      }
      self->buf_.consume(self->buf_.size());
      self->read();
    });
  }

  void tick() {
    if (closed_ || svc_.stopping) return;
    frame_ = svc_.current_snapshot();
    if (!frame_) frame_ = std::make_shared<const std::string>("{}");
    ws_.text(true);
    ws_.async_write(asio::buffer(*frame_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        return;
      }
      self->timer_.expires_after(std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(1.0 / self->svc_.cfg.stream_rate)));
      self->timer_.async_wait([self](beast::error_code) { self->tick(); });
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  Service::Impl& svc_;
  beast::flat_buffer buf_;
  std::shared_ptr<const std::string> frame_;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& s, Service::Impl& svc) : stream_(std::move(s)), svc_(svc) {}

  void run() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/api/stream") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), svc_)->run(std::move(req_));
        return;
      }
      return send(error_response(req_, http::status::not_found, "not_found", "websocket endpoint is /api/stream"));
    }
    auto exec = stream_.get_executor();
    svc_.handle(std::move(req_), [self = shared_from_this(), exec](Response res) {
      asio::post(exec, [self, res = std::move(res)]() mutable { self->send(std::move(res)); });
    });
  }

  void send(Response res) {
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (sp->need_eof()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  Service::Impl& svc_;
  beast::flat_buffer buf_;
  Request req_;
};

void accept_loop(Service::Impl& svc) {
  svc.acceptor->async_accept(asio::make_strand(svc.ioc), [&svc](beast::error_code ec, tcp::socket s) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpSession>(std::move(s), svc)->run();
    accept_loop(svc);
  });
}

}  // namespace

Service::Service(ApparatusConfig cfg, ServiceOptions opt) : impl_(std::make_unique<Impl>()) {
  impl_->cfg = std::move(cfg);
  impl_->opt = std::move(opt);
  impl_->sim = std::make_unique<Simulation>(impl_->cfg);
  impl_->speedup = impl_->opt.speedup;
  impl_->publish();
}

Service::~Service() { stop(); }

void Service::start() {
  auto& s = *impl_;
  if (s.started) return;
  beast::error_code ec;
  const auto addr = asio::ip::make_address(s.opt.address, ec);
  if (ec) throw Error("bind_failed", "bad address " + s.opt.address);
  s.acceptor.emplace(s.ioc);
  const tcp::endpoint ep{addr, s.opt.port};
  s.acceptor->open(ep.protocol(), ec);
  if (!ec) s.acceptor->set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) s.acceptor->bind(ep, ec);
  if (!ec) s.acceptor->listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error("bind_failed", "cannot listen on " + s.opt.address + ":" + std::to_string(s.opt.port) + ": " + ec.message());
  s.started = true;
  s.reanchor();
  accept_loop(s);
  s.io_thread = std::thread([&s] { s.ioc.run(); });
  s.stepper_thread = std::thread([&s] { s.stepper_loop(); });
}

void Service::stop() {
  auto& s = *impl_;
  if (!s.started || s.stopping.exchange(true)) return;
  s.q_cv.notify_all();
  if (s.stepper_thread.joinable()) s.stepper_thread.join();
  asio::post(s.ioc, [&s] {
    beast::error_code ec;
    s.acceptor->close(ec);
    s.ioc.stop();
  });
  if (s.io_thread.joinable()) s.io_thread.join();
  {
    std::lock_guard lk(s.stop_mu);
    s.stopped = true;
  }
  s.stop_cv.notify_all();
}

void Service::wait() {
  std::unique_lock lk(impl_->stop_mu);
  impl_->stop_cv.wait(lk, [&] { return impl_->stopped; });
}

unsigned short Service::port() const {
  return impl_->acceptor ? impl_->acceptor->local_endpoint().port() : impl_->opt.port;
}

}  // namespace llt::engine
