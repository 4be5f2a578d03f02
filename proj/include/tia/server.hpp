/**
 * @file server.hpp
 * @brief Multi-client server: control sessions, data fan-out, state connections.
 *
 * Threads: one acceptor, one timeline, and per session a control thread plus,
 * once requested, a data sender and a state thread. All shared state is
 * guarded by a single mutex; socket I/O happens outside it.
 *
 * Each tick the timeline encodes one packet and appends it to the queue of
 * every transmitting session. The sender stamps the session's connection
 * packet number (1, 2, ...) into its copy just before sending.
 */

#ifndef TIA_SERVER_HPP_
#define TIA_SERVER_HPP_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tia/control_messages.hpp"
#include "tia/datapacket.hpp"
#include "tia/detail/endian.hpp"
#include "tia/detail/net.hpp"
#include "tia/generator.hpp"
#include "tia/metainfo.hpp"
#include "tia/server_config.hpp"
#include "tia/session.hpp"

namespace tia {

struct ServerStats {
  std::uint64_t packets_generated = 0;
  std::uint64_t packets_dropped = 0;  ///< realtime pacing only
  std::size_t sessions = 0;
};

class Server {
 public:
  /// Validates `config`, binds the control port and starts serving.
  /// Throws Error(kConfig) for an unusable config, Error(kIo) if binding fails.
  static std::unique_ptr<Server> run(ServerConfig config) {
    validate(config);
    std::unique_ptr<Server> server(new Server(std::move(config)));
    server->start();
    return server;
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { shutdown(); }

  std::uint16_t control_port() const noexcept { return control_port_; }
  const std::string& metainfo_xml() const noexcept { return metainfo_xml_; }
  const ServerConfig& config() const noexcept { return config_; }

  ServerStats stats() const {
    std::lock_guard lk(mu_);
    return {generated_, dropped_, sessions_.size()};
  }

  /**
   * Sends ServerStateShutdown on every state connection, stops the timeline,
   * waits the configured grace period, then closes data, state and control
   * sockets. Calling it again does nothing.
   */
  void shutdown() {
    std::lock_guard once(shutdown_mu_);
    if (shut_down_) return;
    shut_down_ = true;

    std::vector<std::shared_ptr<Session>> sessions;
    {
      std::lock_guard lk(mu_);
      shutting_down_ = true;
      sessions = sessions_;
    }
    for (const auto& s : sessions) s->state_wake.set();
    {
      std::unique_lock lk(mu_);
      state_cv_.wait(lk, [&] {
        for (const auto& s : sessions) {
          if (s->state_started && !s->state_done) return false;
        }
        return true;
      });
      stopping_ = true;
    }
    timeline_cv_.notify_all();
    if (timeline_thread_.joinable()) timeline_thread_.join();

    std::this_thread::sleep_for(config_.shutdown_grace);

    stop_.set();
    if (acceptor_thread_.joinable()) acceptor_thread_.join();
    {
      std::lock_guard lk(mu_);
      sessions = sessions_;
    }
    for (const auto& s : sessions) close_session(*s);
    for (const auto& s : sessions) {
      if (s->control_thread.joinable()) s->control_thread.join();
    }
    {
      std::lock_guard lk(mu_);
      sessions_.clear();
    }
    listener_.reset();
    log(LogLevel::kInfo, "server stopped");
  }

 private:
  struct Session {
    std::uint64_t id = 0;
    std::string peer;
    detail::Fd control;
    detail::WakeEvent wake;        // session end or server stop
    detail::WakeEvent state_wake;  // session end or server shutdown

    // Guarded by Server::mu_.
    ClientSession state;
    std::deque<std::shared_ptr<const Bytes>> queue;
    std::condition_variable queue_cv;
    bool closing = false;
    bool data_broken = false;
    bool state_started = false;
    bool state_done = false;

    detail::Fd data_listener;  // TCP
    detail::Fd data_socket;    // UDP
    detail::Fd state_listener;
    std::uint64_t sent = 0;  // sender thread only

    std::thread control_thread;
    std::thread sender_thread;
    std::thread state_thread;
    std::atomic<bool> finished{false};
  };

  class SocketServices final : public SessionServices {
   public:
    SocketServices(Server& server, Session& session) : server_(server), session_(session) {}

    std::uint16_t open_data_connection(Transport transport) override {
      std::lock_guard lk(server_.mu_);
      if (server_.shutting_down_) throw Error(Errc::kServerError, "server is shutting down");
      const ServerConfig& cfg = server_.config_;
      std::uint16_t port = 0;
      if (transport == Transport::kTcp) {
        session_.data_listener = detail::tcp_listen(cfg.bind_address, 0, 1);
        port = detail::local_port(session_.data_listener.get());
      } else {
        session_.data_socket = detail::udp_socket(cfg.bind_address, 0);
        port = cfg.udp_mode == UdpMode::kBroadcast ? cfg.udp_broadcast_port
                                                   : detail::local_port(session_.data_socket.get());
      }
      session_.sender_thread = std::thread(&Server::sender_loop, &server_, std::ref(session_), transport);
      return port;
    }

    std::uint16_t open_state_connection() override {
      std::lock_guard lk(server_.mu_);
      if (server_.shutting_down_) throw Error(Errc::kServerError, "server is shutting down");
      session_.state_listener = detail::tcp_listen(server_.config_.bind_address, 0, 4);
      const std::uint16_t port = detail::local_port(session_.state_listener.get());
      session_.state_started = true;
      session_.state_thread = std::thread(&Server::state_loop, &server_, std::ref(session_));
      return port;
    }

   private:
    Server& server_;
    Session& session_;
  };

  explicit Server(ServerConfig config) : config_(std::move(config)) {}

  void start() {
    metainfo_xml_ = serialize_metainfo(config_.metainfo);
    listener_ = detail::tcp_listen(config_.bind_address, config_.control_port);
    control_port_ = detail::local_port(listener_.get());
    start_time_ = detail::Clock::now();
    timeline_thread_ = std::thread(&Server::timeline_loop, this);
    acceptor_thread_ = std::thread(&Server::acceptor_loop, this);
    log(LogLevel::kInfo, "listening on " + config_.bind_address + ":" + std::to_string(control_port_));
  }

  void log(LogLevel level, const std::string& text) const {
    if (config_.logger) config_.logger(level, text);
  }

  void acceptor_loop() {
    std::uint64_t next_id = 0;
    while (!stop_.is_set()) {
      detail::Fd conn;
      try {
        conn = detail::tcp_accept(listener_, &stop_, detail::Clock::now() + std::chrono::milliseconds(200));
      } catch (const Error& e) {
        log(LogLevel::kError, std::string("accept failed: ") + e.what());
      }
      reap_sessions();
      if (!conn) continue;
      auto session = std::make_shared<Session>();
      session->id = ++next_id;
      session->state.session_id = session->id;
      session->peer = detail::peer_name(conn.get());
      session->control = std::move(conn);
      log(LogLevel::kInfo, "session " + std::to_string(session->id) + " accepted from " + session->peer);
      std::lock_guard lk(mu_);
      sessions_.push_back(session);
      session->control_thread = std::thread(&Server::control_loop, this, session);
    }
  }

  void reap_sessions() {
    std::vector<std::shared_ptr<Session>> done;
    {
      std::lock_guard lk(mu_);
      for (auto it = sessions_.begin(); it != sessions_.end();) {
        if ((*it)->finished) {
          done.push_back(*it);
          it = sessions_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (const auto& s : done) {
      if (s->control_thread.joinable()) s->control_thread.join();
    }
  }

  void control_loop(std::shared_ptr<Session> session) {
    Session& s = *session;
    const std::string tag = "session " + std::to_string(s.id) + ": ";
    MessageParser parser;
    SocketServices services(*this, s);
    std::array<std::uint8_t, 4096> buf{};
    try {
      bool open = true;
      while (open) {
        const auto n = detail::recv_some(s.control.get(), buf, &s.wake, std::nullopt);
        if (!n || *n == 0) break;
        parser.feed(std::span<const std::uint8_t>(buf.data(), *n));
        while (open) {
          std::optional<ControlMessage> command;
          try {
            command = parser.next();
          } catch (const Error& e) {
            log(LogLevel::kWarn, tag + "bad message: " + e.what());
            detail::send_all(s.control.get(), serialize(make_error_reply(e.what())));
            if (parser.poisoned()) open = false;
            continue;
          }
          if (!command) break;
          ClientSession snapshot;
          {
            std::lock_guard lk(mu_);
            snapshot = s.state;
          }
          CommandResult result = handle_command(snapshot, *command, metainfo_xml_, services);
          {
            std::lock_guard lk(mu_);
            s.state = result.session;
          }
          timeline_cv_.notify_all();
          std::string line = tag + std::string(command_name(command->body)) + " -> " +
                             std::string(command_name(result.reply.body));
          if (const auto* err = result.reply.get<msg::Error>(); err != nullptr && err->content) {
            line += " (" + parse_error_xml(*err->content).description.value_or("") + ")";
          }
          log(LogLevel::kInfo, line);
          detail::send_all(s.control.get(), serialize(result.reply));
        }
      }
    } catch (const Error& e) {
      log(LogLevel::kWarn, tag + e.what());
    }
    close_session(s);
    if (s.sender_thread.joinable()) s.sender_thread.join();
    if (s.state_thread.joinable()) s.state_thread.join();
    log(LogLevel::kInfo, tag + "closed");
    s.finished = true;
  }

  void close_session(Session& s) {
    {
      std::lock_guard lk(mu_);
      s.closing = true;
      s.state.transmitting = false;
      s.queue.clear();
    }
    s.queue_cv.notify_all();
    timeline_cv_.notify_all();
    s.wake.set();
    s.state_wake.set();
  }

  void sender_loop(Session& s, Transport transport) {
    try {
      detail::Fd conn;
      int out = -1;
      sockaddr_in dest{};
      if (transport == Transport::kTcp) {
        conn = detail::tcp_accept(s.data_listener, &s.wake);
        if (!conn) return;
        s.data_listener.reset();
        out = conn.get();
      } else {
        out = s.data_socket.get();
        if (config_.udp_mode == UdpMode::kBroadcast) {
          const int one = 1;
          ::setsockopt(out, SOL_SOCKET, SO_BROADCAST, &one, sizeof one);
          dest = detail::resolve_ipv4(config_.udp_broadcast_address, config_.udp_broadcast_port);
        } else {
          std::array<std::uint8_t, 512> hello{};
          const auto d = detail::udp_recv(out, hello, &s.wake, std::nullopt);
          if (!d) return;
          dest = d->from;
        }
      }
      log(LogLevel::kInfo, "session " + std::to_string(s.id) + ": data connection ready");
      while (true) {
        std::shared_ptr<const Bytes> packet;
        {
          std::unique_lock lk(mu_);
          s.queue_cv.wait(lk, [&] { return s.closing || !s.queue.empty(); });
          if (s.closing) return;
          packet = std::move(s.queue.front());
          s.queue.pop_front();
        }
        timeline_cv_.notify_all();
        Bytes bytes = *packet;
        detail::store_le<std::uint64_t>(bytes, offsets::kConnectionPacketNumber, ++s.sent);
        if (transport == Transport::kTcp) {
          if (!detail::send_all(out, bytes, s.wake)) return;
        } else {
          detail::udp_send_to(out, bytes, dest);
        }
      }
    } catch (const Error& e) {
      log(LogLevel::kWarn, "session " + std::to_string(s.id) + ": data connection failed: " + e.what());
      {
        std::lock_guard lk(mu_);
        s.data_broken = true;
        s.queue.clear();
      }
      timeline_cv_.notify_all();
    }
  }

  void state_loop(Session& s) {
    std::vector<detail::Fd> conns;
    const auto send_to_all = [&](const ControlMessage& m) {
      const std::string bytes = serialize(m);
      for (auto& c : conns) {
        if (!c) continue;
        try {
          detail::send_all(c.get(), bytes);
        } catch (const Error&) {
          c.reset();
        }
      }
    };
    std::optional<detail::Clock::time_point> heartbeat;
    if (config_.state_heartbeat_interval) heartbeat = detail::Clock::now() + *config_.state_heartbeat_interval;
    try {
      while (true) {
        const auto r = detail::wait_for(s.state_listener.get(), POLLIN, &s.state_wake, heartbeat);
        if (r == detail::WaitResult::kWoken) break;
        if (r == detail::WaitResult::kTimeout) {
          send_to_all(msg::ServerStateRunning{});
          *heartbeat += *config_.state_heartbeat_interval;
          continue;
        }
        detail::Fd conn = detail::tcp_accept(s.state_listener, &s.state_wake, detail::Clock::now());
        if (!conn) continue;
        try {
          detail::send_all(conn.get(), serialize(msg::ServerStateRunning{}));
          conns.push_back(std::move(conn));
        } catch (const Error&) {
        }
      }
    } catch (const Error& e) {
      log(LogLevel::kWarn, "session " + std::to_string(s.id) + ": state connection failed: " + e.what());
    }
    bool shutting_down = false;
    {
      std::lock_guard lk(mu_);
      shutting_down = shutting_down_;
    }
    if (shutting_down) send_to_all(msg::ServerStateShutdown{});
    {
      std::lock_guard lk(mu_);
      s.state_done = true;
    }
    state_cv_.notify_all();
  }

  // Caller holds mu_.
  std::vector<Session*> recipients() const {
    std::vector<Session*> out;
    for (const auto& s : sessions_) {
      if (s->state.transmitting && !s->data_broken && !s->closing) out.push_back(s.get());
    }
    return out;
  }

  // Caller holds mu_.
  bool lockstep_ready() const {
    const auto r = recipients();
    if (r.empty()) return false;
    for (const Session* s : r) {
      if (s->queue.size() >= config_.queue_capacity) return false;
    }
    return true;
  }

  void timeline_loop() {
    const MasterSignal& master = *config_.metainfo.master_signal;
    const std::chrono::duration<double> interval(static_cast<double>(master.block_size) /
                                                 static_cast<double>(master.sampling_rate));
    std::uint64_t tick = 0;
    std::unique_lock lk(mu_);
    while (!stopping_) {
      if (config_.pacing == Pacing::kRealtime) {
        const auto due =
            start_time_ + std::chrono::duration_cast<detail::Clock::duration>(interval * static_cast<double>(tick + 1));
        if (timeline_cv_.wait_until(lk, due, [&] { return stopping_; })) break;
        if (recipients().empty()) {
          ++tick;
          continue;
        }
      } else {
        timeline_cv_.wait(lk, [&] { return stopping_ || lockstep_ready(); });
        if (stopping_) break;
      }
      const std::uint64_t packet_id = ++generated_;
      lk.unlock();
      DataPacket packet = generate_tick(config_.sources, config_.metainfo, tick, packet_id);
      if (config_.timestamps == TimestampClock::kWall) {
        packet.timestamp_micros = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::microseconds>(detail::Clock::now() - start_time_).count());
      }
      auto bytes = std::make_shared<const Bytes>(encode(packet));
      lk.lock();
      for (Session* s : recipients()) {
        if (s->queue.size() >= config_.queue_capacity) {
          ++dropped_;
          continue;
        }
        s->queue.push_back(bytes);
        s->queue_cv.notify_all();
      }
      ++tick;
    }
  }

  ServerConfig config_;
  std::string metainfo_xml_;
  detail::Fd listener_;
  std::uint16_t control_port_ = 0;
  detail::Clock::time_point start_time_;
  detail::WakeEvent stop_;

  mutable std::mutex mu_;
  std::condition_variable timeline_cv_;
  std::condition_variable state_cv_;
  std::vector<std::shared_ptr<Session>> sessions_;
  bool shutting_down_ = false;
  bool stopping_ = false;
  std::uint64_t generated_ = 0;
  std::uint64_t dropped_ = 0;

  std::mutex shutdown_mu_;
  bool shut_down_ = false;
  std::thread timeline_thread_;
  std::thread acceptor_thread_;
};

}  // namespace tia

#endif  // TIA_SERVER_HPP_
