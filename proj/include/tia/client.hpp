/**
 * @file client.hpp
 * @brief Client side: command sequence, packet reception, state listening, gap accounting.
 */

#ifndef TIA_CLIENT_HPP_
#define TIA_CLIENT_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tia/control_messages.hpp"
#include "tia/datapacket.hpp"
#include "tia/detail/net.hpp"
#include "tia/error.hpp"
#include "tia/metainfo.hpp"

namespace tia {

/// An Error reply from the server, with its parsed payload.
class ServerError : public Error {
 public:
  explicit ServerError(TiaError error)
      : Error(Errc::kServerError, "server error: " + error.description.value_or("(no description)")),
        error_(std::move(error)) {}

  const TiaError& error() const noexcept { return error_; }

 private:
  TiaError error_;
};

struct ClientOptions {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds command_timeout{5000};
  std::optional<std::chrono::milliseconds> receive_timeout;  ///< unset blocks indefinitely
  /// UDP: bind the returned port and wait for broadcasts instead of sending a hello datagram.
  bool udp_broadcast = false;
  DecodeOptions decode;
};

/**
 * Gap accounting over a set of observed connection packet numbers.
 * sum of (to - from + 1) over gaps == expected_count - received_count.
 */
struct GapReport {
  std::uint64_t expected_count = 0;
  std::uint64_t received_count = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> gaps;  ///< inclusive (missing_from, missing_to)

  std::uint64_t missing() const noexcept { return expected_count - received_count; }

  friend bool operator==(const GapReport&, const GapReport&) = default;
};

/// Gaps within the inclusive range [first, last]. Numbers outside it are an error.
inline GapReport gap_report(std::vector<std::uint64_t> observed, std::uint64_t first, std::uint64_t last) {
  if (first > last) throw Error(Errc::kInvariantViolation, "gap report range is empty");
  std::sort(observed.begin(), observed.end());
  observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
  if (!observed.empty() && (observed.front() < first || observed.back() > last)) {
    throw Error(Errc::kInvariantViolation, "observed packet number outside the report range");
  }
  GapReport report;
  report.expected_count = last - first + 1;
  report.received_count = observed.size();
  std::uint64_t next = first;
  for (const std::uint64_t n : observed) {
    if (n > next) report.gaps.emplace_back(next, n - 1);
    next = n + 1;
  }
  if (observed.empty() || observed.back() < last) report.gaps.emplace_back(next, last);
  return report;
}

/// Gaps between the first and last observed numbers, after sorting and dropping duplicates.
inline GapReport gap_report(std::vector<std::uint64_t> observed) {
  if (observed.empty()) return {};
  const auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
  const std::uint64_t first = *lo;
  const std::uint64_t last = *hi;
  return gap_report(std::move(observed), first, last);
}

/**
 * Streaming gap detection for UDP. A number is held back until `window`
 * later numbers have arrived, so reordering within the window is tolerated.
 * A number arriving after its gap was declared is counted as late and
 * otherwise ignored.
 */
class GapTracker {
 public:
  explicit GapTracker(std::size_t window = 16) : window_(window) {}

  void observe(std::uint64_t n) {
    if (next_ && n < *next_) {
      ++late_;
      return;
    }
    if (!pending_.insert(n).second) return;
    if (!first_) first_ = n;
    first_ = std::min(*first_, n);
    while (pending_.size() > window_) release();
  }

  /// Gaps declared so far; numbers still inside the window are not yet judged.
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& gaps() const noexcept { return gaps_; }
  std::uint64_t late() const noexcept { return late_; }

  /// Flushes the window. If `last` is given, numbers up to it that never arrived are gaps too.
  GapReport finish(std::optional<std::uint64_t> last = std::nullopt) {
    while (!pending_.empty()) release();
    GapReport report;
    if (!first_) return report;
    std::uint64_t end = *next_ - 1;
    if (last && *last > end) {
      gaps_.emplace_back(*next_, *last);
      end = *last;
      next_ = *last + 1;
    }
    report.expected_count = end - *first_ + 1;
    report.received_count = received_;
    report.gaps = gaps_;
    return report;
  }

 private:
  void release() {
    const std::uint64_t n = *pending_.begin();
    pending_.erase(pending_.begin());
    if (next_ && n > *next_) gaps_.emplace_back(*next_, n - 1);
    next_ = n + 1;
    ++received_;
  }

  std::size_t window_;
  std::set<std::uint64_t> pending_;
  std::optional<std::uint64_t> first_;
  std::optional<std::uint64_t> next_;
  std::uint64_t received_ = 0;
  std::uint64_t late_ = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> gaps_;
};

/**
 * One control connection. Commands are issued one at a time and wait for
 * their reply. At most one data connection is negotiated per client.
 */
class Client {
 public:
  /// Throws Error(kIo) if the server refuses, Error(kTimeout) if it does not answer.
  static Client connect(const std::string& host, std::uint16_t port, ClientOptions options = {}) {
    return Client(host, detail::tcp_connect(host, port, options.connect_timeout), options);
  }

  Client(Client&&) noexcept = default;
  Client& operator=(Client&&) noexcept = default;

  const std::string& host() const noexcept { return host_; }
  int control_fd() const noexcept { return control_.get(); }
  int data_fd() const noexcept { return data_.get(); }

  /// Sends one message and returns the reply, whatever its kind.
  ControlMessage request(const ControlMessage& message) {
    detail::send_all(control_.get(), serialize(message));
    return read_reply();
  }

  /// Waits for the next message on the control connection.
  ControlMessage read_reply() {
    const auto deadline = detail::Clock::now() + options_.command_timeout;
    std::array<std::uint8_t, 4096> buf{};
    while (true) {
      if (auto reply = parser_.next()) return std::move(*reply);
      const auto n = detail::recv_some(control_.get(), buf, nullptr, deadline);
      if (!n || *n == 0) throw Error(Errc::kEndOfStream, "control connection closed by server");
      parser_.feed(std::span<const std::uint8_t>(buf.data(), *n));
    }
  }

  void check_protocol_version() { expect<msg::Ok>(request(msg::CheckProtocolVersion{}), "CheckProtocolVersion"); }

  MetaInfo get_metainfo(std::vector<std::string>* warnings = nullptr) {
    const ControlMessage reply = request(msg::GetMetaInfo{});
    metainfo_xml_ = expect<msg::MetaInfo>(reply, "GetMetaInfo").content;
    return parse_metainfo(metainfo_xml_, warnings);
  }

  /// XML content of the last MetaInfo reply.
  const std::string& metainfo_xml() const noexcept { return metainfo_xml_; }

  std::uint16_t get_data_connection(Transport transport) {
    if (data_port_ && transport_ != transport) {
      throw Error(Errc::kProtocolViolation, "a data connection with the other transport is already negotiated");
    }
    const ControlMessage reply = request(msg::GetDataConnection{transport});
    transport_ = transport;
    data_port_ = expect<msg::DataConnectionPort>(reply, "GetDataConnection").port;
    return *data_port_;
  }

  void start() { expect<msg::Ok>(request(msg::StartDataTransmission{}), "StartDataTransmission"); }
  void stop() { expect<msg::Ok>(request(msg::StopDataTransmission{}), "StopDataTransmission"); }

  std::uint16_t get_state_connection() {
    return expect<msg::ServerStateConnectionPort>(request(msg::GetServerStateConnection{}), "GetServerStateConnection")
        .port;
  }

  /// Connects to the negotiated data port (TCP), or opens the UDP socket and sends the hello datagram.
  void open_data_connection() {
    if (!data_port_) throw Error(Errc::kProtocolViolation, "no data connection has been negotiated");
    if (transport_ == Transport::kTcp) {
      data_ = detail::tcp_connect(host_, *data_port_, options_.connect_timeout);
    } else if (options_.udp_broadcast) {
      data_ = detail::udp_socket("0.0.0.0", *data_port_);
    } else {
      open_udp_data(host_, *data_port_);
    }
  }

  /// UDP hello to an explicit endpoint, e.g. a relay in front of the server.
  void open_udp_data(const std::string& host, std::uint16_t port) {
    transport_ = Transport::kUdp;
    data_ = detail::udp_socket("0.0.0.0", 0);
    detail::udp_send_to(data_.get(), {}, detail::resolve_ipv4(host, port));
  }

  /// Receives and decodes one packet. TCP throws kEndOfStream if the stream ends.
  DataPacket receive_packet() {
    if (!data_) throw Error(Errc::kProtocolViolation, "data connection is not open");
    const auto deadline = detail::deadline_after(options_.receive_timeout);
    DataPacket packet;
    if (transport_ == Transport::kTcp) {
      Bytes bytes(kFixedHeaderSize);
      detail::recv_exact(data_.get(), bytes, nullptr, deadline);
      const FixedHeader header = read_fixed_header(bytes, options_.decode);
      bytes.resize(header.packet_size);
      detail::recv_exact(data_.get(), std::span(bytes).subspan(kFixedHeaderSize), nullptr, deadline);
      packet = decode(bytes, options_.decode);
    } else {
      if (udp_buffer_.empty()) udp_buffer_.resize(65536);
      const auto d = detail::udp_recv(data_.get(), udp_buffer_, nullptr, deadline);
      if (d->size > udp_buffer_.size()) throw Error(Errc::kPacketTooLarge, "datagram larger than 64 KiB");
      packet = decode(std::span(udp_buffer_).first(d->size), options_.decode);
    }
    last_connection_packet_number_ = packet.connection_packet_number;
    return packet;
  }

  std::optional<std::uint64_t> last_connection_packet_number() const noexcept {
    return last_connection_packet_number_;
  }

  void close_data() { data_.reset(); }
  void close() {
    data_.reset();
    control_.reset();
  }

 private:
  Client(std::string host, detail::Fd control, ClientOptions options)
      : host_(std::move(host)), control_(std::move(control)), options_(options) {}

  template <typename T>
  static const T& expect(const ControlMessage& reply, std::string_view command) {
    if (const auto* err = reply.get<msg::Error>()) {
      throw ServerError(err->content ? parse_error_xml(*err->content) : TiaError{});
    }
    if (const T* ok = reply.get<T>()) return *ok;
    throw Error(Errc::kProtocolViolation,
                "unexpected reply '" + std::string(command_name(reply.body)) + "' to " + std::string(command));
  }

  std::string host_;
  detail::Fd control_;
  ClientOptions options_;
  MessageParser parser_;
  std::string metainfo_xml_;
  Transport transport_ = Transport::kTcp;
  std::optional<std::uint16_t> data_port_;
  detail::Fd data_;
  Bytes udp_buffer_;
  std::optional<std::uint64_t> last_connection_packet_number_;
};

enum class StateEvent { kRunning, kShutdown };

inline std::string_view to_string(StateEvent e) noexcept {
  return e == StateEvent::kRunning ? "ServerStateRunning" : "ServerStateShutdown";
}

/// Reads state messages from a server state connection. Never writes to it.
class StateListener {
 public:
  static StateListener connect(const std::string& host, std::uint16_t port,
                               std::chrono::milliseconds timeout = std::chrono::milliseconds(5000)) {
    return StateListener(detail::tcp_connect(host, port, timeout));
  }

  /// Next event, or nullopt once the server closed the connection.
  /// A malformed message throws and ends the stream.
  std::optional<StateEvent> next(std::optional<std::chrono::milliseconds> timeout = std::nullopt) {
    if (ended_) return std::nullopt;
    const auto deadline = detail::deadline_after(timeout);
    std::array<std::uint8_t, 1024> buf{};
    while (true) {
      std::optional<ControlMessage> m;
      try {
        m = parser_.next();
      } catch (const Error&) {
        end();
        throw;
      }
      if (m) {
        if (m->is<msg::ServerStateRunning>()) return StateEvent::kRunning;
        if (m->is<msg::ServerStateShutdown>()) return StateEvent::kShutdown;
        end();
        throw Error(Errc::kProtocolViolation,
                    "unexpected '" + std::string(command_name(m->body)) + "' on state connection");
      }
      const auto n = detail::recv_some(fd_.get(), buf, nullptr, deadline);
      if (!n || *n == 0) {
        if (parser_.buffered() != 0) {
          end();
          throw Error(Errc::kEndOfStream, "state connection closed inside a message");
        }
        end();
        return std::nullopt;
      }
      parser_.feed(std::span<const std::uint8_t>(buf.data(), *n));
    }
  }

  bool ended() const noexcept { return ended_; }

 private:
  explicit StateListener(detail::Fd fd) : fd_(std::move(fd)) {}

  void end() {
    ended_ = true;
    fd_.reset();
  }

  detail::Fd fd_;
  MessageParser parser_;
  bool ended_ = false;
};

}  // namespace tia

#endif  // TIA_CLIENT_HPP_
