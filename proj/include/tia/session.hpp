/**
 * @file session.hpp
 * @brief Per-control-connection command handling, independent of any socket.
 */

#ifndef TIA_SESSION_HPP_
#define TIA_SESSION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "tia/control_messages.hpp"
#include "tia/error.hpp"

namespace tia {

struct DataTransport {
  Transport transport = Transport::kTcp;
  std::uint16_t port = 0;

  friend bool operator==(const DataTransport&, const DataTransport&) = default;
};

struct ClientSession {
  std::uint64_t session_id = 0;
  std::optional<DataTransport> data;  ///< at most one data connection per session
  std::optional<std::uint16_t> state_port;
  bool transmitting = false;
  std::uint64_t connection_packet_number = 0;  ///< last number sent; the first packet is 1

  friend bool operator==(const ClientSession&, const ClientSession&) = default;
};

/// Side effects a command may need. The server binds real sockets; tests substitute fakes.
class SessionServices {
 public:
  virtual ~SessionServices() = default;
  /// Opens a data endpoint for this session and returns its port.
  virtual std::uint16_t open_data_connection(Transport transport) = 0;
  /// Opens the server state endpoint for this session and returns its port.
  virtual std::uint16_t open_state_connection() = 0;
};

struct CommandResult {
  ControlMessage reply;
  ClientSession session;
};

/**
 * Applies one client command to a session. Every outcome, including refusal,
 * is a reply message; this function never throws for protocol-level problems.
 *
 * Start requires an allocated data connection and is refused while already
 * transmitting; Stop is refused while not transmitting. A repeated
 * GetDataConnection for the same transport returns the already allocated port.
 */
inline CommandResult handle_command(ClientSession session, const ControlMessage& command,
                                    std::string_view metainfo_xml, SessionServices& services) {
  const auto refuse = [&](std::string description) {
    return CommandResult{make_error_reply(std::move(description)), session};
  };

  if (command.is<msg::CheckProtocolVersion>()) return {msg::Ok{}, session};

  if (command.is<msg::GetMetaInfo>()) return {msg::MetaInfo{std::string(metainfo_xml)}, session};

  if (const auto* get = command.get<msg::GetDataConnection>()) {
    if (session.data) {
      if (session.data->transport != get->transport) {
        return refuse("a " + std::string(to_string(session.data->transport)) +
                      " data connection is already allocated for this session");
      }
      return {msg::DataConnectionPort{session.data->port}, session};
    }
    try {
      const std::uint16_t port = services.open_data_connection(get->transport);
      session.data = DataTransport{get->transport, port};
      return {msg::DataConnectionPort{port}, session};
    } catch (const Error& e) {
      return refuse(std::string("cannot open data connection: ") + e.what());
    }
  }

  if (command.is<msg::StartDataTransmission>()) {
    if (!session.data) return refuse("no data connection has been requested");
    if (session.transmitting) return refuse("data transmission is already running");
    session.transmitting = true;
    return {msg::Ok{}, session};
  }

  if (command.is<msg::StopDataTransmission>()) {
    if (!session.transmitting) return refuse("data transmission is not running");
    session.transmitting = false;
    return {msg::Ok{}, session};
  }

  if (command.is<msg::GetServerStateConnection>()) {
    if (session.state_port) return {msg::ServerStateConnectionPort{*session.state_port}, session};
    try {
      const std::uint16_t port = services.open_state_connection();
      session.state_port = port;
      return {msg::ServerStateConnectionPort{port}, session};
    } catch (const Error& e) {
      return refuse(std::string("cannot open server state connection: ") + e.what());
    }
  }

  return refuse("'" + std::string(command_name(command.body)) + "' is not a client command");
}

}  // namespace tia

#endif  // TIA_SESSION_HPP_
