/**
 * @file control_messages.hpp
 * @brief Line-structured control and server-state messages.
 *
 * A message is a version line, a command line, an optional Content-Length
 * line, an empty line, and then exactly Content-Length bytes of UTF-8 XML.
 * Every line ends with a single 0x0A byte:
 *
 *   TiA 1.0\n
 *   Error\n
 *   Content-Length: 73\n
 *   \n
 *   <tiaError version="1.0" description="Human readable error description."/>
 *
 * The serializer always emits this canonical form. The parser additionally
 * tolerates trailing spaces and CR before each LF.
 */

#ifndef TIA_CONTROL_MESSAGES_HPP_
#define TIA_CONTROL_MESSAGES_HPP_

#include <charconv>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "tia/detail/xml.hpp"
#include "tia/error.hpp"

namespace tia {

inline constexpr std::string_view kProtocolVersion = "1.0";
inline constexpr std::size_t kDefaultMaxContentLength = 4u * 1024u * 1024u;

enum class Transport { kTcp, kUdp };

constexpr std::string_view to_string(Transport t) noexcept { return t == Transport::kTcp ? "TCP" : "UDP"; }

namespace msg {

// client -> server commands
struct CheckProtocolVersion {
  friend bool operator==(const CheckProtocolVersion&, const CheckProtocolVersion&) = default;
};
struct GetMetaInfo {
  friend bool operator==(const GetMetaInfo&, const GetMetaInfo&) = default;
};
struct GetDataConnection {
  Transport transport = Transport::kTcp;
  friend bool operator==(const GetDataConnection&, const GetDataConnection&) = default;
};
struct StartDataTransmission {
  friend bool operator==(const StartDataTransmission&, const StartDataTransmission&) = default;
};
struct StopDataTransmission {
  friend bool operator==(const StopDataTransmission&, const StopDataTransmission&) = default;
};
struct GetServerStateConnection {
  friend bool operator==(const GetServerStateConnection&, const GetServerStateConnection&) = default;
};

// server -> client replies
struct Ok {
  friend bool operator==(const Ok&, const Ok&) = default;
};
struct Error {
  std::optional<std::string> content;  ///< tiaError XML, absent when there is no description
  friend bool operator==(const Error&, const Error&) = default;
};
struct MetaInfo {
  std::string content;  ///< tiaMetaInfo XML
  friend bool operator==(const MetaInfo&, const MetaInfo&) = default;
};
struct DataConnectionPort {
  std::uint16_t port = 0;
  friend bool operator==(const DataConnectionPort&, const DataConnectionPort&) = default;
};
struct ServerStateConnectionPort {
  std::uint16_t port = 0;
  friend bool operator==(const ServerStateConnectionPort&, const ServerStateConnectionPort&) = default;
};

// server -> client on the state connection; never answered
struct ServerStateRunning {
  friend bool operator==(const ServerStateRunning&, const ServerStateRunning&) = default;
};
struct ServerStateShutdown {
  friend bool operator==(const ServerStateShutdown&, const ServerStateShutdown&) = default;
};

}  // namespace msg

using MessageBody =
    std::variant<msg::CheckProtocolVersion, msg::GetMetaInfo, msg::GetDataConnection, msg::StartDataTransmission,
                 msg::StopDataTransmission, msg::GetServerStateConnection, msg::Ok, msg::Error, msg::MetaInfo,
                 msg::DataConnectionPort, msg::ServerStateConnectionPort, msg::ServerStateRunning,
                 msg::ServerStateShutdown>;

struct ControlMessage {
  std::string version{kProtocolVersion};
  MessageBody body;

  ControlMessage() = default;
  template <typename Body, typename = std::enable_if_t<std::is_constructible_v<MessageBody, Body&&>>>
  ControlMessage(Body&& b) : body(std::forward<Body>(b)) {}  // NOLINT(google-explicit-constructor)

  template <typename T>
  bool is() const noexcept {
    return std::holds_alternative<T>(body);
  }
  template <typename T>
  const T* get() const noexcept {
    return std::get_if<T>(&body);
  }

  /// True for the six commands a client may send on a control connection.
  bool is_command() const noexcept { return body.index() <= 5; }

  friend bool operator==(const ControlMessage&, const ControlMessage&) = default;
};

/// Command line token of a message, e.g. "GetDataConnection".
inline std::string_view command_name(const MessageBody& body) noexcept {
  static constexpr std::string_view kNames[] = {
      "CheckProtocolVersion",     "GetMetaInfo", "GetDataConnection", "StartDataTransmission",
      "StopDataTransmission",     "GetServerStateConnection", "OK", "Error", "MetaInfo",
      "DataConnectionPort",       "ServerStateConnectionPort", "ServerStateRunning", "ServerStateShutdown"};
  return kNames[body.index()];
}

// ---------------------------------------------------------------------------
// tiaError payload
// ---------------------------------------------------------------------------

struct TiaError {
  std::optional<std::string> description;

  friend bool operator==(const TiaError&, const TiaError&) = default;
};

inline std::string serialize_error_xml(const TiaError& err) {
  std::string out = "<tiaError version=\"1.0\"";
  if (err.description) out += " description=\"" + detail::escape_attribute(*err.description) + "\"";
  out += "/>";
  return out;
}

inline TiaError parse_error_xml(std::string_view xml) {
  const detail::XmlElement root = detail::parse_xml(xml);
  if (root.name != "tiaError") {
    throw Error(Errc::kSchemaViolation, "expected root element tiaError, found " + root.name);
  }
  const std::string* version = root.attribute("version");
  if (version == nullptr) throw Error(Errc::kVersionMismatch, "tiaError has no version attribute");
  if (*version != kProtocolVersion) {
    throw Error(Errc::kVersionMismatch, "tiaError version " + *version + " is not 1.0");
  }
  TiaError err;
  if (const std::string* d = root.attribute("description")) err.description = *d;
  return err;
}

/// Error reply for `err`; an error without description carries no content block.
inline msg::Error make_error_reply(const TiaError& err) {
  msg::Error reply;
  if (err.description) reply.content = serialize_error_xml(err);
  return reply;
}

inline msg::Error make_error_reply(std::string description) {
  return make_error_reply(TiaError{std::move(description)});
}

// ---------------------------------------------------------------------------
// serializer
// ---------------------------------------------------------------------------

namespace detail {

inline void check_port(std::uint32_t port) {
  if (port == 0 || port > 65535) {
    throw Error(Errc::kInvariantViolation, "port " + std::to_string(port) + " is outside 1..65535");
  }
}

}  // namespace detail

inline std::string serialize(const ControlMessage& m) {
  if (m.version != kProtocolVersion) {
    throw Error(Errc::kUnsupportedVersion, "protocol version " + m.version + " is not supported");
  }
  std::string out = "TiA 1.0\n";
  out += command_name(m.body);
  const std::string* content = nullptr;
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, msg::GetDataConnection>) {
          out += ": ";
          out += to_string(b.transport);
        } else if constexpr (std::is_same_v<T, msg::DataConnectionPort> ||
                             std::is_same_v<T, msg::ServerStateConnectionPort>) {
          detail::check_port(b.port);
          out += ": " + std::to_string(b.port);
        } else if constexpr (std::is_same_v<T, msg::Error>) {
          if (b.content) content = &*b.content;
        } else if constexpr (std::is_same_v<T, msg::MetaInfo>) {
          content = &b.content;
        }
      },
      m.body);
  out += '\n';
  if (content != nullptr) out += "Content-Length: " + std::to_string(content->size()) + "\n";
  out += '\n';
  if (content != nullptr) out += *content;
  return out;
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

struct ParseOptions {
  std::size_t max_content_length = kDefaultMaxContentLength;
  std::size_t max_header_bytes = 8 * 1024;
  /// Skip unknown description lines instead of rejecting them.
  bool lenient_headers = false;
};

/**
 * Incremental parser. Bytes are pushed with feed() and complete messages are
 * pulled with next(). A message whose header block is complete but invalid is
 * consumed before the error is thrown, so the stream stays usable. Errors that
 * leave the stream position unknown (oversized header or content) are sticky.
 */
class MessageParser {
 public:
  explicit MessageParser(ParseOptions options = {}) : options_(options) {}

  void feed(std::string_view bytes) { buffer_.append(bytes); }
  void feed(std::span<const std::uint8_t> bytes) {
    buffer_.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }

  /// Bytes received but not yet consumed by a complete message.
  std::size_t buffered() const noexcept { return buffer_.size(); }

  /// True once a framing error has made the stream unusable.
  bool poisoned() const noexcept { return poisoned_; }

  std::optional<ControlMessage> next() {
    if (poisoned_) throw Error(poison_code_, "control stream is unusable after an earlier framing error");

    // Header block: everything up to and including the empty line.
    std::size_t line_start = 0;
    std::vector<std::string_view> lines;
    std::size_t header_end = std::string::npos;
    while (true) {
      const std::size_t lf = buffer_.find('\n', line_start);
      if (lf == std::string::npos) {
        if (buffer_.size() > options_.max_header_bytes) poison(Errc::kLineTooLong, "message header exceeds limit");
        return std::nullopt;
      }
      std::string_view line(buffer_.data() + line_start, lf - line_start);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
      line_start = lf + 1;
      if (line_start > options_.max_header_bytes) poison(Errc::kLineTooLong, "message header exceeds limit");
      // A blank line ends the header, but only once version and command lines are present.
      if (line.empty() && lines.size() >= 2) {
        header_end = line_start;
        break;
      }
      lines.push_back(line);
      if (lines.size() == 2 && line.empty()) {
        consume(line_start);
        throw Error(Errc::kUnknownCommand, "empty command line");
      }
    }

    Header h;
    try {
      h = parse_header(lines);
    } catch (const Error& e) {
      if (e.code() == Errc::kBadContentLength && too_large_) poison(e.code(), e.what());
      consume(header_end);
      throw;
    }

    const std::size_t total = header_end + h.content_length.value_or(0);
    if (buffer_.size() < total) return std::nullopt;
    std::optional<ControlMessage> result;
    try {
      result = build(h, buffer_.substr(header_end, h.content_length.value_or(0)));
    } catch (const Error&) {
      consume(total);
      throw;
    }
    consume(total);
    return result;
  }

 private:
  struct Header {
    std::string_view command;
    std::optional<std::string_view> argument;
    std::optional<std::size_t> content_length;
  };

  [[noreturn]] void poison(Errc code, const std::string& what) {
    poisoned_ = true;
    poison_code_ = code;
    throw Error(code, what);
  }

  void consume(std::size_t n) { buffer_.erase(0, n); }

  Header parse_header(const std::vector<std::string_view>& lines) {
    too_large_ = false;
    if (lines[0] != "TiA 1.0") {
      throw Error(Errc::kBadVersionLine, "expected version line 'TiA 1.0', got '" + std::string(lines[0]) + "'");
    }
    Header h;
    const std::string_view cmd = lines[1];
    if (const auto colon = cmd.find(':'); colon != std::string_view::npos) {
      h.command = cmd.substr(0, colon);
      std::string_view arg = cmd.substr(colon + 1);
      while (!arg.empty() && arg.front() == ' ') arg.remove_prefix(1);
      h.argument = arg;
    } else {
      h.command = cmd;
    }
    for (std::size_t i = 2; i < lines.size(); ++i) {
      const std::string_view line = lines[i];
      constexpr std::string_view kContentLength = "Content-Length:";
      if (line.substr(0, kContentLength.size()) == kContentLength) {
        if (h.content_length) throw Error(Errc::kBadContentLength, "duplicate Content-Length line");
        std::string_view value = line.substr(kContentLength.size());
        while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
        std::size_t n = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
        if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
          throw Error(Errc::kBadContentLength, "malformed Content-Length '" + std::string(value) + "'");
        }
        if (n > options_.max_content_length) {
          too_large_ = true;
          throw Error(Errc::kBadContentLength, "Content-Length " + std::to_string(n) + " exceeds the limit of " +
                                                   std::to_string(options_.max_content_length));
        }
        h.content_length = n;
      } else if (!options_.lenient_headers) {
        throw Error(Errc::kBadHeader, "unknown content description line '" + std::string(line) + "'");
      }
    }
    return h;
  }

  static std::uint16_t parse_port(std::string_view text) {
    std::uint32_t port = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || port == 0 || port > 65535) {
      throw Error(Errc::kUnknownCommand, "invalid port number '" + std::string(text) + "'");
    }
    return static_cast<std::uint16_t>(port);
  }

  static ControlMessage build(const Header& h, std::string content) {
    const std::string_view c = h.command;
    const auto no_argument = [&] {
      if (h.argument) throw Error(Errc::kUnknownCommand, "command '" + std::string(c) + "' takes no argument");
    };
    const auto no_content = [&] {
      if (h.content_length) throw Error(Errc::kBadHeader, "message '" + std::string(c) + "' carries no content");
    };
    const auto argument = [&]() -> std::string_view {
      if (!h.argument) throw Error(Errc::kUnknownCommand, "command '" + std::string(c) + "' needs an argument");
      return *h.argument;
    };

    if (c == "MetaInfo") {
      no_argument();
      if (!h.content_length) throw Error(Errc::kBadContentLength, "MetaInfo reply without Content-Length");
      return msg::MetaInfo{std::move(content)};
    }
    if (c == "Error") {
      no_argument();
      msg::Error e;
      if (h.content_length) e.content = std::move(content);
      return e;
    }
    no_content();
    if (c == "GetDataConnection") {
      const std::string_view t = argument();
      if (t == "TCP") return msg::GetDataConnection{Transport::kTcp};
      if (t == "UDP") return msg::GetDataConnection{Transport::kUdp};
      throw Error(Errc::kUnknownCommand, "unknown transport '" + std::string(t) + "'");
    }
    if (c == "DataConnectionPort") return msg::DataConnectionPort{parse_port(argument())};
    if (c == "ServerStateConnectionPort") return msg::ServerStateConnectionPort{parse_port(argument())};
    no_argument();
    if (c == "CheckProtocolVersion") return msg::CheckProtocolVersion{};
    if (c == "GetMetaInfo") return msg::GetMetaInfo{};
    if (c == "StartDataTransmission") return msg::StartDataTransmission{};
    if (c == "StopDataTransmission") return msg::StopDataTransmission{};
    if (c == "GetServerStateConnection") return msg::GetServerStateConnection{};
    if (c == "OK") return msg::Ok{};
    if (c == "ServerStateRunning") return msg::ServerStateRunning{};
    if (c == "ServerStateShutdown") return msg::ServerStateShutdown{};
    throw Error(Errc::kUnknownCommand, "unknown command '" + std::string(c) + "'");
  }

  ParseOptions options_;
  std::string buffer_;
  bool poisoned_ = false;
  bool too_large_ = false;
  Errc poison_code_ = Errc::kEndOfStream;
};

/// Parses exactly one complete message.
inline ControlMessage parse(std::string_view bytes, const ParseOptions& options = {}) {
  MessageParser parser(options);
  parser.feed(bytes);
  auto m = parser.next();
  if (!m) throw Error(Errc::kEndOfStream, "input ends before the message is complete");
  if (parser.buffered() != 0) {
    throw Error(Errc::kProtocolViolation, std::to_string(parser.buffered()) + " bytes follow the message");
  }
  return std::move(*m);
}

}  // namespace tia

#endif  // TIA_CONTROL_MESSAGES_HPP_
