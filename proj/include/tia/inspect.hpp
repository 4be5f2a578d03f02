/**
 * @file inspect.hpp
 * @brief Human-readable dump of a single data packet.
 */

#ifndef TIA_INSPECT_HPP_
#define TIA_INSPECT_HPP_

#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>

#include "tia/datapacket.hpp"
#include "tia/recording.hpp"
#include "tia/signal_registry.hpp"

namespace tia {

/// Hex text to bytes. Accepts pairs separated by whitespace or written back to back, either case.
inline Bytes parse_hex(std::string_view text) {
  Bytes out;
  int high = -1;
  for (const char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (high >= 0) throw Error(Errc::kInvalidArgument, "odd number of hex digits before whitespace");
      continue;
    }
    int v = -1;
    if (ch >= '0' && ch <= '9') v = ch - '0';
    if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
    if (v < 0) throw Error(Errc::kInvalidArgument, std::string("invalid hex digit '") + ch + "'");
    if (high < 0) {
      high = v;
    } else {
      out.push_back(static_cast<std::uint8_t>(high * 16 + v));
      high = -1;
    }
  }
  if (high >= 0) throw Error(Errc::kInvalidArgument, "odd number of hex digits");
  return out;
}

/// Decodes `bytes` and renders every header field and sample. Decode errors propagate.
inline std::string inspect_report(std::span<const std::uint8_t> bytes, const DecodeOptions& options = {}) {
  const FixedHeader h = read_fixed_header(bytes, options);
  const DataPacket p = decode(bytes, options);
  std::ostringstream out;
  out << "version: " << unsigned{h.version} << '\n';
  out << "packet size: " << h.packet_size << '\n';
  out << "signal type flags: " << detail::hex32(h.flags.bits()) << '\n';
  out << "packet id: " << h.packet_id << '\n';
  out << "connection packet number: " << h.connection_packet_number << '\n';
  out << "timestamp: " << h.timestamp_micros << " us\n";
  out << "number of signals: " << count_signals(h.flags, options.mask_policy) << '\n';
  if (p.ignored_flags != 0) out << "ignored flags: " << detail::hex32(p.ignored_flags) << '\n';
  for (const SignalBlock& b : p.blocks) {
    out << "signal " << b.signal.identifier << " (" << detail::hex32(b.signal.flag) << "): " << b.num_channels
        << " channels, block size " << b.block_size << '\n';
    for (std::uint32_t c = 0; c < b.num_channels; ++c) {
      out << "  ch " << (c + 1) << ':';
      for (std::uint32_t i = 0; i < b.block_size; ++i) out << ' ' << format_value(b.sample(c, i));
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace tia

#endif  // TIA_INSPECT_HPP_
