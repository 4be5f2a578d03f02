/**
 * @file recording.hpp
 * @brief CSV recording of received packets, one row per sample.
 */

#ifndef TIA_RECORDING_HPP_
#define TIA_RECORDING_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "tia/datapacket.hpp"

namespace tia {

inline constexpr std::string_view kCsvHeader =
    "packet_id,connection_packet_number,timestamp_micros,signal,channel,sample_index,value";

struct RecordingRow {
  std::uint64_t packet_id = 0;
  std::uint64_t connection_packet_number = 0;
  std::uint64_t timestamp_micros = 0;
  std::string_view signal;
  std::uint32_t channel = 0;  ///< 1-based
  std::uint32_t sample_index = 0;
  float value = 0.0f;

  friend bool operator==(const RecordingRow&, const RecordingRow&) = default;
};

/// Shortest decimal text that parses back to the same float.
inline std::string format_value(float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Rows of one packet, ordered by signal flag, channel, sample index.
inline std::vector<RecordingRow> rows_of(const DataPacket& packet) {
  std::vector<RecordingRow> rows;
  for (const SignalBlock& b : packet.blocks) {
    for (std::uint32_t c = 0; c < b.num_channels; ++c) {
      for (std::uint32_t i = 0; i < b.block_size; ++i) {
        rows.push_back({packet.packet_id, packet.connection_packet_number, packet.timestamp_micros,
                        b.signal.identifier, c + 1, i, b.sample(c, i)});
      }
    }
  }
  return rows;
}

inline std::size_t row_count(const DataPacket& packet) {
  std::size_t n = 0;
  for (const SignalBlock& b : packet.blocks) n += b.samples.size();
  return n;
}

inline void write_csv_row(std::ostream& out, const RecordingRow& r) {
  out << r.packet_id << ',' << r.connection_packet_number << ',' << r.timestamp_micros << ',' << r.signal << ','
      << r.channel << ',' << r.sample_index << ',' << format_value(r.value) << '\n';
}

/// Header plus every sample, packets ordered by connection packet number.
inline void write_csv(std::ostream& out, std::vector<DataPacket> packets) {
  std::stable_sort(packets.begin(), packets.end(), [](const DataPacket& a, const DataPacket& b) {
    return a.connection_packet_number < b.connection_packet_number;
  });
  out << kCsvHeader << '\n';
  for (const DataPacket& p : packets) {
    for (const RecordingRow& r : rows_of(p)) write_csv_row(out, r);
  }
}

}  // namespace tia

#endif  // TIA_RECORDING_HPP_
