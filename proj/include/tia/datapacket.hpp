/**
 * @file datapacket.hpp
 * @brief Encoder/decoder for version 3 data packets.
 *
 * Wire layout (all multi-byte fields little endian):
 *
 *   +---------+------+-------+-----------+-------------+-----------+
 *   | version | size | flags | packet id | conn number | timestamp |
 *   | 1 byte  | 4    | 4     | 8         | 8           | 8         |
 *   +---------+------+-------+-----------+-------------+-----------+
 *   | NoS x u16 channel counts | NoS x u16 block sizes | f32 samples |
 *   +--------------------------+-----------------------+-------------+
 *
 * Blocks appear in ascending flag order. Within one signal the samples are
 * channel-major: all samples of channel 1, then all of channel 2, and so on.
 */

#ifndef TIA_DATAPACKET_HPP_
#define TIA_DATAPACKET_HPP_

#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tia/detail/endian.hpp"
#include "tia/error.hpp"
#include "tia/signal_registry.hpp"

namespace tia {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kDataPacketVersion = 3;
/// Version byte that can never be used again: it is the first byte of a version 2 packet.
inline constexpr std::uint8_t kReservedPacketVersion = 10;
inline constexpr std::size_t kFixedHeaderSize = 33;
inline constexpr std::uint32_t kDefaultMaxPacketSize = 16u * 1024u * 1024u;

namespace offsets {
inline constexpr std::size_t kVersion = 0;
inline constexpr std::size_t kPacketSize = 1;
inline constexpr std::size_t kFlags = 5;
inline constexpr std::size_t kPacketId = 9;
inline constexpr std::size_t kConnectionPacketNumber = 17;
inline constexpr std::size_t kTimestamp = 25;
}  // namespace offsets

struct FixedHeader {
  std::uint8_t version = kDataPacketVersion;
  std::uint32_t packet_size = kFixedHeaderSize;
  SignalMask flags;
  std::uint64_t packet_id = 0;
  std::uint64_t connection_packet_number = 0;
  std::uint64_t timestamp_micros = 0;

  friend bool operator==(const FixedHeader&, const FixedHeader&) = default;
};

struct BlockShape {
  std::uint16_t num_channels = 0;
  std::uint16_t block_size = 0;
};

struct SignalBlock {
  SignalType signal;
  std::uint16_t num_channels = 0;
  std::uint16_t block_size = 0;
  std::vector<float> samples;  ///< channel-major, num_channels * block_size values

  float sample(std::size_t channel, std::size_t index) const { return samples.at(channel * block_size + index); }

  BlockShape shape() const noexcept { return {num_channels, block_size}; }

  /// Sample values compare by bit pattern so NaN payloads and signed zeros round-trip.
  friend bool operator==(const SignalBlock& a, const SignalBlock& b) noexcept {
    if (a.signal.flag != b.signal.flag || a.num_channels != b.num_channels || a.block_size != b.block_size ||
        a.samples.size() != b.samples.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(a.samples[i]) != std::bit_cast<std::uint32_t>(b.samples[i])) return false;
    }
    return true;
  }
};

struct DataPacket {
  std::uint64_t packet_id = 0;
  std::uint64_t connection_packet_number = 0;
  std::uint64_t timestamp_micros = 0;
  std::vector<SignalBlock> blocks;
  /// Undefined flag bits kept by a lenient decode. Their blocks are dropped.
  std::uint32_t ignored_flags = 0;

  SignalMask flags() const noexcept {
    SignalMask m;
    for (const auto& b : blocks) m |= b.signal.flag;
    return m;
  }

  const SignalBlock* find(std::uint32_t flag) const noexcept {
    for (const auto& b : blocks) {
      if (b.signal.flag == flag) return &b;
    }
    return nullptr;
  }

  friend bool operator==(const DataPacket&, const DataPacket&) = default;
};

struct DecodeOptions {
  std::uint32_t max_packet_size = kDefaultMaxPacketSize;
  MaskPolicy mask_policy = MaskPolicy::kStrict;
};

/// 33 + 4 * NoS + 4 * sum(channels * block size).
inline std::uint32_t packet_size_of(std::span<const BlockShape> shapes) {
  std::uint64_t size = kFixedHeaderSize + 4ull * shapes.size();
  for (const auto& s : shapes) {
    size += 4ull * s.num_channels * s.block_size;
    if (size > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(Errc::kOverflow, "packet size exceeds 32 bits");
    }
  }
  return static_cast<std::uint32_t>(size);
}

namespace detail {

inline void check_version(std::uint8_t version) {
  if (version == kDataPacketVersion) return;
  if (version == kReservedPacketVersion) {
    throw Error(Errc::kReservedVersion,
                "datapacket version 10 is reserved and never valid (10 is the first byte of a version 2 packet)");
  }
  throw Error(Errc::kBadVersion, "datapacket version " + std::to_string(version) + " is not supported, expected 3");
}

}  // namespace detail

/// Parses the first 33 bytes of a packet. The caller reads packet_size - 33 more bytes from a stream.
inline FixedHeader read_fixed_header(std::span<const std::uint8_t> bytes, const DecodeOptions& options = {}) {
  // The version byte is judged first so that a foreign packet is named as such even when short.
  if (!bytes.empty()) detail::check_version(bytes[offsets::kVersion]);
  if (bytes.size() < kFixedHeaderSize) {
    throw Error(Errc::kTruncated, "fixed header needs 33 bytes, got " + std::to_string(bytes.size()));
  }
  FixedHeader h;
  h.version = bytes[offsets::kVersion];
  h.packet_size = detail::load_le<std::uint32_t>(bytes, offsets::kPacketSize);
  if (h.packet_size < kFixedHeaderSize) {
    throw Error(Errc::kSizeMismatch, "packet size " + std::to_string(h.packet_size) + " is below the minimum of 33");
  }
  if (h.packet_size > options.max_packet_size) {
    throw Error(Errc::kPacketTooLarge, "packet size " + std::to_string(h.packet_size) + " exceeds the limit of " +
                                           std::to_string(options.max_packet_size));
  }
  h.flags = SignalMask(detail::load_le<std::uint32_t>(bytes, offsets::kFlags));
  if (options.mask_policy == MaskPolicy::kStrict && !h.flags.valid()) {
    throw Error(Errc::kInvalidMask, "signal type flags " + detail::hex32(h.flags.bits()) + " have undefined bits");
  }
  h.packet_id = detail::load_le<std::uint64_t>(bytes, offsets::kPacketId);
  h.connection_packet_number = detail::load_le<std::uint64_t>(bytes, offsets::kConnectionPacketNumber);
  h.timestamp_micros = detail::load_le<std::uint64_t>(bytes, offsets::kTimestamp);
  return h;
}

inline Bytes encode(const DataPacket& packet) {
  if (packet.ignored_flags != 0) {
    throw Error(Errc::kInvariantViolation, "packets with ignored undefined flags cannot be encoded");
  }
  std::vector<BlockShape> shapes;
  shapes.reserve(packet.blocks.size());
  std::uint32_t previous = 0;
  for (const auto& b : packet.blocks) {
    const SignalType& known = signal_type(b.signal.flag);
    if (known.identifier != b.signal.identifier) {
      throw Error(Errc::kInvariantViolation, "block signal does not match the registry entry for its flag");
    }
    if (b.signal.flag <= previous) {
      throw Error(Errc::kInvariantViolation, "signal blocks must be strictly ascending by flag value");
    }
    previous = b.signal.flag;
    if (b.samples.size() != std::size_t{b.num_channels} * b.block_size) {
      throw Error(Errc::kInvariantViolation, "signal '" + std::string(b.signal.identifier) + "' has " +
                                                 std::to_string(b.samples.size()) + " samples, expected " +
                                                 std::to_string(std::size_t{b.num_channels} * b.block_size));
    }
    shapes.push_back(b.shape());
  }
  const std::uint32_t size = packet_size_of(shapes);

  Bytes out(size);
  std::span<std::uint8_t> buf(out);
  buf[offsets::kVersion] = kDataPacketVersion;
  detail::store_le<std::uint32_t>(buf, offsets::kPacketSize, size);
  detail::store_le<std::uint32_t>(buf, offsets::kFlags, packet.flags().bits());
  detail::store_le<std::uint64_t>(buf, offsets::kPacketId, packet.packet_id);
  detail::store_le<std::uint64_t>(buf, offsets::kConnectionPacketNumber, packet.connection_packet_number);
  detail::store_le<std::uint64_t>(buf, offsets::kTimestamp, packet.timestamp_micros);

  const std::size_t nos = packet.blocks.size();
  std::size_t pos = kFixedHeaderSize;
  for (std::size_t i = 0; i < nos; ++i) {
    detail::store_le<std::uint16_t>(buf, pos + 2 * i, packet.blocks[i].num_channels);
    detail::store_le<std::uint16_t>(buf, pos + 2 * (nos + i), packet.blocks[i].block_size);
  }
  pos += 4 * nos;
  for (const auto& b : packet.blocks) {
    for (float v : b.samples) {
      detail::store_f32_le(buf, pos, v);
      pos += 4;
    }
  }
  return out;
}

/// Decodes exactly one packet; the buffer must hold the packet and nothing else.
inline DataPacket decode(std::span<const std::uint8_t> bytes, const DecodeOptions& options = {}) {
  const FixedHeader h = read_fixed_header(bytes, options);
  if (bytes.size() < h.packet_size) {
    throw Error(Errc::kTruncated, "packet declares " + std::to_string(h.packet_size) + " bytes but only " +
                                      std::to_string(bytes.size()) + " are available");
  }
  if (bytes.size() > h.packet_size) {
    throw Error(Errc::kSizeMismatch, "packet declares " + std::to_string(h.packet_size) + " bytes but the buffer holds " +
                                         std::to_string(bytes.size()));
  }

  // Undefined bits only survive to here under the lenient policy. They still
  // occupy variable header slots, so NoS counts every set bit.
  const std::uint32_t bits = h.flags.bits();
  const std::size_t nos = static_cast<std::size_t>(std::popcount(bits));
  const std::size_t data_start = kFixedHeaderSize + 4 * nos;
  if (data_start > h.packet_size) {
    throw Error(Errc::kSizeMismatch, "packet size " + std::to_string(h.packet_size) + " is too small for " +
                                         std::to_string(nos) + " signals");
  }

  std::vector<BlockShape> shapes(nos);
  std::uint64_t expected = data_start;
  for (std::size_t i = 0; i < nos; ++i) {
    shapes[i].num_channels = detail::load_le<std::uint16_t>(bytes, kFixedHeaderSize + 2 * i);
    shapes[i].block_size = detail::load_le<std::uint16_t>(bytes, kFixedHeaderSize + 2 * (nos + i));
    expected += 4ull * shapes[i].num_channels * shapes[i].block_size;
  }
  if (expected != h.packet_size) {
    throw Error(Errc::kSizeMismatch, "variable header describes " + std::to_string(expected) +
                                         " bytes but the packet size is " + std::to_string(h.packet_size));
  }

  DataPacket packet;
  packet.packet_id = h.packet_id;
  packet.connection_packet_number = h.connection_packet_number;
  packet.timestamp_micros = h.timestamp_micros;
  packet.ignored_flags = h.flags.undefined_bits();

  std::size_t pos = data_start;
  std::size_t slot = 0;
  for (std::uint32_t rest = bits; rest != 0; rest &= rest - 1, ++slot) {
    const std::uint32_t flag = rest & (~rest + 1);
    const BlockShape shape = shapes[slot];
    const std::size_t count = std::size_t{shape.num_channels} * shape.block_size;
    if ((flag & kDefinedFlags) == 0) {
      pos += 4 * count;
      continue;
    }
    SignalBlock block{signal_type(flag), shape.num_channels, shape.block_size, {}};
    block.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i, pos += 4) block.samples[i] = detail::load_f32_le(bytes, pos);
    packet.blocks.push_back(std::move(block));
  }
  return packet;
}

}  // namespace tia

#endif  // TIA_DATAPACKET_HPP_
