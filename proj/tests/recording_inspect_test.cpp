#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "support/packet_oracle.hpp"
#include "support/random_packets.hpp"
#include "tia/inspect.hpp"
#include "tia/recording.hpp"

namespace {

using namespace tia;

TEST(Recording, RowsAreChannelMajorAndOneBased) {
  DataPacket p;
  p.packet_id = 7;
  p.connection_packet_number = 2;
  p.timestamp_micros = 100000;
  p.blocks.push_back({signal_type("eeg"), 2, 3, {1, 2, 3, 4, 5, 6}});
  const auto rows = rows_of(p);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], (RecordingRow{7, 2, 100000, "eeg", 1, 0, 1.0f}));
  EXPECT_EQ(rows[3], (RecordingRow{7, 2, 100000, "eeg", 2, 0, 4.0f}));
  EXPECT_EQ(rows[5], (RecordingRow{7, 2, 100000, "eeg", 2, 2, 6.0f}));
}

TEST(Recording, CsvText) {
  DataPacket a;
  a.packet_id = 11;
  a.connection_packet_number = 2;
  a.blocks.push_back({signal_type("hr"), 1, 1, {72.5f}});
  DataPacket b;
  b.packet_id = 10;
  b.connection_packet_number = 1;
  b.blocks.push_back({signal_type("hr"), 1, 1, {0.1f}});
  std::ostringstream out;
  write_csv(out, {a, b});
  EXPECT_EQ(out.str(),
            "packet_id,connection_packet_number,timestamp_micros,signal,channel,sample_index,value\n"
            "10,1,0,hr,1,0,0.1\n"
            "11,2,0,hr,1,0,72.5\n");
}

// Shortest representation parses back to the identical float.
TEST(Recording, PropertyValuesRoundTrip) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 20000; ++i) {
    const float v = testing_support::random_finite_float(rng);
    const std::string text = format_value(v);
    ASSERT_EQ(std::strtof(text.c_str(), nullptr), v) << text;
  }
  EXPECT_EQ(format_value(std::numeric_limits<float>::infinity()), "inf");
  EXPECT_EQ(format_value(-0.0f), "-0");
}

TEST(Recording, PropertyRowCount) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 300; ++i) {
    const DataPacket p = testing_support::random_packet(rng);
    std::size_t want = 0;
    for (const auto& b : p.blocks) want += std::size_t{b.num_channels} * b.block_size;
    ASSERT_EQ(rows_of(p).size(), want);
    ASSERT_EQ(row_count(p), want);
  }
}

TEST(Inspect, ParseHexForms) {
  EXPECT_EQ(parse_hex("03 21 00"), (Bytes{0x03, 0x21, 0x00}));
  EXPECT_EQ(parse_hex("0321Ff\n"), (Bytes{0x03, 0x21, 0xFF}));
  EXPECT_EQ(parse_hex("  ab\tCD\r\n"), (Bytes{0xAB, 0xCD}));
  EXPECT_THROW(parse_hex("0"), Error);
  EXPECT_THROW(parse_hex("0 3"), Error);
  EXPECT_THROW(parse_hex("zz"), Error);
}

TEST(Inspect, EmptyPacketReport) {
  const Bytes empty = oracle::assemble(0, 0, 0, {});
  const std::string report = inspect_report(empty);
  EXPECT_NE(report.find("version: 3\n"), std::string::npos);
  EXPECT_NE(report.find("packet size: 33\n"), std::string::npos);
  EXPECT_NE(report.find("number of signals: 0\n"), std::string::npos);
}

TEST(Inspect, TwoSignalReport) {
  const Bytes bytes = oracle::assemble(5, 6, 7, oracle::two_signal_example());
  const std::string report = inspect_report(bytes);
  EXPECT_NE(report.find("packet size: 261\n"), std::string::npos);
  EXPECT_NE(report.find("signal type flags: 0x00000021\n"), std::string::npos);
  EXPECT_NE(report.find("signal eeg (0x00000001): 3 channels, block size 10\n"), std::string::npos);
  EXPECT_NE(report.find("signal bp (0x00000020): 5 channels, block size 5\n"), std::string::npos);
  EXPECT_NE(report.find("  ch 1: -3 -2.5 -2"), std::string::npos);
  EXPECT_NE(report.find("  ch 5: 120 121 122 123 124\n"), std::string::npos);
  EXPECT_EQ(report, inspect_report(bytes));
}

TEST(Inspect, ReservedVersion) {
  Bytes bytes = oracle::assemble(0, 0, 0, {});
  bytes[0] = 10;
  try {
    inspect_report(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kReservedVersion);
    EXPECT_NE(std::string(e.what()).find("version 10"), std::string::npos);
  }
}

}  // namespace
