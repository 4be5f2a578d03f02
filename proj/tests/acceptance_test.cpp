// Acceptance criteria AC1..AC9. Each test checks its own runtime limit; a
// listener prints one PASS/FAIL line per criterion after the run.

#include <gtest/gtest.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <thread>

#include "support/appendix_example.hpp"
#include "support/packet_oracle.hpp"
#include "support/random_packets.hpp"
#include "support/server_fixtures.hpp"
#include "tia/client.hpp"
#include "tia/control_messages.hpp"
#include "tia/datapacket.hpp"
#include "tia/generator.hpp"
#include "tia/metainfo.hpp"
#include "tia/recording.hpp"
#include "tia/server.hpp"

namespace {

using namespace tia;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

/// Fails the current test if its scope outlives `limit`.
class TimeLimit {
 public:
  explicit TimeLimit(std::chrono::milliseconds limit) : limit_(limit), start_(Clock::now()) {}
  ~TimeLimit() {
    const auto took = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_);
    ::testing::Test::RecordProperty("elapsed_ms", static_cast<int>(took.count()));
    EXPECT_LT(took, limit_) << "runtime limit exceeded";
  }

 private:
  std::chrono::milliseconds limit_;
  Clock::time_point start_;
};

// Message representations as printed in the protocol description: each line
// ends in a literal "\n" marker, sometimes preceded by a space. Canonical form
// drops the spaces before the marker and turns each marker into LF; a content
// line without a marker is appended as is.
std::string canonical(std::initializer_list<std::string_view> printed_lines) {
  std::string out;
  for (std::string_view line : printed_lines) {
    if (line.size() >= 2 && line.substr(line.size() - 2) == "\\n") {
      line.remove_suffix(2);
      while (!line.empty() && line.back() == ' ') line.remove_suffix(1);
      out.append(line);
      out.push_back('\n');
    } else {
      out.append(line);
    }
  }
  return out;
}

TEST(Acceptance, AC1_ControlPlaneGoldenBytes) {
  const TimeLimit limit(1000ms);
  EXPECT_EQ(serialize(msg::CheckProtocolVersion{}), canonical({"TiA 1.0\\n", "CheckProtocolVersion\\n", "\\n"}));
  EXPECT_EQ(serialize(msg::Ok{}), canonical({"TiA 1.0\\n", "OK\\n", "\\n"}));
  EXPECT_EQ(serialize(msg::Error{}), canonical({"TiA 1.0\\n", "Error\\n", "\\n"}));
  const std::string_view error_body = R"(<tiaError version="1.0" description="Human readable error description."/>)";
  EXPECT_EQ(error_body.size(), 73u);
  EXPECT_EQ(serialize(make_error_reply("Human readable error description.")),
            canonical({"TiA 1.0\\n", "Error\\n", "Content-Length: 73\\n", "\\n", error_body}));
  EXPECT_EQ(serialize(msg::GetMetaInfo{}), canonical({"TiA 1.0\\n", "GetMetaInfo\\n", "\\n"}));
  EXPECT_EQ(serialize(msg::GetDataConnection{Transport::kTcp}),
            canonical({"TiA 1.0 \\n", "GetDataConnection: TCP \\n", "\\n"}));
  EXPECT_EQ(serialize(msg::GetDataConnection{Transport::kUdp}),
            canonical({"TiA 1.0 \\n", "GetDataConnection: UDP \\n", "\\n"}));
  EXPECT_EQ(serialize(msg::StartDataTransmission{}), canonical({"TiA 1.0 \\n", "StartDataTransmission \\n", "\\n"}));
  EXPECT_EQ(serialize(msg::StopDataTransmission{}), canonical({"TiA 1.0 \\n", "StopDataTransmission \\n", "\\n"}));
  EXPECT_EQ(serialize(msg::DataConnectionPort{9001}),
            canonical({"TiA 1.0 \\n", "DataConnectionPort: 9001 \\n", "\\n"}));
  EXPECT_EQ(serialize(msg::ServerStateConnectionPort{9002}),
            canonical({"TiA 1.0\\n", "ServerStateConnectionPort: 9002\\n", "\\n"}));
  EXPECT_EQ(serialize(msg::GetServerStateConnection{}),
            canonical({"TiA 1.0\\n", "GetServerStateConnection\\n", "\\n"}));
  EXPECT_EQ(serialize(msg::ServerStateRunning{}), canonical({"TiA 1.0\\n", "ServerStateRunning\\n", "\\n"}));
  EXPECT_EQ(serialize(msg::ServerStateShutdown{}), canonical({"TiA 1.0\\n", "ServerStateShutdown\\n", "\\n"}));
  const std::string_view empty_meta =
      R"(<?xml version="1.0" encoding="UTF-8"?><tiaMetaInfo version="1.0"></tiaMetaInfo>)";
  EXPECT_EQ(serialize(msg::MetaInfo{std::string(empty_meta)}),
            canonical({"TiA 1.0\\n", "MetaInfo\\n", "Content-Length: 79\\n", "\\n", empty_meta}));
}

TEST(Acceptance, AC2_DataPlaneGoldenBytes) {
  const TimeLimit limit(1000ms);
  const Bytes empty = encode(DataPacket{});
  ASSERT_EQ(empty.size(), 33u);
  EXPECT_EQ(empty[0], 0x03);
  EXPECT_EQ(empty[1] | (empty[2] << 8) | (empty[3] << 16) | (empty[4] << 24), 33);

  const auto blocks = oracle::two_signal_example();
  DataPacket p;
  p.packet_id = 1;
  p.connection_packet_number = 2;
  p.timestamp_micros = 3;
  p.blocks.push_back({signal_type("eeg"), 3, 10, blocks[0].samples});
  p.blocks.push_back({signal_type("bp"), 5, 5, blocks[1].samples});
  const Bytes bytes = encode(p);
  ASSERT_EQ(bytes.size(), 261u);
  EXPECT_EQ(bytes, oracle::assemble(1, 2, 3, blocks));
  // Data begins at 33 + 4 * NoS = 41 with the first eeg sample.
  constexpr std::size_t data_offset = 33 + 4 * 2;
  EXPECT_EQ(data_offset, 41u);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + data_offset, 4);
  EXPECT_EQ(first, blocks[0].samples[0]);
}

TEST(Acceptance, AC3_CodecProperties) {
  const TimeLimit limit(30000ms);
  std::mt19937_64 rng(20240101);
  for (int i = 0; i < 1000; ++i) {
    const DataPacket p = testing_support::random_packet(rng);
    ASSERT_EQ(decode(encode(p)), p) << "iteration " << i;
  }
  std::uniform_int_distribution<std::size_t> len(0, 4096);
  for (int i = 0; i < 10000; ++i) {
    Bytes buf(len(rng));
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    // Bias some buffers toward plausible headers so decoding gets past the first checks.
    if (i % 2 == 0 && buf.size() >= 5) {
      buf[0] = 3;
      const auto size = static_cast<std::uint32_t>(i % 4 == 0 ? buf.size() : rng() % 5000);
      std::memcpy(buf.data() + 1, &size, 4);
    }
    try {
      const DataPacket p = decode(buf);
      ASSERT_EQ(encode(p), buf);
    } catch (const Error&) {
    }
  }
}

TEST(Acceptance, AC4_MetaInfoConformance) {
  const TimeLimit limit(5000ms);
  const MetaInfo m = parse_metainfo(testing_support::kAppendixMetaInfo);
  ASSERT_TRUE(m.subject.has_value());
  EXPECT_EQ(m.subject->id, "WE2");
  ASSERT_TRUE(m.master_signal.has_value());
  EXPECT_EQ(m.master_signal->sampling_rate, 100.0f);
  EXPECT_EQ(m.master_signal->block_size, 10u);
  const SignalInfo* eeg = m.find(flag_of("eeg"));
  ASSERT_NE(eeg, nullptr);
  EXPECT_EQ(eeg->num_channels, 3u);
  ASSERT_EQ(eeg->channels.size(), 3u);
  EXPECT_EQ(eeg->channel(1)->label, "Cz");
  EXPECT_EQ(eeg->channel(2)->label, "C1");
  EXPECT_EQ(eeg->channel(3)->label, "C2");
  const SignalInfo* bp = m.find(flag_of("bp"));
  ASSERT_NE(bp, nullptr);
  EXPECT_EQ(bp->num_channels, 5u);
  EXPECT_EQ(bp->channels.size(), 2u);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const MetaInfo r = testing_support::random_metainfo(rng);
    ASSERT_EQ(parse_metainfo(serialize_metainfo(r)), r) << "iteration " << i;
  }
}

TEST(Acceptance, AC5_EndToEndTcp) {
  const TimeLimit limit(10000ms);
  auto server = Server::run(testing_support::appendix_config(Pacing::kLockstep));
  ClientOptions options;
  options.receive_timeout = 5000ms;
  Client client = Client::connect("127.0.0.1", server->control_port(), options);
  client.check_protocol_version();
  const MetaInfo info = client.get_metainfo();
  EXPECT_EQ(info.master_signal->sampling_rate / static_cast<float>(info.master_signal->block_size), 10.0f);
  client.get_data_connection(Transport::kTcp);
  client.open_data_connection();
  client.start();
  std::vector<DataPacket> packets;
  for (int i = 0; i < 50; ++i) packets.push_back(client.receive_packet());
  client.stop();

  for (std::size_t i = 0; i < packets.size(); ++i) {
    const DataPacket& p = packets[i];
    EXPECT_EQ(p.connection_packet_number, i + 1);
    EXPECT_EQ(p.flags().bits(), 0x21u);
    ASSERT_NE(p.find(flag_of("eeg")), nullptr);
    ASSERT_NE(p.find(flag_of("bp")), nullptr);
    EXPECT_EQ(p.find(flag_of("eeg"))->samples.size(), 30u);
    EXPECT_EQ(p.find(flag_of("bp"))->samples.size(), 25u);
    if (i > 0) {
      EXPECT_EQ(p.timestamp_micros - packets[i - 1].timestamp_micros, 100000u);
    }
  }
  std::ostringstream csv;
  write_csv(csv, packets);
  const std::string text = csv.str();
  const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  EXPECT_EQ(lines - 1, 2750u);
}

// Relays datagrams between client and server, dropping every fifth one the server sends.
class LossyRelay {
 public:
  explicit LossyRelay(std::uint16_t server_port)
      : socket_(detail::udp_socket("127.0.0.1", 0)),
        server_(detail::resolve_ipv4("127.0.0.1", server_port)),
        thread_([this] { loop(); }) {}

  ~LossyRelay() {
    stop_.set();
    thread_.join();
  }

  std::uint16_t port() const { return detail::local_port(socket_.get()); }
  std::uint64_t dropped() const { return dropped_; }

 private:
  void loop() {
    std::vector<std::uint8_t> buf(65536);
    std::optional<sockaddr_in> client;
    std::uint64_t from_server = 0;
    while (true) {
      const auto d = detail::udp_recv(socket_.get(), buf, &stop_, std::nullopt);
      if (!d) return;
      const std::span<const std::uint8_t> bytes(buf.data(), d->size);
      if (d->from.sin_port == server_.sin_port) {
        if (++from_server % 5 == 0) {
          ++dropped_;
          continue;
        }
        if (client) detail::udp_send_to(socket_.get(), bytes, *client);
      } else {
        client = d->from;
        detail::udp_send_to(socket_.get(), bytes, server_);
      }
    }
  }

  detail::Fd socket_;
  sockaddr_in server_;
  detail::WakeEvent stop_;
  std::atomic<std::uint64_t> dropped_{0};
  std::thread thread_;
};

TEST(Acceptance, AC6_EndToEndUdpWithLoss) {
  const TimeLimit limit(10000ms);
  // The appendix layout at 100 packets per second.
  ServerConfig config = testing_support::appendix_config(Pacing::kRealtime);
  config.metainfo.master_signal = MasterSignal{1000.0f, 10};
  config.metainfo.signals[0].sampling_rate = 1000.0f;
  config.metainfo.signals[1].sampling_rate = 500.0f;
  auto server = Server::run(config);
  ClientOptions options;
  options.receive_timeout = 3000ms;
  Client client = Client::connect("127.0.0.1", server->control_port(), options);
  const std::uint16_t port = client.get_data_connection(Transport::kUdp);
  LossyRelay relay(port);
  client.open_udp_data("127.0.0.1", relay.port());
  client.start();
  std::vector<std::uint64_t> seen;
  GapTracker tracker;
  while (true) {
    const std::uint64_t n = client.receive_packet().connection_packet_number;
    if (n > 50) break;
    seen.push_back(n);
    tracker.observe(n);
  }
  client.stop();
  const GapReport report = gap_report(seen, 1, 50);
  EXPECT_EQ(report.expected_count, 50u);
  EXPECT_EQ(report.received_count, 40u);
  EXPECT_EQ(report.missing(), 10u);
  EXPECT_EQ(report.gaps.size(), 10u);
  EXPECT_EQ(tracker.finish(50), report);
}

TEST(Acceptance, AC7_AperiodicSemantics) {
  const TimeLimit limit(5000ms);
  MetaInfo info;
  info.master_signal = MasterSignal{100.0f, 10};
  info.signals.push_back({signal_type("eeg"), 100.0f, 10, 2, {}});
  info.signals.push_back({signal_type("button"), 10.0f, 1, 1, {}});
  const std::vector<SourceSpec> sources = {
      {signal_type("eeg"), SineGenerator{5.0, 1.0, 0.0}, {}},
      {signal_type("button"), std::nullopt, {{3, {1.0f}}, {9, {0.0f}}}},
  };
  validate_sources(sources, info);
  int with_button = 0;
  for (std::uint64_t tick = 0; tick < 20; ++tick) {
    const DataPacket p = decode(encode(generate_tick(sources, info, tick, tick + 1)));
    if (p.flags().contains(flag_of("button"))) {
      ++with_button;
      EXPECT_TRUE(tick == 3 || tick == 9) << "tick " << tick;
      EXPECT_EQ(p.find(flag_of("button"))->block_size, 1);
    }
  }
  EXPECT_EQ(with_button, 2);
}

TEST(Acceptance, AC8_ShutdownOrdering) {
  const TimeLimit limit(5000ms);
  auto server = Server::run(testing_support::appendix_config(Pacing::kLockstep));
  ClientOptions options;
  options.receive_timeout = 5000ms;
  Client client = Client::connect("127.0.0.1", server->control_port(), options);
  StateListener state = StateListener::connect("127.0.0.1", client.get_state_connection());
  ASSERT_EQ(state.next(5000ms), StateEvent::kRunning);
  client.get_data_connection(Transport::kTcp);
  client.open_data_connection();
  client.start();
  client.receive_packet();

  // Each watcher records when its socket reports end of stream.
  const auto watch_close = [](int fd) {
    std::array<std::uint8_t, 4096> buf{};
    while (true) {
      const auto n = detail::recv_some(fd, buf, nullptr, Clock::now() + 5s);
      if (!n || *n == 0) return Clock::now();
    }
  };
  std::optional<Clock::time_point> shutdown_seen;
  std::thread state_thread([&] {
    if (state.next(5000ms) == StateEvent::kShutdown) shutdown_seen = Clock::now();
  });
  Clock::time_point control_closed;
  Clock::time_point data_closed;
  std::thread control_thread([&] { control_closed = watch_close(client.control_fd()); });
  std::thread data_thread([&] { data_closed = watch_close(client.data_fd()); });

  server->shutdown();
  state_thread.join();
  control_thread.join();
  data_thread.join();
  ASSERT_TRUE(shutdown_seen.has_value());
  EXPECT_LT(*shutdown_seen, control_closed);
  EXPECT_LT(*shutdown_seen, data_closed);
}

TEST(Acceptance, AC9_ReservedVersionGuard) {
  const TimeLimit limit(1000ms);
  for (std::size_t len : {1u, 5u, 33u, 41u, 261u}) {
    Bytes buf = len >= 33 ? oracle::assemble(0, 0, 0, {}) : Bytes(len, 0);
    buf.resize(len);
    buf[0] = 10;
    try {
      decode(buf);
      ADD_FAILURE() << "decoded a version 10 buffer of " << len << " bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kReservedVersion) << e.what();
    }
  }
}

class CriterionReport : public ::testing::EmptyTestEventListener {
 public:
  void OnTestEnd(const ::testing::TestInfo& info) override {
    std::string name = info.name();
    const auto sep = name.find('_');
    const std::string id = name.substr(0, sep);
    const std::string title = sep == std::string::npos ? "" : name.substr(sep + 1);
    std::string elapsed = "?";
    const ::testing::TestResult* r = info.result();
    for (int i = 0; i < r->test_property_count(); ++i) {
      if (std::string(r->GetTestProperty(i).key()) == "elapsed_ms") elapsed = r->GetTestProperty(i).value();
    }
    lines_.push_back(id + " " + (r->Passed() ? "PASS" : "FAIL") + " " + title + " (" + elapsed + " ms)");
  }

  void OnTestProgramEnd(const ::testing::UnitTest&) override {
    std::printf("\n");
    for (const auto& line : lines_) std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  }

 private:
  std::vector<std::string> lines_;
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionReport);
  return RUN_ALL_TESTS();
}
