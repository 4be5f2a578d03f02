#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/packet_oracle.hpp"
#include "support/process.hpp"
#include "tia/client.hpp"

namespace {

using namespace std::chrono_literals;
using testing_support::Child;
using testing_support::run;

const std::string kServer = TIA_SERVER_BIN;
const std::string kClient = TIA_CLIENT_BIN;
const std::string kInspect = TIA_INSPECT_BIN;
const std::string kExampleConfig = TIA_SOURCE_DIR "/config/example.json";

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tia_cli_test_" + std::to_string(::getpid()) + "_" + name);
}

std::string hex_of(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (const auto b : bytes) {
    out += digits[b >> 4];
    out += digits[b & 15];
    out += ' ';
  }
  return out;
}

std::size_t count_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// Starts tia-server on a free port and returns the port it printed.
class RunningServer {
 public:
  explicit RunningServer(const std::string& config = kExampleConfig)
      : child_({kServer, "--config", config, "--port", "0", "--bind", "127.0.0.1"}) {
    const auto line = child_.read_line(5000ms);
    if (!line || line->rfind("control port ", 0) != 0) throw std::runtime_error("server did not start");
    port_ = std::stoi(line->substr(13));
  }

  std::string port() const { return std::to_string(port_); }
  std::uint16_t port_number() const { return static_cast<std::uint16_t>(port_); }
  Child& child() { return child_; }

 private:
  Child child_;
  int port_ = 0;
};

TEST(Cli, ServerMissingConfigExitsOne) {
  const auto r = run({kServer, "--config", "/nonexistent/missing.json"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("missing.json"), std::string::npos);
}

TEST(Cli, ServerInvalidConfigExitsOne) {
  const auto path = temp_file("bad.json");
  std::ofstream(path) << R"({"metainfo": {}, "sources": []})";
  EXPECT_EQ(run({kServer, "--config", path.string()}).exit_code, 1);
  std::filesystem::remove(path);
}

TEST(Cli, ServerBindConflictExitsOne) {
  RunningServer first;
  const auto r = run({kServer, "--config", kExampleConfig, "--port", first.port(), "--bind", "127.0.0.1"});
  EXPECT_EQ(r.exit_code, 1);
}

TEST(Cli, ClientAgainstServer) {
  RunningServer server;
  // CheckProtocolVersion and GetMetaInfo through the tool.
  const auto meta = run({kClient, "--port", server.port(), "--print-metainfo"});
  ASSERT_EQ(meta.exit_code, 0) << meta.err;
  EXPECT_EQ(meta.out.rfind("<?xml version=\"1.0\" encoding=\"UTF-8\"?><tiaMetaInfo version=\"1.0\">", 0), 0u);

  const auto csv = temp_file("rec.csv");
  const auto tcp = run({kClient, "--port", server.port(), "--transport", "tcp", "--packets", "5", "--out", csv.string()});
  ASSERT_EQ(tcp.exit_code, 0) << tcp.err;
  EXPECT_NE(tcp.out.find("missing 0, 0 gaps"), std::string::npos) << tcp.out;
  EXPECT_EQ(count_lines(csv), 1u + 5u * 55u);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "packet_id,connection_packet_number,timestamp_micros,signal,channel,sample_index,value");
  std::filesystem::remove(csv);

  const auto udp = run({kClient, "--port", server.port(), "--transport", "udp", "--packets", "5"});
  ASSERT_EQ(udp.exit_code, 0) << udp.err;
  EXPECT_NE(udp.out.find("missing 0, 0 gaps"), std::string::npos) << udp.out;

  server.child().signal(SIGINT);
  EXPECT_EQ(server.child().wait().exit_code, 0);
}

TEST(Cli, SigintSendsShutdownToStateClient) {
  RunningServer server;
  tia::Client control = tia::Client::connect("127.0.0.1", server.port_number());
  tia::StateListener state = tia::StateListener::connect("127.0.0.1", control.get_state_connection());
  ASSERT_EQ(state.next(5000ms), tia::StateEvent::kRunning);
  server.child().signal(SIGINT);
  EXPECT_EQ(state.next(5000ms), tia::StateEvent::kShutdown);
  const auto r = server.child().wait();
  EXPECT_EQ(r.exit_code, 0);
  // One log line per accepted session and per command.
  EXPECT_NE(r.err.find("session 1 accepted"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("GetServerStateConnection -> ServerStateConnectionPort"), std::string::npos) << r.err;
}

TEST(Cli, ClientUnreachableExitsNonzero) {
  std::uint16_t port = 0;
  {
    const tia::detail::Fd probe = tia::detail::tcp_listen("127.0.0.1", 0);
    port = tia::detail::local_port(probe.get());
  }
  const auto r = run({kClient, "--port", std::to_string(port), "--packets", "1"});
  EXPECT_NE(r.exit_code, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, InspectEmptyPacketHex) {
  const auto r = run({kInspect, "--hex", hex_of(oracle::assemble(0, 0, 0, {}))});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("version: 3\n"), std::string::npos);
  EXPECT_NE(r.out.find("packet size: 33\n"), std::string::npos);
  EXPECT_NE(r.out.find("number of signals: 0\n"), std::string::npos);
}

TEST(Cli, InspectReservedVersionExitsTwo) {
  auto bytes = oracle::assemble(0, 0, 0, {});
  bytes[0] = 10;
  const auto r = run({kInspect, "--hex", hex_of(bytes)});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("version 10"), std::string::npos) << r.err;
}

TEST(Cli, InspectFileIsDeterministic) {
  const auto path = temp_file("packet.bin");
  const auto bytes = oracle::assemble(1, 2, 3, oracle::two_signal_example());
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                              static_cast<std::streamsize>(bytes.size()));
  const auto a = run({kInspect, path.string()});
  const auto b = run({kInspect, path.string()});
  std::filesystem::remove(path);
  ASSERT_EQ(a.exit_code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("signal eeg (0x00000001): 3 channels, block size 10"), std::string::npos);
  EXPECT_NE(a.out.find("signal bp (0x00000020): 5 channels, block size 5"), std::string::npos);
  // Continuous uppercase hex gives the same report.
  std::string continuous = hex_of(bytes);
  std::erase(continuous, ' ');
  for (auto& ch : continuous) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  EXPECT_EQ(run({kInspect, "--hex", continuous}).out, a.out);
}

TEST(Cli, InspectBadInput) {
  EXPECT_EQ(run({kInspect, "/nonexistent/packet.bin"}).exit_code, 1);
  EXPECT_EQ(run({kInspect, "--hex", "0g"}).exit_code, 1);
  EXPECT_EQ(run({kInspect, "--hex", "03 21"}).exit_code, 2);
}

}  // namespace
