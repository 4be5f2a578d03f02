// tia-client: records packets from a server into CSV and reports gaps.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "logging.hpp"
#include "tia/client.hpp"
#include "tia/recording.hpp"

namespace {

// Each block must have the dimensions announced in the metainfo.
void check_dimensions(const tia::DataPacket& p, const tia::MetaInfo& info) {
  for (const tia::SignalBlock& b : p.blocks) {
    const tia::SignalInfo* s = info.find(b.signal.flag);
    if (s == nullptr) {
      throw tia::Error(tia::Errc::kProtocolViolation,
                       "packet carries " + std::string(b.signal.identifier) + ", which the metainfo does not list");
    }
    if (b.num_channels != s->num_channels || b.block_size != s->block_size) {
      throw tia::Error(tia::Errc::kProtocolViolation,
                       "packet " + std::to_string(p.connection_packet_number) + ": " + std::string(b.signal.identifier) +
                           " block is " + std::to_string(b.num_channels) + "x" + std::to_string(b.block_size) +
                           ", metainfo says " + std::to_string(s->num_channels) + "x" +
                           std::to_string(s->block_size));
    }
  }
}

std::string format_gaps(const tia::GapReport& r) {
  std::string out = "expected " + std::to_string(r.expected_count) + ", received " +
                    std::to_string(r.received_count) + ", missing " + std::to_string(r.missing()) + ", " +
                    std::to_string(r.gaps.size()) + " gaps";
  for (const auto& [from, to] : r.gaps) {
    out += from == to ? " " + std::to_string(from) : " " + std::to_string(from) + "-" + std::to_string(to);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TiA 1.0 client"};
  std::string host = "127.0.0.1";
  std::uint16_t port = 9000;
  std::string transport_name = "tcp";
  std::uint64_t packets = 10;
  std::string out_path;
  bool print_metainfo = false;
  unsigned timeout_ms = 5000;
  app.add_option("--host", host, "server address")->capture_default_str();
  app.add_option("--port", port, "server control port")->capture_default_str();
  app.add_option("--transport", transport_name, "data transport")
      ->check(CLI::IsMember({"tcp", "udp"}))
      ->capture_default_str();
  app.add_option("--packets", packets, "number of packets to record")->capture_default_str();
  app.add_option("--out", out_path, "CSV output file");
  app.add_flag("--print-metainfo", print_metainfo, "print the server's metainfo XML and exit");
  app.add_option("--timeout-ms", timeout_ms, "connect, command and receive timeout")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  tia_tools::setup_logging("tia-client");
  const tia::Transport transport = transport_name == "udp" ? tia::Transport::kUdp : tia::Transport::kTcp;

  try {
    tia::ClientOptions options;
    options.connect_timeout = std::chrono::milliseconds(timeout_ms);
    options.command_timeout = std::chrono::milliseconds(timeout_ms);
    options.receive_timeout = std::chrono::milliseconds(timeout_ms);
    tia::Client client = tia::Client::connect(host, port, options);
    client.check_protocol_version();
    std::vector<std::string> warnings;
    const tia::MetaInfo info = client.get_metainfo(&warnings);
    for (const auto& w : warnings) spdlog::warn("metainfo: {}", w);
    if (print_metainfo) {
      std::cout << client.metainfo_xml() << '\n';
      return 0;
    }

    const std::uint16_t data_port = client.get_data_connection(transport);
    spdlog::info("data connection {} port {}", transport_name, data_port);
    client.open_data_connection();
    client.start();

    std::vector<tia::DataPacket> received;
    tia::GapTracker tracker;
    if (transport == tia::Transport::kTcp) {
      while (received.size() < packets) {
        received.push_back(client.receive_packet());
        check_dimensions(received.back(), info);
        tracker.observe(received.back().connection_packet_number);
      }
    } else {
      // Datagrams can be lost: stop at packet number `packets` or when the stream goes quiet.
      std::uint64_t highest = 0;
      while (highest < packets) {
        tia::DataPacket p;
        try {
          p = client.receive_packet();
        } catch (const tia::Error& e) {
          if (e.code() != tia::Errc::kTimeout) throw;
          spdlog::warn("no datagram for {} ms, giving up", timeout_ms);
          break;
        }
        check_dimensions(p, info);
        highest = std::max(highest, p.connection_packet_number);
        if (p.connection_packet_number > packets) continue;
        tracker.observe(p.connection_packet_number);
        received.push_back(std::move(p));
      }
    }
    client.stop();

    const tia::GapReport report = tracker.finish(packets == 0 ? std::nullopt : std::optional<std::uint64_t>(packets));
    std::cout << "gap report: " << format_gaps(report) << '\n';

    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw tia::Error(tia::Errc::kIo, "cannot open " + out_path);
      tia::write_csv(out, received);
      std::size_t rows = 0;
      for (const auto& p : received) rows += tia::row_count(p);
      spdlog::info("wrote {} rows to {}", rows, out_path);
    }
    return 0;
  } catch (const tia::ServerError& e) {
    std::cerr << "tia-client: server error: " << e.error().description.value_or("(no description)") << '\n';
    return 1;
  } catch (const tia::Error& e) {
    std::cerr << "tia-client: " << e.what() << '\n';
    return 1;
  }
}
