// tia-server: serves the configured synthetic signals until SIGINT or SIGTERM.

#include <CLI11.hpp>
#include <signal.h>

#include <cstdio>
#include <optional>
#include <string>

#include "logging.hpp"
#include "tia/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"TiA 1.0 server"};
  std::string config_path;
  std::optional<std::uint16_t> port;
  std::optional<std::string> bind;
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--port", port, "control port (overrides the config; 0 picks a free port)");
  app.add_option("--bind", bind, "bind address (overrides the config)");
  CLI11_PARSE(app, argc, argv);

  tia_tools::setup_logging("tia-server");

  // Signals are taken synchronously below; every thread inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<tia::Server> server;
  try {
    tia::ServerConfig config = tia::load_server_config(config_path);
    if (port) config.control_port = *port;
    if (bind) config.bind_address = *bind;
    config.logger = tia_tools::log_from_library;
    server = tia::Server::run(std::move(config));
  } catch (const tia::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  std::printf("control port %u\n", static_cast<unsigned>(server->control_port()));
  std::fflush(stdout);

  int received = 0;
  sigwait(&signals, &received);
  spdlog::info("signal {}, shutting down", received);
  server->shutdown();
  const tia::ServerStats stats = server->stats();
  spdlog::info("{} packets generated, {} dropped", stats.packets_generated, stats.packets_dropped);
  return 0;
}
