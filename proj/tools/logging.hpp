// Shared log setup for the command-line tools: stderr, level from TIA_LOG.

#ifndef TIA_TOOLS_LOGGING_HPP_
#define TIA_TOOLS_LOGGING_HPP_

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

#include "tia/server_config.hpp"

namespace tia_tools {

inline void setup_logging(const std::string& name) {
  auto logger = spdlog::stderr_color_mt(name);
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%Y-%m-%d %H:%M:%S.%e %^%l%$ %v");
  const char* env = std::getenv("TIA_LOG");
  spdlog::set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::info);
}

inline void log_from_library(tia::LogLevel level, const std::string& text) {
  switch (level) {
    case tia::LogLevel::kDebug: spdlog::debug(text); break;
    case tia::LogLevel::kInfo: spdlog::info(text); break;
    case tia::LogLevel::kWarn: spdlog::warn(text); break;
    case tia::LogLevel::kError: spdlog::error(text); break;
  }
}

}  // namespace tia_tools

#endif  // TIA_TOOLS_LOGGING_HPP_
