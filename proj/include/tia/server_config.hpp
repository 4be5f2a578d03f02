/**
 * @file server_config.hpp
 * @brief Server configuration and its JSON representation.
 *
 * Example document (all keys except "metainfo" and "sources" are optional):
 *
 *   {
 *     "control_port": 9000,
 *     "bind_address": "0.0.0.0",
 *     "udp": { "mode": "unicast-after-hello" },
 *     "pacing": "realtime",
 *     "timestamps": "tick",
 *     "queue_capacity": 256,
 *     "state_heartbeat_ms": 1000,
 *     "shutdown_grace_ms": 100,
 *     "metainfo": {
 *       "subject": { "id": "WE2", "firstName": "Max", "surname": "Mustermann", "handedness": "r" },
 *       "masterSignal": { "samplingRate": 100, "blockSize": 10 },
 *       "signals": [
 *         { "type": "eeg", "samplingRate": 100, "blockSize": 10, "numChannels": 3,
 *           "channels": [ { "nr": 1, "label": "Cz" } ] }
 *       ]
 *     },
 *     "sources": [
 *       { "signal": "eeg", "generator": { "type": "sine", "frequency": 10, "amplitude": 50 } },
 *       { "signal": "button", "schedule": [ { "tick": 3, "values": [1] } ] }
 *     ]
 *   }
 */

#ifndef TIA_SERVER_CONFIG_HPP_
#define TIA_SERVER_CONFIG_HPP_

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tia/error.hpp"
#include "tia/generator.hpp"
#include "tia/metainfo.hpp"

namespace tia {

enum class LogLevel { kDebug, kInfo, kWarn, kError };
using Logger = std::function<void(LogLevel, const std::string&)>;

enum class UdpMode {
  kUnicastAfterHello,  ///< client sends one empty datagram; packets go to its source address
  kBroadcast,          ///< packets go to a configured address on a configured port
};

enum class Pacing {
  kRealtime,  ///< one tick per master block interval; a full session queue drops the packet
  kLockstep,  ///< ticks advance only while sessions transmit; a full session queue pauses the timeline
};

enum class TimestampClock { kTick, kWall };

struct ServerConfig {
  std::string bind_address = "0.0.0.0";
  std::uint16_t control_port = 9000;  ///< 0 picks an ephemeral port
  UdpMode udp_mode = UdpMode::kUnicastAfterHello;
  std::string udp_broadcast_address = "255.255.255.255";
  std::uint16_t udp_broadcast_port = 0;
  Pacing pacing = Pacing::kRealtime;
  TimestampClock timestamps = TimestampClock::kTick;
  std::size_t queue_capacity = 256;
  std::optional<std::chrono::milliseconds> state_heartbeat_interval;
  std::chrono::milliseconds shutdown_grace{100};
  MetaInfo metainfo;
  std::vector<SourceSpec> sources;
  Logger logger;
};

/// Throws Error(kConfig) if the configuration cannot run.
inline void validate(const ServerConfig& config) {
  if (config.queue_capacity == 0) throw Error(Errc::kConfig, "queue_capacity must be positive");
  if (config.state_heartbeat_interval && config.state_heartbeat_interval->count() <= 0) {
    throw Error(Errc::kConfig, "state heartbeat interval must be positive");
  }
  if (config.udp_mode == UdpMode::kBroadcast && config.udp_broadcast_port == 0) {
    throw Error(Errc::kConfig, "broadcast mode needs a udp port");
  }
  try {
    serialize_metainfo(config.metainfo);
  } catch (const Error& e) {
    throw Error(Errc::kConfig, std::string("invalid metainfo: ") + e.what());
  }
  validate_sources(config.sources, config.metainfo);
}

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(Errc::kConfig, std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(Errc::kConfig, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

/// Non-negative integer that fits T; rejects negatives, fractions and wrap-around.
template <typename T>
T unsigned_value(const json& value, std::string_view key) {
  if (!value.is_number_unsigned() || value.get<std::uint64_t>() > std::numeric_limits<T>::max()) {
    throw Error(Errc::kConfig, std::string(key) + " must be an integer between 0 and " +
                                   std::to_string(std::numeric_limits<T>::max()));
  }
  return static_cast<T>(value.get<std::uint64_t>());
}

template <typename T>
T unsigned_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : unsigned_value<T>(*it, key);
}

template <typename T>
T required_unsigned(const json& j, const char* key) {
  return unsigned_value<T>(j.at(key), key);
}

inline std::string enum_text(const json& j, const char* key, std::string fallback,
                             std::initializer_list<std::string_view> allowed) {
  const std::string value = get_or<std::string>(j, key, std::move(fallback));
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
    throw Error(Errc::kConfig, "invalid value '" + value + "' for " + key);
  }
  return value;
}

inline MetaInfo metainfo_from_json(const json& j) {
  check_keys(j, "metainfo", {"subject", "masterSignal", "signals"});
  MetaInfo info;
  if (const auto it = j.find("subject"); it != j.end()) {
    const json& s = *it;
    check_keys(s, "subject",
               {"id", "firstName", "surname", "sex", "birthday", "handedness", "medication", "glasses", "smoker"});
    Subject subject;
    if (s.contains("id")) subject.id = s["id"].get<std::string>();
    if (s.contains("firstName")) subject.first_name = s["firstName"].get<std::string>();
    if (s.contains("surname")) subject.surname = s["surname"].get<std::string>();
    if (s.contains("sex")) {
      const auto v = enum_text(s, "sex", "", {"m", "f"});
      subject.sex = v == "m" ? Sex::kMale : Sex::kFemale;
    }
    if (s.contains("birthday")) subject.birthday = parse_date_attr(s["birthday"].get<std::string>());
    if (s.contains("handedness")) {
      const auto v = enum_text(s, "handedness", "", {"l", "r"});
      subject.handedness = v == "l" ? Handedness::kLeft : Handedness::kRight;
    }
    if (s.contains("medication")) subject.medication = s["medication"].get<bool>();
    if (s.contains("glasses")) subject.glasses = s["glasses"].get<bool>();
    if (s.contains("smoker")) subject.smoker = s["smoker"].get<bool>();
    info.subject = subject;
  }
  if (const auto it = j.find("masterSignal"); it != j.end()) {
    check_keys(*it, "masterSignal", {"samplingRate", "blockSize"});
    info.master_signal = MasterSignal{it->at("samplingRate").get<float>(), required_unsigned<std::uint32_t>(*it, "blockSize")};
  }
  for (const json& s : j.value("signals", json::array())) {
    check_keys(s, "signal", {"type", "samplingRate", "blockSize", "numChannels", "channels"});
    SignalInfo info_s;
    info_s.signal_type = metainfo_signal_type(s.at("type").get<std::string>());
    info_s.sampling_rate = s.at("samplingRate").get<float>();
    info_s.block_size = required_unsigned<std::uint32_t>(s, "blockSize");
    info_s.num_channels = required_unsigned<std::uint32_t>(s, "numChannels");
    for (const json& c : s.value("channels", json::array())) {
      check_keys(c, "channel", {"nr", "label"});
      info_s.channels.push_back({required_unsigned<std::uint32_t>(c, "nr"), c.at("label").get<std::string>()});
    }
    info.signals.push_back(std::move(info_s));
  }
  return info;
}

inline SourceSpec source_from_json(const json& j) {
  check_keys(j, "source", {"signal", "generator", "schedule"});
  SourceSpec src;
  src.signal = signal_type(j.at("signal").get<std::string>());
  if (const auto it = j.find("generator"); it != j.end()) {
    const json& g = *it;
    const std::string type = enum_text(g, "type", "", {"sine", "constant", "ramp", "random"});
    if (type == "sine") {
      check_keys(g, "sine generator", {"type", "frequency", "amplitude", "channel_phase"});
      src.generator = SineGenerator{g.at("frequency").get<double>(), get_or<double>(g, "amplitude", 1.0),
                                    get_or<double>(g, "channel_phase", 0.0)};
    } else if (type == "constant") {
      check_keys(g, "constant generator", {"type", "value"});
      src.generator = ConstantGenerator{g.at("value").get<float>()};
    } else if (type == "ramp") {
      check_keys(g, "ramp generator", {"type", "step", "channel_offset"});
      src.generator = RampGenerator{get_or<double>(g, "step", 1.0), get_or<double>(g, "channel_offset", 0.0)};
    } else {
      check_keys(g, "random generator", {"type", "seed"});
      src.generator = RandomGenerator{unsigned_or<std::uint64_t>(g, "seed", 0)};
    }
  }
  for (const json& c : j.value("schedule", json::array())) {
    check_keys(c, "schedule entry", {"tick", "values"});
    src.schedule.push_back({required_unsigned<std::uint64_t>(c, "tick"), c.at("values").get<std::vector<float>>()});
  }
  return src;
}

}  // namespace detail

/// Parses and validates a JSON configuration document.
inline ServerConfig parse_server_config(std::string_view text) {
  using nlohmann::json;
  ServerConfig config;
  try {
    const json j = json::parse(text);
    detail::check_keys(j, "config",
                       {"control_port", "bind_address", "udp", "pacing", "timestamps", "queue_capacity",
                        "state_heartbeat_ms", "shutdown_grace_ms", "metainfo", "sources"});
    config.control_port = detail::unsigned_or<std::uint16_t>(j, "control_port", config.control_port);
    config.bind_address = detail::get_or<std::string>(j, "bind_address", config.bind_address);
    if (const auto it = j.find("udp"); it != j.end()) {
      detail::check_keys(*it, "udp", {"mode", "address", "port"});
      const auto mode = detail::enum_text(*it, "mode", "unicast-after-hello", {"unicast-after-hello", "broadcast"});
      config.udp_mode = mode == "broadcast" ? UdpMode::kBroadcast : UdpMode::kUnicastAfterHello;
      config.udp_broadcast_address = detail::get_or<std::string>(*it, "address", config.udp_broadcast_address);
      config.udp_broadcast_port = detail::unsigned_or<std::uint16_t>(*it, "port", 0);
    }
    config.pacing =
        detail::enum_text(j, "pacing", "realtime", {"realtime", "lockstep"}) == "lockstep" ? Pacing::kLockstep
                                                                                          : Pacing::kRealtime;
    config.timestamps =
        detail::enum_text(j, "timestamps", "tick", {"tick", "wall"}) == "wall" ? TimestampClock::kWall
                                                                              : TimestampClock::kTick;
    config.queue_capacity = detail::unsigned_or<std::size_t>(j, "queue_capacity", config.queue_capacity);
    if (j.contains("state_heartbeat_ms")) {
      config.state_heartbeat_interval = std::chrono::milliseconds(detail::unsigned_value<std::uint32_t>(j["state_heartbeat_ms"], "state_heartbeat_ms"));
    }
    config.shutdown_grace =
        std::chrono::milliseconds(detail::unsigned_or<std::uint32_t>(j, "shutdown_grace_ms", 100));
    config.metainfo = detail::metainfo_from_json(j.at("metainfo"));
    for (const json& s : j.at("sources")) config.sources.push_back(detail::source_from_json(s));
  } catch (const json::exception& e) {
    throw Error(Errc::kConfig, std::string("invalid configuration: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::kConfig) throw;
    throw Error(Errc::kConfig, std::string("invalid configuration: ") + e.what());
  }
  validate(config);
  return config;
}

inline ServerConfig load_server_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kConfig, "cannot open configuration file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_server_config(text.str());
}

}  // namespace tia

#endif  // TIA_SERVER_CONFIG_HPP_
