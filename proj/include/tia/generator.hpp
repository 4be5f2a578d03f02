/**
 * @file generator.hpp
 * @brief Synthetic signal sources and per-tick packet generation.
 *
 * One tick is one master block interval. Every periodic signal contributes a
 * full block to every tick; an aperiodic signal contributes a single-sample
 * block only on ticks where its change schedule fires.
 */

#ifndef TIA_GENERATOR_HPP_
#define TIA_GENERATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tia/datapacket.hpp"
#include "tia/error.hpp"
#include "tia/metainfo.hpp"
#include "tia/signal_registry.hpp"

namespace tia {

/// amplitude * sin(2 pi f n / fs + channel * channel_phase)
struct SineGenerator {
  double frequency_hz = 1.0;
  double amplitude = 1.0;
  double channel_phase = 0.0;  ///< radians added per channel index
};

struct ConstantGenerator {
  float value = 0.0f;
};

/// step * n + channel * channel_offset
struct RampGenerator {
  double step = 1.0;
  double channel_offset = 0.0;
};

/// Uniform in [-1, 1), a pure function of (seed, signal, channel, sample index).
struct RandomGenerator {
  std::uint64_t seed = 0;
};

using Generator = std::variant<SineGenerator, ConstantGenerator, RampGenerator, RandomGenerator>;

struct ScheduledChange {
  std::uint64_t tick = 0;
  std::vector<float> values;  ///< one value per channel
};

struct SourceSpec {
  SignalType signal;
  std::optional<Generator> generator;     ///< periodic signals
  std::vector<ScheduledChange> schedule;  ///< aperiodic signals, ascending by tick
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Value of sample `n` (counted from server start) on `channel` (0-based).
inline float generator_sample(const Generator& gen, std::uint32_t flag, float sampling_rate, std::uint32_t channel,
                              std::uint64_t n) {
  return std::visit(
      [&](const auto& g) -> float {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, SineGenerator>) {
          const double t = static_cast<double>(n) / static_cast<double>(sampling_rate);
          return static_cast<float>(g.amplitude * std::sin(2.0 * std::numbers::pi * g.frequency_hz * t +
                                                           static_cast<double>(channel) * g.channel_phase));
        } else if constexpr (std::is_same_v<T, ConstantGenerator>) {
          return g.value;
        } else if constexpr (std::is_same_v<T, RampGenerator>) {
          return static_cast<float>(g.step * static_cast<double>(n) + static_cast<double>(channel) * g.channel_offset);
        } else {
          std::uint64_t h = detail::splitmix64(g.seed ^ (std::uint64_t{flag} << 32));
          h = detail::splitmix64(h ^ channel);
          h = detail::splitmix64(h ^ n);
          return static_cast<float>(static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0);
        }
      },
      gen);
}

/// Microseconds since server start at the beginning of `tick`.
inline std::uint64_t tick_timestamp_micros(std::uint64_t tick, const MasterSignal& master) {
  const double seconds_per_tick = static_cast<double>(master.block_size) / static_cast<double>(master.sampling_rate);
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(tick) * seconds_per_tick * 1e6));
}

/**
 * Checks that `sources` can drive the stream described by `info`: the model
 * has a master signal and passes validate_stream_consistency, there is exactly
 * one source per signal, periodic sources have a generator and no schedule,
 * aperiodic sources have a schedule (one value per channel, ascending ticks)
 * and block size 1 in the model. Throws Error(kConfig) describing the first
 * problem found.
 */
inline void validate_sources(const std::vector<SourceSpec>& sources, const MetaInfo& info) {
  const auto fail = [](const std::string& what) { throw Error(Errc::kConfig, what); };
  if (!info.master_signal) fail("the metainfo needs a master signal to drive a data stream");
  if (const auto v = validate_stream_consistency(info); !v.empty()) fail("inconsistent metainfo: " + v.front());
  if (sources.size() != info.signals.size()) {
    fail("expected " + std::to_string(info.signals.size()) + " sources (one per signal), got " +
         std::to_string(sources.size()));
  }
  for (const auto& s : info.signals) {
    const std::string name(s.signal_type.identifier);
    const auto matches = std::count_if(sources.begin(), sources.end(),
                                       [&](const SourceSpec& src) { return src.signal.flag == s.signal_type.flag; });
    if (matches != 1) fail("signal " + name + " needs exactly one source");
    const SourceSpec& src = *std::find_if(sources.begin(), sources.end(), [&](const SourceSpec& x) {
      return x.signal.flag == s.signal_type.flag;
    });
    if (s.signal_type.aperiodic) {
      if (src.generator) fail("aperiodic signal " + name + " must use a change schedule, not a generator");
      if (s.block_size != 1) fail("aperiodic signal " + name + " must have block size 1");
      for (std::size_t i = 0; i < src.schedule.size(); ++i) {
        if (src.schedule[i].values.size() != s.num_channels) {
          fail("schedule entry for " + name + " has " + std::to_string(src.schedule[i].values.size()) +
               " values, expected " + std::to_string(s.num_channels));
        }
        if (i > 0 && src.schedule[i].tick <= src.schedule[i - 1].tick) {
          fail("schedule for " + name + " must be strictly ascending by tick");
        }
      }
    } else {
      if (!src.generator) fail("periodic signal " + name + " needs a generator");
      if (!src.schedule.empty()) fail("periodic signal " + name + " must not have a change schedule");
    }
  }
}

/**
 * Builds the packet for one master block interval. The connection packet
 * number is left at 0; each session stamps its own.
 * Preconditions: validate_sources(sources, info) passes.
 */
inline DataPacket generate_tick(const std::vector<SourceSpec>& sources, const MetaInfo& info, std::uint64_t tick,
                                std::uint64_t packet_id) {
  DataPacket packet;
  packet.packet_id = packet_id;
  packet.timestamp_micros = tick_timestamp_micros(tick, *info.master_signal);

  std::vector<const SignalInfo*> ordered;
  for (const auto& s : info.signals) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const SignalInfo* a, const SignalInfo* b) { return a->signal_type.flag < b->signal_type.flag; });

  for (const SignalInfo* s : ordered) {
    const SourceSpec& src = *std::find_if(sources.begin(), sources.end(), [&](const SourceSpec& x) {
      return x.signal.flag == s->signal_type.flag;
    });
    const auto channels = static_cast<std::uint16_t>(s->num_channels);
    if (s->signal_type.aperiodic) {
      const auto change = std::find_if(src.schedule.begin(), src.schedule.end(),
                                       [&](const ScheduledChange& c) { return c.tick == tick; });
      if (change == src.schedule.end()) continue;
      packet.blocks.push_back({s->signal_type, channels, 1, change->values});
      continue;
    }
    const auto block_size = static_cast<std::uint16_t>(s->block_size);
    SignalBlock block{s->signal_type, channels, block_size, {}};
    block.samples.reserve(std::size_t{channels} * block_size);
    const std::uint64_t first = tick * block_size;
    for (std::uint32_t c = 0; c < channels; ++c) {
      for (std::uint32_t i = 0; i < block_size; ++i) {
        block.samples.push_back(generator_sample(*src.generator, s->signal_type.flag, s->sampling_rate, c, first + i));
      }
    }
    packet.blocks.push_back(std::move(block));
  }
  return packet;
}

}  // namespace tia

#endif  // TIA_GENERATOR_HPP_
