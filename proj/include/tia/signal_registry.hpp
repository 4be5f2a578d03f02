/**
 * @file signal_registry.hpp
 * @brief Signal type identifiers, flag values and periodic/aperiodic classification.
 *
 * The table below is the only place where identifiers and flags are defined.
 * Everything else (packet codec, metainfo, server) looks signal types up here.
 */

#ifndef TIA_SIGNAL_REGISTRY_HPP_
#define TIA_SIGNAL_REGISTRY_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "tia/error.hpp"

namespace tia {

struct SignalType {
  std::string_view identifier;
  std::uint32_t flag = 0;
  bool aperiodic = false;

  friend constexpr bool operator==(const SignalType& a, const SignalType& b) noexcept {
    return a.flag == b.flag && a.identifier == b.identifier && a.aperiodic == b.aperiodic;
  }
};

/// Defined signal types, ascending by flag value.
inline constexpr std::array<SignalType, 19> kSignalTypes = {{
    {"eeg", 0x00000001u, false},
    {"emg", 0x00000002u, false},
    {"eog", 0x00000004u, false},
    {"ecg", 0x00000008u, false},
    {"hr", 0x00000010u, false},
    {"bp", 0x00000020u, false},
    {"button", 0x00000040u, true},
    {"joystick", 0x00000080u, true},
    {"sensors", 0x00000100u, false},
    {"nirs", 0x00000200u, false},
    {"fmri", 0x00000400u, false},
    {"mouse", 0x00000800u, true},
    {"mouse-button", 0x00001000u, true},
    // 0x2000, 0x4000 and 0x8000 are not used
    {"user_1", 0x00010000u, false},
    {"user_2", 0x00020000u, false},
    {"user_3", 0x00040000u, false},
    {"user_4", 0x00080000u, false},
    {"undefined", 0x00100000u, false},
    {"event", 0x00200000u, false},
}};

namespace detail {

constexpr std::uint32_t defined_flags() noexcept {
  std::uint32_t all = 0;
  for (const auto& s : kSignalTypes) all |= s.flag;
  return all;
}

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace detail

/// Union of every defined flag. Any other bit in a mask is invalid.
inline constexpr std::uint32_t kDefinedFlags = detail::defined_flags();

/// How undefined bits in a mask are treated.
enum class MaskPolicy {
  kStrict,   ///< undefined bits are an error
  kLenient,  ///< undefined bits are preserved by the caller and ignored here
};

/// Set of signal types, one bit per type.
class SignalMask {
 public:
  constexpr SignalMask() noexcept = default;
  constexpr explicit SignalMask(std::uint32_t bits) noexcept : bits_(bits) {}

  constexpr std::uint32_t bits() const noexcept { return bits_; }
  constexpr bool valid() const noexcept { return (bits_ & ~kDefinedFlags) == 0; }
  constexpr std::uint32_t undefined_bits() const noexcept { return bits_ & ~kDefinedFlags; }
  constexpr bool contains(std::uint32_t flag) const noexcept { return (bits_ & flag) != 0; }

  constexpr SignalMask& operator|=(std::uint32_t flag) noexcept {
    bits_ |= flag;
    return *this;
  }

  friend constexpr bool operator==(SignalMask a, SignalMask b) noexcept = default;

 private:
  std::uint32_t bits_ = 0;
};

inline const SignalType& signal_type(std::string_view identifier) {
  for (const auto& s : kSignalTypes) {
    if (s.identifier == identifier) return s;
  }
  throw Error(Errc::kUnknownIdentifier, "unknown signal type identifier '" + std::string(identifier) + "'");
}

inline const SignalType& signal_type(std::uint32_t flag) {
  if (flag == 0 || !std::has_single_bit(flag)) {
    throw Error(Errc::kMultipleBits, "signal flag " + detail::hex32(flag) + " must have exactly one bit set");
  }
  for (const auto& s : kSignalTypes) {
    if (s.flag == flag) return s;
  }
  throw Error(Errc::kUnknownFlag, "signal flag " + detail::hex32(flag) + " is not a defined signal type");
}

/// Identifiers are case sensitive: "EEG" is unknown.
inline std::uint32_t flag_of(std::string_view identifier) { return signal_type(identifier).flag; }

inline std::string_view identifier_of(std::uint32_t flag) { return signal_type(flag).identifier; }

inline bool is_aperiodic(std::uint32_t flag) { return signal_type(flag).aperiodic; }

/// Signal types in `mask`, ascending by flag value.
inline std::vector<SignalType> decompose(SignalMask mask, MaskPolicy policy = MaskPolicy::kStrict) {
  if (policy == MaskPolicy::kStrict && !mask.valid()) {
    throw Error(Errc::kInvalidMask, "signal mask " + detail::hex32(mask.bits()) + " has undefined bits " +
                                        detail::hex32(mask.undefined_bits()));
  }
  std::vector<SignalType> out;
  for (const auto& s : kSignalTypes) {
    if (mask.contains(s.flag)) out.push_back(s);
  }
  return out;
}

/// Number of signals (NoS) in a mask.
inline std::size_t count_signals(SignalMask mask, MaskPolicy policy = MaskPolicy::kStrict) {
  if (policy == MaskPolicy::kStrict && !mask.valid()) {
    throw Error(Errc::kInvalidMask, "signal mask " + detail::hex32(mask.bits()) + " has undefined bits " +
                                        detail::hex32(mask.undefined_bits()));
  }
  return static_cast<std::size_t>(std::popcount(mask.bits() & kDefinedFlags));
}

}  // namespace tia

#endif  // TIA_SIGNAL_REGISTRY_HPP_
