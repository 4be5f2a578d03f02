#ifndef TIA_DETAIL_ENDIAN_HPP_
#define TIA_DETAIL_ENDIAN_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>

namespace tia::detail {

// Little-endian field access by explicit shifts, independent of host order.

template <typename T>
T load_le(std::span<const std::uint8_t> in, std::size_t offset) noexcept {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<T>(in[offset + i]) << (8 * i));
  }
  return v;
}

template <typename T>
void store_le(std::span<std::uint8_t> out, std::size_t offset, T v) noexcept {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[offset + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

inline float load_f32_le(std::span<const std::uint8_t> in, std::size_t offset) noexcept {
  return std::bit_cast<float>(load_le<std::uint32_t>(in, offset));
}

inline void store_f32_le(std::span<std::uint8_t> out, std::size_t offset, float v) noexcept {
  store_le<std::uint32_t>(out, offset, std::bit_cast<std::uint32_t>(v));
}

}  // namespace tia::detail

#endif  // TIA_DETAIL_ENDIAN_HPP_
