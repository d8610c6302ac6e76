#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "phil/signals.hpp"

namespace phil {

enum class FrameKind : std::uint8_t { voltage = 0, current = 1, dp_voltage = 2, dp_current = 3 };

std::string to_string(FrameKind kind);
bool is_dynamic_phasor(FrameKind kind);

/// Per-step coupling payload: instantaneous (a, b, c) or, for the dp kinds,
/// (re, im, omega0) of the positive-sequence phasor. A dp frame with
/// omega0 == 0 is not ready (sender window still filling).
struct InterfaceFrame {
    std::uint32_t seq = 0;
    std::uint64_t step_index = 0;
    FrameKind kind = FrameKind::voltage;
    std::array<Real, 3> payload{};

    bool operator==(const InterfaceFrame&) const = default;
};

// Little-endian layout:
//   0  u32  magic 0x50484C46 ("PHLF")
//   4  u8   version (1)
//   5  u8   kind
//   6  u32  seq
//  10  u64  step_index
//  18  3xf64 payload
//  42  u32  CRC32 of bytes [0, 42)
inline constexpr std::uint32_t kFrameMagic = 0x50484C46u;
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameSize = 46;

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

FrameBytes encode_frame(const InterfaceFrame& frame);

/// Throws DecodeError on size, magic, version, kind or CRC mismatch.
InterfaceFrame decode_frame(std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

} // namespace phil
