#include "phil/frame.hpp"

#include <bit>

#include <zlib.h>

namespace phil {

namespace {

template <typename T>
void put_le(std::uint8_t* out, T value) {
    for (std::size_t k = 0; k < sizeof(T); ++k)
        out[k] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * k));
}

template <typename T>
T get_le(const std::uint8_t* in) {
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k)
        v |= static_cast<std::uint64_t>(in[k]) << (8 * k);
    return static_cast<T>(v);
}

} // namespace

std::string to_string(FrameKind kind) {
    switch (kind) {
    case FrameKind::voltage:
        return "voltage";
    case FrameKind::current:
        return "current";
    case FrameKind::dp_voltage:
        return "dp_voltage";
    case FrameKind::dp_current:
        return "dp_current";
    }
    return "unknown";
}

bool is_dynamic_phasor(FrameKind kind) {
    return kind == FrameKind::dp_voltage || kind == FrameKind::dp_current;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

FrameBytes encode_frame(const InterfaceFrame& frame) {
    FrameBytes out{};
    put_le<std::uint32_t>(&out[0], kFrameMagic);
    out[4] = kFrameVersion;
    out[5] = static_cast<std::uint8_t>(frame.kind);
    put_le<std::uint32_t>(&out[6], frame.seq);
    put_le<std::uint64_t>(&out[10], frame.step_index);
    for (std::size_t k = 0; k < 3; ++k)
        put_le<std::uint64_t>(&out[18 + 8 * k], std::bit_cast<std::uint64_t>(frame.payload[k]));
    put_le<std::uint32_t>(&out[42], crc32(std::span(out).first(42)));
    return out;
}

InterfaceFrame decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kFrameSize)
        throw DecodeError("frame has " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(kFrameSize));
    if (get_le<std::uint32_t>(&bytes[0]) != kFrameMagic)
        throw DecodeError("bad frame magic");
    if (bytes[4] != kFrameVersion)
        throw DecodeError("unsupported frame version " + std::to_string(bytes[4]));
    if (bytes[5] > static_cast<std::uint8_t>(FrameKind::dp_current))
        throw DecodeError("unknown frame kind " + std::to_string(bytes[5]));
    if (get_le<std::uint32_t>(&bytes[42]) != crc32(bytes.first(42)))
        throw DecodeError("frame CRC mismatch");

    InterfaceFrame frame;
    frame.kind = static_cast<FrameKind>(bytes[5]);
    frame.seq = get_le<std::uint32_t>(&bytes[6]);
    frame.step_index = get_le<std::uint64_t>(&bytes[10]);
    for (std::size_t k = 0; k < 3; ++k)
        frame.payload[k] = std::bit_cast<Real>(get_le<std::uint64_t>(&bytes[18 + 8 * k]));
    return frame;
}

} // namespace phil
