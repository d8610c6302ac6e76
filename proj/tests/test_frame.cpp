#include <doctest.h>

#include <random>

#include "phil/frame.hpp"

using namespace phil;

TEST_CASE("frame layout") {
    const InterfaceFrame f{7, 123456789012ull, FrameKind::current, {1.5, -2.25, 3e5}};
    const auto bytes = encode_frame(f);
    CHECK(bytes.size() == 46);
    // Magic, little endian.
    CHECK(bytes[0] == 0x46);
    CHECK(bytes[1] == 0x4C);
    CHECK(bytes[2] == 0x48);
    CHECK(bytes[3] == 0x50);
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 1);
    CHECK(bytes[6] == 7);
    CHECK(decode_frame(bytes) == f);
}

TEST_CASE("crc32 check value") {
    const std::string s = "123456789";
    CHECK(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xCBF43926u);
}

TEST_CASE("round trip property") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<Real> x(-1e6, 1e6);
    for (int k = 0; k < 1000; ++k) {
        const InterfaceFrame f{static_cast<std::uint32_t>(rng()), rng(), static_cast<FrameKind>(k % 4),
                               {x(rng), x(rng), x(rng)}};
        CHECK(decode_frame(encode_frame(f)) == f);
    }
}

TEST_CASE("decode rejects damaged frames") {
    const auto good = encode_frame(InterfaceFrame{1, 2, FrameKind::voltage, {1.0, 2.0, 3.0}});

    SUBCASE("wrong size") {
        CHECK_THROWS_AS(decode_frame(std::span<const std::uint8_t>(good.data(), 45)), DecodeError);
    }
    SUBCASE("every single-bit flip is detected") {
        for (std::size_t i = 0; i < kFrameSize; ++i) {
            for (int b = 0; b < 8; ++b) {
                auto bad = good;
                bad[i] ^= static_cast<std::uint8_t>(1u << b);
                CHECK_THROWS_AS(decode_frame(bad), DecodeError);
            }
        }
    }
    SUBCASE("bad header with a valid checksum") {
        auto patch = [](FrameBytes b, std::size_t at, std::uint8_t v) {
            b[at] = v;
            const auto c = crc32(std::span<const std::uint8_t>(b.data(), 42));
            for (int i = 0; i < 4; ++i)
                b[42 + i] = static_cast<std::uint8_t>(c >> (8 * i));
            return b;
        };
        CHECK_NOTHROW(decode_frame(patch(good, 6, 9)));
        CHECK_THROWS_AS(decode_frame(patch(good, 0, 0)), DecodeError);
        CHECK_THROWS_AS(decode_frame(patch(good, 4, 2)), DecodeError);
        CHECK_THROWS_AS(decode_frame(patch(good, 5, 4)), DecodeError);
    }
}

TEST_CASE("frame kinds") {
    CHECK_FALSE(is_dynamic_phasor(FrameKind::voltage));
    CHECK_FALSE(is_dynamic_phasor(FrameKind::current));
    CHECK(is_dynamic_phasor(FrameKind::dp_voltage));
    CHECK(is_dynamic_phasor(FrameKind::dp_current));
    CHECK(to_string(FrameKind::dp_current) != to_string(FrameKind::current));
}
