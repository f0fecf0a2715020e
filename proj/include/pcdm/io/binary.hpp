#pragma once

// Little-endian scalar packing shared by the PLY and checkpoint codecs.
// Explicit byte shuffling keeps the on-disk layout independent of host order.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "pcdm/io/errors.hpp"

namespace pcdm::detail {

inline void write_bytes(std::ostream& os, const unsigned char* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os) throw IoError("write failed");
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_bytes(os, &v, 1); }

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(os, b, 4);
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(os, b, 8);
}

inline void write_i32_le(std::ostream& os, std::int32_t v) {
    write_u32_le(os, static_cast<std::uint32_t>(v));
}

inline void write_i64_le(std::ostream& os, std::int64_t v) {
    write_u64_le(os, static_cast<std::uint64_t>(v));
}

inline void write_f32_le(std::ostream& os, float v) {
    write_u32_le(os, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64_le(std::ostream& os, double v) {
    write_u64_le(os, std::bit_cast<std::uint64_t>(v));
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32_le(os, static_cast<std::uint32_t>(s.size()));
    if (!s.empty())
        write_bytes(os, reinterpret_cast<const unsigned char*>(s.data()), s.size());
}

inline void read_bytes(std::istream& is, unsigned char* out, std::size_t n) {
    const auto at = is.tellg();
    is.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw ParseError("unexpected end of file at byte offset " +
                         std::to_string(static_cast<long long>(at)));
}

inline std::uint8_t read_u8(std::istream& is) {
    unsigned char b;
    read_bytes(is, &b, 1);
    return b;
}

inline std::uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    read_bytes(is, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    read_bytes(is, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline std::int32_t read_i32_le(std::istream& is) {
    return static_cast<std::int32_t>(read_u32_le(is));
}

inline std::int64_t read_i64_le(std::istream& is) {
    return static_cast<std::int64_t>(read_u64_le(is));
}

inline float read_f32_le(std::istream& is) {
    return std::bit_cast<float>(read_u32_le(is));
}

inline double read_f64_le(std::istream& is) {
    return std::bit_cast<double>(read_u64_le(is));
}

inline std::string read_string(std::istream& is, std::size_t max_len = 1u << 20) {
    const std::uint32_t len = read_u32_le(is);
    if (len > max_len)
        throw ParseError("string length " + std::to_string(len) + " exceeds limit");
    std::string s(len, '\0');
    if (len > 0) read_bytes(is, reinterpret_cast<unsigned char*>(s.data()), len);
    return s;
}

}  // namespace pcdm::detail
