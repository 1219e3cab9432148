#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mov::bytes {

inline void put_u8(std::FILE* f, std::uint8_t v) { std::fwrite(&v, 1, 1, f); }

inline std::uint8_t get_u8(std::FILE* f) {
    std::uint8_t v;
    if (std::fread(&v, 1, 1, f) != 1) throw std::runtime_error("truncated stream");
    return v;
}

inline void put_u32_le(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    std::fwrite(b, 1, 4, f);
}

inline std::uint32_t get_u32_le(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("truncated stream");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::FILE* f, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 8, f);
}

inline double get_f64_le(std::FILE* f) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) throw std::runtime_error("truncated stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

inline void put_string(std::FILE* f, const std::string& s) {
    put_u32_le(f, static_cast<std::uint32_t>(s.size()));
    std::fwrite(s.data(), 1, s.size(), f);
}

inline std::string get_string(std::FILE* f) {
    std::uint32_t n = get_u32_le(f);
    if (n > (1u << 20)) throw std::runtime_error("string too long");
    std::string s(n, '\0');
    if (n && std::fread(s.data(), 1, n, f) != n) throw std::runtime_error("truncated stream");
    return s;
}

}  // namespace mov::bytes
