#pragma once

// Internal little-endian byte helpers shared by the XFD1/XFC1 readers.

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "xflowdg/errors.hpp"

namespace xflowdg::detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

/// Sequential reader that remembers its byte offset for error messages.
struct ByteReader {
    std::string buf;
    std::size_t pos = 0;
    std::string path;

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(path + ": " + what + " at byte offset " + std::to_string(pos));
    }
    void need(std::size_t n, const char* what) {
        if (pos + n > buf.size())
            fail(std::string("truncated file reading ") + what + " (need " + std::to_string(n) +
                 " bytes, have " + std::to_string(buf.size() - pos) + ")");
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return std::uint8_t(buf[pos++]);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v = std::uint16_t(v | std::uint16_t(std::uint8_t(buf[pos + std::size_t(i)])) << (8 * i));
        pos += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + std::size_t(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + std::size_t(i)])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

inline ByteReader read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ByteReader{ss.str(), 0, path};
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

}  // namespace xflowdg::detail
