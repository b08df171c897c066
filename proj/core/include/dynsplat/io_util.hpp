#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "dynsplat/errors.hpp"

namespace dynsplat {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is)
        throw DataError("unexpected end of file while reading u32");
    return v;
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is)
        throw DataError("unexpected end of file while reading u64");
    return v;
}

// Attribute payloads are 32-bit floats on disk, doubles in memory.
inline void write_f32_array(std::ostream& os, const std::vector<double>& values) {
    std::vector<float> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        buf[i] = static_cast<float>(values[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

inline void read_f32_array(std::istream& is, std::vector<double>& values, std::size_t count) {
    std::vector<float> buf(count);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!is)
        throw DataError("unexpected end of file while reading float array");
    values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        values[i] = static_cast<double>(buf[i]);
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is)
        throw DataError("unexpected end of file while reading string");
    return s;
}

} // namespace dynsplat
