#pragma once

// Little-endian binary stream helpers for the cache and checkpoint formats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pedcast/errors.hpp"

namespace pedcast::binio {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw IoError("write failed");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n, const std::string& what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw IoError("truncated file while reading " + what);
    }
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
    T v{};
    read_bytes(is, &v, sizeof(T), what);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const std::string& what) {
    const auto n = read_pod<std::uint32_t>(is, what);
    if (n > (1u << 20)) throw IoError("implausible string length in " + what);
    std::string s(n, '\0');
    read_bytes(is, s.data(), n, what);
    return s;
}

inline void write_doubles(std::ostream& os, const double* p, std::size_t n) {
    write_bytes(os, p, n * sizeof(double));
}

inline void read_doubles(std::istream& is, double* p, std::size_t n, const std::string& what) {
    read_bytes(is, p, n * sizeof(double), what);
}

}  // namespace pedcast::binio
