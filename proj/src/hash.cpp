#include "ucos/hash.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "ucos/errors.hpp"

namespace ucos {

Fnv64& Fnv64::update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = h_;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    h_ = h;
    return *this;
}

Fnv64& Fnv64::update(const std::string& s) { return update(s.data(), s.size()); }

uint64_t fnv64(const void* data, size_t n) { return Fnv64().update(data, n).digest(); }

uint64_t fnv64(const std::string& s) { return fnv64(s.data(), s.size()); }

uint64_t fnv64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file for hashing: " + path.string());
    Fnv64 h;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<size_t>(in.gcount()));
    }
    return h.digest();
}

std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace ucos
