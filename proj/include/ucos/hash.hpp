#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <string>

namespace ucos {

// FNV-1a, 64-bit. Used for cache keys, checkpoint digests and the
// frozen-weights check; not cryptographic.
class Fnv64 {
public:
    Fnv64& update(const void* data, size_t n);
    Fnv64& update(const std::string& s);
    template <typename T>
    Fnv64& update_value(const T& v) {
        return update(&v, sizeof(T));
    }
    uint64_t digest() const { return h_; }

private:
    uint64_t h_ = 0xcbf29ce484222325ULL;
};

uint64_t fnv64(const void* data, size_t n);
uint64_t fnv64(const std::string& s);
uint64_t fnv64_file(const std::filesystem::path& path);

std::string to_hex(uint64_t v);

}  // namespace ucos
