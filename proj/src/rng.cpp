#include "ucos/rng.hpp"

#include "ucos/errors.hpp"

namespace ucos {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) {
    uint64_t s = seed;
    uint64_t mixed = splitmix64(s);
    s ^= stream * 0x9e3779b97f4a7c15ULL;
    inc_ = (splitmix64(s) << 1u) | 1u;
    state_ = 0;
    next_u32();
    state_ += mixed;
    next_u32();
}

uint32_t Rng::next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

uint64_t Rng::next_u64() {
    uint64_t hi = next_u32();
    uint64_t lo = next_u32();
    return (hi << 32) | lo;
}

uint32_t Rng::bounded(uint32_t bound) {
    if (bound == 0) throw Error("Rng::bounded: bound must be positive");
    // Lemire's multiply-shift rejection method.
    uint64_t m = static_cast<uint64_t>(next_u32()) * bound;
    uint32_t low = static_cast<uint32_t>(m);
    if (low < bound) {
        uint32_t threshold = (0u - bound) % bound;
        while (low < threshold) {
            m = static_cast<uint64_t>(next_u32()) * bound;
            low = static_cast<uint32_t>(m);
        }
    }
    return static_cast<uint32_t>(m >> 32);
}

float Rng::uniform() {
    return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f;
}

float Rng::uniform(float lo, float hi) {
    return lo + (hi - lo) * uniform();
}

std::vector<size_t> sample_without_replacement(size_t n, size_t k, Rng& rng) {
    if (k > n) throw ValidationError("sample_without_replacement: k exceeds population size");
    std::vector<size_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + rng.bounded(static_cast<uint32_t>(n - i));
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    return out;
}

}  // namespace ucos
