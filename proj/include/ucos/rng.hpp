#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace ucos {

// PCG32 with splitmix64 seeding. std::mt19937 + distributions are
// implementation-defined, so everything that must reproduce across
// platforms (splits, shuffles, parameter init) goes through this.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0);

    uint32_t next_u32();
    uint64_t next_u64();

    // Unbiased integer in [0, bound). bound must be > 0.
    uint32_t bounded(uint32_t bound);

    // Uniform in [0, 1) with 24 bits of mantissa.
    float uniform();
    // Uniform in [lo, hi).
    float uniform(float lo, float hi);

private:
    uint64_t state_;
    uint64_t inc_;
};

// k distinct indices drawn from [0, n), in draw order (partial Fisher-Yates).
std::vector<size_t> sample_without_replacement(size_t n, size_t k, Rng& rng);

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    if (items.size() < 2) return;
    for (size_t i = items.size() - 1; i > 0; --i) {
        size_t j = rng.bounded(static_cast<uint32_t>(i + 1));
        std::swap(items[i], items[j]);
    }
}

}  // namespace ucos
