#pragma once

#include <string>
#include <vector>

namespace ucos {

// H x W x 3 interleaved RGB in [0, 1]. original_size keeps the pre-resize
// dimensions so predictions can be written back at native resolution.
struct ImageTensor {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height * width * 3
    int orig_height = 0;
    int orig_width = 0;
    std::string id;

    size_t pixels() const { return static_cast<size_t>(height) * width; }
    float* px(int r, int c) { return data.data() + (static_cast<size_t>(r) * width + c) * 3; }
    const float* px(int r, int c) const {
        return data.data() + (static_cast<size_t>(r) * width + c) * 3;
    }
};

// H x W map in [0, 1].
struct SoftMask {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    SoftMask() = default;
    SoftMask(int h, int w, float fill = 0.f)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    size_t size() const { return data.size(); }
    float& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

// Strictly two-valued H x W map. Stored as floats holding exactly 0.0 or
// 1.0 so losses and metrics share one arithmetic path.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    BinaryMask() = default;
    BinaryMask(int h, int w, float fill = 0.f)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    size_t size() const { return data.size(); }
    float& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

// Per-pixel foreground/background class score in [0, 1].
struct ClassScoreMap {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    ClassScoreMap() = default;
    ClassScoreMap(int h, int w, float fill = 0.f)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    size_t size() const { return data.size(); }
};

// output = 1 where mask >= threshold (inclusive). Rejects non-finite
// mask values; threshold must lie in [0, 1].
BinaryMask binarize(const SoftMask& mask, float threshold);

// 1 - mask, elementwise.
SoftMask complement(const SoftMask& mask);

SoftMask to_soft(const BinaryMask& mask);

// Foreground pixel count (mask holds exact 0/1 values).
size_t foreground_count(const BinaryMask& mask);

void validate_soft_mask(const SoftMask& mask, const char* what);
void validate_binary_mask(const BinaryMask& mask, const char* what);

}  // namespace ucos
