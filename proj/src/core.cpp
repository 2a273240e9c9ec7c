#include "ucos/core.hpp"

#include <cmath>
#include <string>

#include "ucos/errors.hpp"

namespace ucos {

BinaryMask binarize(const SoftMask& mask, float threshold) {
    if (!(threshold >= 0.f && threshold <= 1.f))
        throw ValidationError("binarize: threshold must be in [0, 1], got " +
                              std::to_string(threshold));
    BinaryMask out(mask.height, mask.width);
    for (size_t i = 0; i < mask.data.size(); ++i) {
        float v = mask.data[i];
        if (!std::isfinite(v))
            throw ValidationError("binarize: non-finite mask value at index " + std::to_string(i));
        out.data[i] = (v >= threshold) ? 1.f : 0.f;
    }
    return out;
}

SoftMask complement(const SoftMask& mask) {
    SoftMask out(mask.height, mask.width);
    for (size_t i = 0; i < mask.data.size(); ++i) out.data[i] = 1.f - mask.data[i];
    return out;
}

SoftMask to_soft(const BinaryMask& mask) {
    SoftMask out;
    out.height = mask.height;
    out.width = mask.width;
    out.data = mask.data;
    return out;
}

size_t foreground_count(const BinaryMask& mask) {
    size_t n = 0;
    for (float v : mask.data)
        if (v != 0.f) ++n;
    return n;
}

void validate_soft_mask(const SoftMask& mask, const char* what) {
    if (mask.data.size() != static_cast<size_t>(mask.height) * mask.width)
        throw ValidationError(std::string(what) + ": mask buffer does not match dimensions");
    for (float v : mask.data)
        if (!(v >= 0.f && v <= 1.f))
            throw ValidationError(std::string(what) + ": mask value outside [0, 1]");
}

void validate_binary_mask(const BinaryMask& mask, const char* what) {
    if (mask.data.size() != static_cast<size_t>(mask.height) * mask.width)
        throw ValidationError(std::string(what) + ": mask buffer does not match dimensions");
    for (float v : mask.data)
        if (v != 0.f && v != 1.f)
            throw ValidationError(std::string(what) + ": mask is not strictly two-valued");
}

}  // namespace ucos
