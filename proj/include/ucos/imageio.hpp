#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace ucos {

struct ImageU8 {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 (gray) or 3 (rgb)
    std::vector<uint8_t> data;  // interleaved, row-major
};

// Decodes a PNG or JPEG (sniffed from the magic bytes). Palette and
// 16-bit PNGs are reduced to 8-bit; alpha is stripped.
ImageU8 read_image(const std::filesystem::path& path);

// (height, width) from the file header without decoding pixel data.
std::pair<int, int> read_image_size(const std::filesystem::path& path);

void write_png_gray(const std::filesystem::path& path, const uint8_t* data, int height,
                    int width);
void write_png_rgb(const std::filesystem::path& path, const uint8_t* data, int height,
                   int width);

// Write-to-temp-then-rename, so concurrent writers of the same cache
// entry never expose a partial file.
void atomic_write_png_gray(const std::filesystem::path& path, const uint8_t* data,
                           int height, int width);

}  // namespace ucos
