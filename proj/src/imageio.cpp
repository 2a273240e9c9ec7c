#include "ucos/imageio.hpp"

#include <jpeglib.h>
#include <png.h>
#include <unistd.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "ucos/errors.hpp"

namespace ucos {

namespace {

namespace fs = std::filesystem;

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw ValidationError("cannot open " + path.string());
    return f;
}

bool sniff_png(const uint8_t* magic) { return std::memcmp(magic, "\x89PNG\r\n\x1a\n", 8) == 0; }
bool sniff_jpeg(const uint8_t* magic) { return magic[0] == 0xff && magic[1] == 0xd8; }

// ---- PNG ----------------------------------------------------------------

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

void png_error_fn(png_structp png, png_const_charp msg) {
    std::string* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err && err->empty()) *err = msg;
    longjmp(png_jmpbuf(png), 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

ImageU8 read_png(FILE* f, const fs::path& path, bool header_only) {
    std::string err;
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warn_fn);
    if (!r.png) throw Error("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw Error("png_create_info_struct failed");

    ImageU8 out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(r.png)))
        throw ValidationError("undecodable PNG " + path.string() + ": " + err);

    png_init_io(r.png, f);
    png_read_info(r.png, r.info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    out.height = static_cast<int>(h);
    out.width = static_cast<int>(w);
    if (header_only) return out;

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (bit_depth == 16) png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    int channels = png_get_channels(r.png, r.info);
    if (channels != 1 && channels != 3)
        throw ValidationError("unsupported PNG channel count in " + path.string());
    out.channels = channels;
    out.data.resize(static_cast<size_t>(out.height) * out.width * channels);
    rows.resize(out.height);
    size_t stride = static_cast<size_t>(out.width) * channels;
    for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + y * stride;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return out;
}

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

void write_png(const fs::path& path, const uint8_t* data, int height, int width,
               int channels) {
    FilePtr f = open_file(path, "wb");
    std::string err;
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warn_fn);
    if (!w.png) throw Error("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw Error("png_create_info_struct failed");

    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(w.png)))
        throw Error("PNG write failed for " + path.string() + ": " + err);

    png_init_io(w.png, f.get());
    int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(w.png, w.info, width, height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    size_t stride = static_cast<size_t>(width) * channels;
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data + y * stride);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

// ---- JPEG ---------------------------------------------------------------

struct JpegErrorMgr {
    jpeg_error_mgr mgr;
    jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    longjmp(err->jump, 1);
}

ImageU8 read_jpeg(FILE* f, const fs::path& path, bool header_only) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ValidationError("undecodable JPEG " + path.string() + ": " + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);

    ImageU8 out;
    out.height = static_cast<int>(cinfo.image_height);
    out.width = static_cast<int>(cinfo.image_width);
    if (header_only) {
        jpeg_destroy_decompress(&cinfo);
        return out;
    }

    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.channels = cinfo.output_components;
    out.data.resize(static_cast<size_t>(out.height) * out.width * out.channels);
    size_t stride = static_cast<size_t>(out.width) * out.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.data.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

ImageU8 read_any(const fs::path& path, bool header_only) {
    FilePtr f = open_file(path, "rb");
    uint8_t magic[8] = {0};
    size_t got = std::fread(magic, 1, sizeof(magic), f.get());
    if (got < 8 || std::fseek(f.get(), 0, SEEK_SET) != 0)
        throw ValidationError("undecodable image (truncated header): " + path.string());
    if (sniff_png(magic)) return read_png(f.get(), path, header_only);
    if (sniff_jpeg(magic)) return read_jpeg(f.get(), path, header_only);
    throw ValidationError("unsupported image format: " + path.string());
}

}  // namespace

ImageU8 read_image(const fs::path& path) { return read_any(path, false); }

std::pair<int, int> read_image_size(const fs::path& path) {
    ImageU8 hdr = read_any(path, true);
    return {hdr.height, hdr.width};
}

void write_png_gray(const fs::path& path, const uint8_t* data, int height, int width) {
    write_png(path, data, height, width, 1);
}

void write_png_rgb(const fs::path& path, const uint8_t* data, int height, int width) {
    write_png(path, data, height, width, 3);
}

void atomic_write_png_gray(const fs::path& path, const uint8_t* data, int height,
                           int width) {
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(static_cast<unsigned long>(::getpid()));
    write_png_gray(tmp, data, height, width);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("atomic rename failed for " + path.string() + ": " + ec.message());
    }
}

}  // namespace ucos
