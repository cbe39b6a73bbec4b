// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// PNG/JPEG codecs on libpng/libjpeg. Decoding always produces 8-bit RGB;
// encoding emits PNG only.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "rst/imaging.hpp"

namespace rst {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Rgb8 {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> pixels;  // row-major, 3 bytes per pixel
};

Rgb8 decode_png(std::FILE* f, const std::string& name) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DecodeError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("libpng init failed");
    }
    Rgb8 out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("cannot decode PNG: " + name);
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y)
        rows[y] = out.pixels.data() + static_cast<std::size_t>(y) * out.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

Rgb8 decode_jpeg(std::FILE* f, const std::string& name) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DecodeError("cannot decode JPEG: " + name);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    Rgb8 out;
    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row =
            out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

bool has_png_signature(std::FILE* f) {
    unsigned char sig[8] = {};
    const std::size_t n = std::fread(sig, 1, 8, f);
    std::rewind(f);
    return n == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<unsigned char>& pixels) {
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<unsigned char*>(pixels.data()) +
                  static_cast<std::size_t>(y) * width * channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

unsigned char quantize(float v) {
    const float c = std::min(1.0f, std::max(0.0f, v));
    return static_cast<unsigned char>(std::lround(c * 255.0f));
}

}  // namespace

ImageTensor load_image(const std::filesystem::path& path,
                       std::optional<std::pair<int, int>> target_size) {
    if (target_size && (target_size->first <= 0 || target_size->second <= 0))
        throw InvalidArgument("load_image: target dimensions must be positive");
    if (!std::filesystem::exists(path)) throw NotFound("no such image file: " + path.string());
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw IoError("cannot open: " + path.string());

    Rgb8 raw = has_png_signature(f.get()) ? decode_png(f.get(), path.string())
                                          : decode_jpeg(f.get(), path.string());
    if (raw.width < 1 || raw.height < 1) throw DecodeError("empty image: " + path.string());

    ImageTensor img(Shape{1, 3, raw.height, raw.width});
    img.range = ValueRange::Unit;
    const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
    for (int c = 0; c < 3; ++c) {
        float* plane = img.plane(0, c);
        for (std::size_t i = 0; i < n; ++i) plane[i] = raw.pixels[i * 3 + c] / 255.0f;
    }
    if (target_size) img = resize_bilinear(img, target_size->first, target_size->second);
    return img;
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
    if (img.shape.b != 1 || img.shape.c != 3)
        throw InvalidArgument("save_image: expected shape (1,3,H,W), got " + img.shape.str());
    const int h = static_cast<int>(img.shape.h), w = static_cast<int>(img.shape.w);
    std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w * 3);
    for (int c = 0; c < 3; ++c) {
        const float* plane = img.plane(0, c);
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
            float v = plane[i];
            if (img.range == ValueRange::Signed) v = (v + 1.0f) * 0.5f;
            pixels[i * 3 + c] = quantize(v);
        }
    }
    write_png(path, w, h, 3, pixels);
}

void save_gray_image(const Tensor<float>& map, const std::filesystem::path& path) {
    if (map.shape.c != 1 || map.shape.b < 1)
        throw InvalidArgument("save_gray_image: expected shape (B,1,H,W), got " + map.shape.str());
    const int h = static_cast<int>(map.shape.h), w = static_cast<int>(map.shape.w);
    std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w);
    const float* plane = map.plane(0, 0);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(plane[i]);
    write_png(path, w, h, 1, pixels);
}

}  // namespace rst
