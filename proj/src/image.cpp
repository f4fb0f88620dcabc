// SPDX-License-Identifier: Apache-2.0

#include "guipra/image.hpp"

#include "guipra/error.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cstring>

namespace guipra {

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string base64_encode(std::string_view data)
{
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(data.data()),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0) {
        throw Error("base64: length is not a multiple of 4");
    }
    std::string out(3 * text.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw Error("base64: malformed input");
    }
    // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

Raster::Raster(int width, int height, Rgb fill) : width_(width), height_(height)
{
    if (width <= 0 || height <= 0) {
        throw InvariantError("raster dimensions must be positive");
    }
    pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
    }
}

Rgb Raster::at(int x, int y) const
{
    if (!contains(x, y)) {
        throw InvariantError("raster access out of bounds");
    }
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void Raster::set(int x, int y, Rgb color)
{
    if (!contains(x, y)) {
        return;
    }
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    pixels_[i] = color.r;
    pixels_[i + 1] = color.g;
    pixels_[i + 2] = color.b;
}

void Raster::fill_rect(int x0, int y0, int x1, int y1, Rgb color)
{
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width_);
    y1 = std::min(y1, height_);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            set(x, y, color);
        }
    }
}

void Raster::stroke_rect(int x0, int y0, int x1, int y1, Rgb color, int thickness)
{
    fill_rect(x0, y0, x1, y0 + thickness, color);
    fill_rect(x0, y1 - thickness, x1, y1, color);
    fill_rect(x0, y0, x0 + thickness, y1, color);
    fill_rect(x1 - thickness, y0, x1, y1, color);
}

namespace {

void png_error_fn(png_structp, png_const_charp message)
{
    throw Error(std::string("png: ") + message);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct ReadCursor {
    std::string_view data;
    std::size_t offset = 0;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t count)
{
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + count > cursor->data.size()) {
        png_error(png, "unexpected end of data");
    }
    std::memcpy(out, cursor->data.data() + cursor->offset, count);
    cursor->offset += count;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t count)
{
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), count);
}

void png_flush_fn(png_structp) {}

}  // namespace

Image encode_png(const Raster& raster)
{
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (png == nullptr) {
        throw Error("png: cannot create write struct");
    }
    png_infop info = png_create_info_struct(png);
    Image image;
    try {
        png_set_write_fn(png, &image.bytes, png_write_fn, png_flush_fn);
        png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width()), static_cast<png_uint_32>(raster.height()), 8,
                     PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const auto pixels = raster.pixels();
        const auto stride = static_cast<std::size_t>(raster.width()) * 3;
        for (int y = 0; y < raster.height(); ++y) {
            png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * stride));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    image.media_type = "image/png";
    return image;
}

Raster decode_png(const Image& image)
{
    if (image.bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(image.bytes.data()), 0, 8) != 0) {
        throw Error("png: not a PNG payload");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (png == nullptr) {
        throw Error("png: cannot create read struct");
    }
    png_infop info = png_create_info_struct(png);
    ReadCursor cursor{image.bytes};
    Raster raster;
    try {
        png_set_read_fn(png, &cursor, png_read_fn);
        png_read_info(png, info);
        const auto width = static_cast<int>(png_get_image_width(png, info));
        const auto height = static_cast<int>(png_get_image_height(png, info));
        const auto color_type = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
        if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);

        raster = Raster(width, height);
        std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
        for (int y = 0; y < height; ++y) {
            png_read_row(png, row.data(), nullptr);
            for (int x = 0; x < width; ++x) {
                const auto i = static_cast<std::size_t>(x) * 3;
                raster.set(x, y, {row[i], row[i + 1], row[i + 2]});
            }
        }
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return raster;
}

}  // namespace guipra
