// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace guipra {

// Opaque image payload. Bytes are whatever the media type says; the rest of
// the system only hashes, stores and forwards them.
struct Image {
    std::string bytes;
    std::string media_type = "image/png";

    bool empty() const { return bytes.empty(); }
    friend bool operator==(const Image&, const Image&) = default;
};

// Lowercase hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view data);

inline std::string content_hash(const Image& image) { return sha256_hex(image.bytes); }

std::string base64_encode(std::string_view data);
// Throws guipra::Error on malformed input.
std::string base64_decode(std::string_view text);

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Packed 8-bit RGB raster.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, Rgb fill = {});

    int width() const { return width_; }
    int height() const { return height_; }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    Rgb at(int x, int y) const;
    // Out-of-bounds writes are silently clipped.
    void set(int x, int y, Rgb color);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb color);
    void stroke_rect(int x0, int y0, int x1, int y1, Rgb color, int thickness = 1);

    std::span<const std::uint8_t> pixels() const { return pixels_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

// Deterministic PNG encoding (no timestamps or text chunks).
Image encode_png(const Raster& raster);
// Throws guipra::Error if the payload is not a decodable PNG.
Raster decode_png(const Image& image);

}  // namespace guipra
