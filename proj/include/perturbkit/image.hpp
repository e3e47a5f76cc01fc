#pragma once
// In-memory 8-bit images plus a small PNG codec over zlib.
//
// Supported layouts: grayscale (1ch), RGB (3ch); RGBA input is accepted on
// read and flattened to RGB. Non-interlaced, bit depth 8 only, which covers
// everything this toolkit produces. Masks are single-channel PNGs whose
// pixel values are exactly {0, 255}.

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "perturbkit/errors.hpp"
#include "perturbkit/util.hpp"

namespace perturbkit {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;  // row-major, interleaved

    static Image filled(int w, int h, int c, std::uint8_t value) {
        Image img;
        img.width = w;
        img.height = h;
        img.channels = c;
        img.pixels.assign(static_cast<std::size_t>(w) * h * c, value);
        return img;
    }

    std::uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Image&) const = default;
};

namespace detail {

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    const auto crc = crc32(0L, body.data(), static_cast<uInt>(body.size()));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0 || (img.channels != 1 && img.channels != 3))
        throw ValidationError("encode_png: unsupported image shape");
    if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw ValidationError("encode_png: pixel buffer size mismatch");

    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        const std::uint8_t* row = img.pixels.data() + static_cast<std::size_t>(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK)
        throw IoError("encode_png: deflate failed");
    compressed.resize(bound);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<std::uint8_t> ihdr;
    detail::put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
    detail::put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);                                     // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);             // color type
    ihdr.push_back(0);                                     // compression
    ihdr.push_back(0);                                     // filter method
    ihdr.push_back(0);                                     // no interlace
    detail::append_chunk(out, "IHDR", ihdr);
    detail::append_chunk(out, "IDAT", compressed);
    detail::append_chunk(out, "IEND", {});
    return out;
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw ValidationError("decode_png: not a PNG file");

    int width = 0, height = 0, color_type = -1, file_channels = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = detail::get_u32be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw ValidationError("decode_png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* data = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ValidationError("decode_png: bad IHDR");
            width = static_cast<int>(detail::get_u32be(data));
            height = static_cast<int>(detail::get_u32be(data + 4));
            const int depth = data[8];
            color_type = data[9];
            if (depth != 8 || data[12] != 0)
                throw ValidationError("decode_png: only 8-bit non-interlaced PNGs are supported");
            if (color_type == 0) file_channels = 1;
            else if (color_type == 2) file_channels = 3;
            else if (color_type == 6) file_channels = 4;
            else throw ValidationError("decode_png: unsupported color type");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || file_channels == 0)
        throw ValidationError("decode_png: missing IHDR");

    const std::size_t stride = static_cast<std::size_t>(width) * file_channels;
    std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw ValidationError("decode_png: inflate failed");

    // Undo per-row filters in place (spec filters 0-4).
    const int bpp = file_channels;
    std::vector<std::uint8_t> flat(stride * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        const int filter = src[0];
        std::uint8_t* cur = flat.data() + static_cast<std::size_t>(y) * stride;
        const std::uint8_t* prev = y > 0 ? cur - stride : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int x = src[1 + i];
            const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= static_cast<std::size_t>(bpp)) ? prev[i - bpp] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + detail::paeth(a, b, c); break;
                default: throw ValidationError("decode_png: unknown filter type");
            }
            cur[i] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }

    Image img;
    img.width = width;
    img.height = height;
    if (file_channels == 4) {
        img.channels = 3;
        img.pixels.resize(static_cast<std::size_t>(width) * height * 3);
        for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
            img.pixels[p * 3] = flat[p * 4];
            img.pixels[p * 3 + 1] = flat[p * 4 + 1];
            img.pixels[p * 3 + 2] = flat[p * 4 + 2];
        }
    } else {
        img.channels = file_channels;
        img.pixels = std::move(flat);
    }
    return img;
}

inline void write_png(const Image& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

// Channel-spread grayscale rule: an image counts as grayscale when at least
// `pixel_fraction` of its pixels have max-min channel spread <= `spread_threshold`
// (8-bit units). Single-channel images are grayscale by definition.
inline bool is_grayscale(const Image& img, int spread_threshold = 8,
                         double pixel_fraction = 0.99) {
    if (img.channels == 1) return true;
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (n == 0) return true;
    std::size_t low_spread = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const std::uint8_t r = img.pixels[p * 3];
        const std::uint8_t g = img.pixels[p * 3 + 1];
        const std::uint8_t b = img.pixels[p * 3 + 2];
        const int hi = std::max(r, std::max(g, b));
        const int lo = std::min(r, std::min(g, b));
        if (hi - lo <= spread_threshold) ++low_spread;
    }
    return static_cast<double>(low_spread) >= pixel_fraction * static_cast<double>(n);
}

}  // namespace perturbkit
