#ifndef TRACKDIFF_IMAGE_HPP_
#define TRACKDIFF_IMAGE_HPP_

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include <png.h>

#include "trackdiff/errors.hpp"

namespace trackdiff {

// 8-bit grayscale raster.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, width*height

    std::uint8_t at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
};

struct MaskRect {
    int x = 0, y = 0, width = 0, height = 0;

    bool contains(int px, int py) const {
        return px >= x && px < x + width && py >= y && py < y + height;
    }
    bool operator==(const MaskRect&) const = default;
};

// Screen regions excluded from appearance comparison because they change
// between back-to-back screenshots of the same page.
struct DynamismMask {
    std::vector<MaskRect> rects;

    bool covers(int x, int y) const {
        for (const MaskRect& r : rects)
            if (r.contains(x, y)) return true;
        return false;
    }
    bool empty() const { return rects.empty(); }
};

namespace detail {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
}  // namespace detail

inline GrayImage load_png_gray(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw UnreadableImage(path.string() + ": cannot open");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw UnreadableImage(path.string() + ": png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw UnreadableImage(path.string() + ": png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw UnreadableImage(path.string() + ": malformed PNG");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize any color type to 8-bit grayscale.
    png_byte color_type = png_get_color_type(png, info);
    png_byte bit_depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
        color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);  // Rec.601 luma
    png_read_update_info(png, info);

    GrayImage img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);

    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = img.pixels.data() + static_cast<std::size_t>(y) * img.width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_gray(const GrayImage& img, const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error(path.string() + ": cannot write");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(path.string() + ": png init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(path.string() + ": png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(path.string() + ": png write failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline constexpr int kEmbeddingGrid = 16;
inline constexpr int kEmbeddingDim = kEmbeddingGrid * kEmbeddingGrid;
inline constexpr int kDefaultPixelTolerance = 10;  // of 255

// Default screenshot embedder: mask-excluded grayscale intensities,
// average-pooled on a 16x16 grid, L2-normalized. A fully masked image
// embeds as the zero vector.
inline std::vector<float> embed_gray(const GrayImage& img, const DynamismMask& mask) {
    std::vector<double> sums(kEmbeddingDim, 0.0);
    std::vector<std::int64_t> counts(kEmbeddingDim, 0);
    for (int y = 0; y < img.height; ++y) {
        int cy = img.height > 0 ? y * kEmbeddingGrid / img.height : 0;
        for (int x = 0; x < img.width; ++x) {
            if (mask.covers(x, y)) continue;
            int cx = x * kEmbeddingGrid / img.width;
            int cell = cy * kEmbeddingGrid + cx;
            sums[static_cast<std::size_t>(cell)] += img.at(x, y);
            ++counts[static_cast<std::size_t>(cell)];
        }
    }
    std::vector<float> out(kEmbeddingDim, 0.0f);
    double norm2 = 0;
    for (int i = 0; i < kEmbeddingDim; ++i) {
        double v = counts[static_cast<std::size_t>(i)] > 0
                       ? sums[static_cast<std::size_t>(i)] / counts[static_cast<std::size_t>(i)]
                       : 0.0;
        out[static_cast<std::size_t>(i)] = static_cast<float>(v);
        norm2 += v * v;
    }
    if (norm2 > 0) {
        double norm = std::sqrt(norm2);
        for (float& v : out) v = static_cast<float>(v / norm);
    }
    return out;
}

inline std::vector<float> embed_screenshot(const std::filesystem::path& image,
                                           const DynamismMask& mask = {}) {
    return embed_gray(load_png_gray(image), mask);
}

// Cosine between embeddings; the zero vector is dissimilar to everything
// (including itself) by convention.
inline double embedding_cosine(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) return 0.0;
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return std::min(1.0, dot / (std::sqrt(na) * std::sqrt(nb)));
}

// Bounding rectangles of 8-connected regions whose per-pixel intensity
// delta exceeds the tolerance. Differing dimensions mask the full frame.
inline DynamismMask dynamism_mask_of(const GrayImage& a, const GrayImage& b,
                                     int pixel_tolerance = kDefaultPixelTolerance) {
    DynamismMask mask;
    if (a.width != b.width || a.height != b.height) {
        mask.rects.push_back({0, 0, std::max(a.width, b.width), std::max(a.height, b.height)});
        return mask;
    }
    const int w = a.width, h = a.height;
    std::vector<char> diff(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            diff[static_cast<std::size_t>(y) * w + x] =
                std::abs(static_cast<int>(a.at(x, y)) - static_cast<int>(b.at(x, y))) > pixel_tolerance;

    std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!diff[idx] || seen[idx]) continue;
            int min_x = x, max_x = x, min_y = y, max_y = y;
            std::queue<std::pair<int, int>> frontier;
            frontier.emplace(x, y);
            seen[idx] = 1;
            while (!frontier.empty()) {
                auto [cx, cy] = frontier.front();
                frontier.pop();
                min_x = std::min(min_x, cx);
                max_x = std::max(max_x, cx);
                min_y = std::min(min_y, cy);
                max_y = std::max(max_y, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (diff[nidx] && !seen[nidx]) {
                            seen[nidx] = 1;
                            frontier.emplace(nx, ny);
                        }
                    }
                }
            }
            mask.rects.push_back({min_x, min_y, max_x - min_x + 1, max_y - min_y + 1});
        }
    }
    return mask;
}

inline DynamismMask dynamism_mask(const std::filesystem::path& shot1,
                                  const std::filesystem::path& shot2,
                                  int pixel_tolerance = kDefaultPixelTolerance) {
    return dynamism_mask_of(load_png_gray(shot1), load_png_gray(shot2), pixel_tolerance);
}

inline DynamismMask mask_union(const DynamismMask& a, const DynamismMask& b) {
    DynamismMask out = a;
    out.rects.insert(out.rects.end(), b.rects.begin(), b.rects.end());
    return out;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_IMAGE_HPP_
