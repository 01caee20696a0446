#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace inkline {

struct ImageError : std::runtime_error {
    enum class Kind { missing_file, corrupt_png, unsupported_format, unwritable, degenerate_transform, zero_area };
    Kind kind;
    ImageError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Row-major grayscale raster, intensities in [0,1]. Convention before the
// final pipeline inversion: 0 = ink, 1 = background.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // height*width

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 1.0) : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// 2x3 row-major affine map (a11,a12,a13; a21,a22,a23).
struct AffineMatrix {
    double a11 = 1, a12 = 0, a13 = 0;
    double a21 = 0, a22 = 1, a23 = 0;

    static AffineMatrix identity() { return {}; }

    std::pair<double, double> apply(double x, double y) const {
        return {a11 * x + a12 * y + a13, a21 * x + a22 * y + a23};
    }

    AffineMatrix inverse() const {
        double det = a11 * a22 - a12 * a21;
        if (std::fabs(det) < 1e-12)
            throw ImageError(ImageError::Kind::degenerate_transform, "singular affine matrix");
        AffineMatrix r;
        r.a11 = a22 / det;
        r.a12 = -a12 / det;
        r.a21 = -a21 / det;
        r.a22 = a11 / det;
        r.a13 = -(r.a11 * a13 + r.a12 * a23);
        r.a23 = -(r.a21 * a13 + r.a22 * a23);
        return r;
    }

    // this ∘ other (apply other first)
    AffineMatrix compose(const AffineMatrix& o) const {
        AffineMatrix r;
        r.a11 = a11 * o.a11 + a12 * o.a21;
        r.a12 = a11 * o.a12 + a12 * o.a22;
        r.a13 = a11 * o.a13 + a12 * o.a23 + a13;
        r.a21 = a21 * o.a11 + a22 * o.a21;
        r.a22 = a21 * o.a12 + a22 * o.a22;
        r.a23 = a21 * o.a13 + a22 * o.a23 + a23;
        return r;
    }
};

inline GrayImage invert(const GrayImage& img) {
    GrayImage out = img;
    for (double& p : out.pixels) p = 1.0 - p;
    return out;
}

// Bilinear sample at (fx,fy); neighbors outside the raster contribute `fill`.
inline double sample_bilinear(const GrayImage& img, double fx, double fy, double fill) {
    double x0f = std::floor(fx), y0f = std::floor(fy);
    int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
    double tx = fx - x0f, ty = fy - y0f;
    auto px = [&](int x, int y) { return img.inside(x, y) ? img.at(x, y) : fill; };
    double top = px(x0, y0) * (1 - tx) + px(x0 + 1, y0) * tx;
    double bot = px(x0, y0 + 1) * (1 - tx) + px(x0 + 1, y0 + 1) * tx;
    return top * (1 - ty) + bot * ty;
}

// Clamp-to-edge bilinear sample (resize semantics: constants stay constant).
inline double sample_clamped(const GrayImage& img, double fx, double fy) {
    auto clamp = [](double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); };
    fx = clamp(fx, 0.0, img.width - 1.0);
    fy = clamp(fy, 0.0, img.height - 1.0);
    return sample_bilinear(img, fx, fy, 0.0);
}

// Destination-scan warp: each output pixel samples the source at m^-1·(x,y).
inline GrayImage affine_warp(const GrayImage& img, const AffineMatrix& m, int out_w, int out_h, double fill) {
    if (out_w < 1 || out_h < 1) throw ImageError(ImageError::Kind::zero_area, "warp output must be at least 1x1");
    AffineMatrix inv = m.inverse();
    GrayImage out(out_w, out_h, fill);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            auto [sx, sy] = inv.apply(x, y);
            out.at(x, y) = sample_bilinear(img, sx, sy, fill);
        }
    return out;
}

inline GrayImage resize(const GrayImage& img, int target_h, int target_w) {
    if (img.width == 0 || img.height == 0) throw ImageError(ImageError::Kind::zero_area, "resize of empty image");
    if (target_h < 1 || target_w < 1) throw ImageError(ImageError::Kind::zero_area, "resize target must be at least 1x1");
    GrayImage out(target_w, target_h);
    double sx = static_cast<double>(img.width) / target_w;
    double sy = static_cast<double>(img.height) / target_h;
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x)
            out.at(x, y) = sample_clamped(img, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    return out;
}

// keep-aspect variant: width follows the height scale
inline GrayImage resize_height(const GrayImage& img, int target_h) {
    int w = static_cast<int>(std::lround(static_cast<double>(img.width) * target_h / img.height));
    return resize(img, target_h, w < 1 ? 1 : w);
}

enum class Extreme { bottom, top };

// One point per column that contains ink (intensity below fg_threshold in the
// pre-invert convention); empty columns are omitted.
inline std::vector<std::pair<int, int>> column_extrema(const GrayImage& img, double fg_threshold, Extreme which) {
    std::vector<std::pair<int, int>> pts;
    for (int x = 0; x < img.width; ++x) {
        int found = -1;
        if (which == Extreme::bottom) {
            for (int y = img.height - 1; y >= 0; --y)
                if (img.at(x, y) < fg_threshold) { found = y; break; }
        } else {
            for (int y = 0; y < img.height; ++y)
                if (img.at(x, y) < fg_threshold) { found = y; break; }
        }
        if (found >= 0) pts.emplace_back(x, found);
    }
    return pts;
}

inline GrayImage load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw ImageError(ImageError::Kind::missing_file, "cannot open " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp) != 8 || png_sig_cmp(header, 0, 8)) {
        std::fclose(fp);
        throw ImageError(ImageError::Kind::corrupt_png, "not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ImageError(ImageError::Kind::corrupt_png, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ImageError(ImageError::Kind::corrupt_png, "corrupt PNG: " + path);
    }
    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w, h;
    int bit_depth, color_type;
    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (bit_depth != 8 && bit_depth != 16) {
        if (color_type == PNG_COLOR_TYPE_PALETTE || bit_depth < 8) {
            // sub-byte gray and palettes are expanded below
        } else {
            png_destroy_read_struct(&png, &info, nullptr);
            std::fclose(fp);
            throw ImageError(ImageError::Kind::unsupported_format, "unsupported PNG bit depth");
        }
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    int channels = png_get_channels(png, info);
    size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> data(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 y = 0; y < h; ++y) {
        const png_byte* row = rows[y];
        for (png_uint_32 x = 0; x < w; ++x) {
            double acc = 0;
            for (int c = 0; c < channels; ++c) {
                size_t i = (x * channels + c) * (bit_depth == 16 ? 2 : 1);
                double v = bit_depth == 16 ? (row[i] * 256.0 + row[i + 1]) : row[i];
                acc += v;
            }
            img.at(static_cast<int>(x), static_cast<int>(y)) = acc / channels / maxval;
        }
    }
    return img;
}

inline void save_png(const GrayImage& img, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw ImageError(ImageError::Kind::unwritable, "cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw ImageError(ImageError::Kind::unwritable, "libpng write failed for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v = img.at(x, y);
            v = v < 0 ? 0 : (v > 1 ? 1 : v);
            row[x] = static_cast<png_byte>(std::lround(v * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace inkline
