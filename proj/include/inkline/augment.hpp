#pragma once

#include "inkline/image.hpp"
#include "inkline/rng.hpp"

namespace inkline {

struct AugmentConfig {
    double p_translate = 0.5;
    double p_resize = 0.4;
    double p_slant = 0.4;
    double p_elastic = 0.3;
    double p_projective = 0.2;
    double p_morph = 0.1;
    int translate_px = 3;
    double resize_lo = 0.9, resize_hi = 1.1;
    double slant_max = 0.15;
    size_t elastic_spacing = 8;
    double elastic_sigma = 1.5;
    double projective_jitter = 2.0;
    size_t morph_kernel = 3;
    uint64_t rng_seed = 1;

    void validate() const {
        for (double p : {p_translate, p_resize, p_slant, p_elastic, p_projective, p_morph})
            if (p < 0 || p > 1) throw std::invalid_argument("augment: probabilities must be in [0,1]");
        if (elastic_spacing < 4) throw std::invalid_argument("augment: grid spacing must be >= 4");
        if (!(resize_lo > 0 && resize_hi >= resize_lo)) throw std::invalid_argument("augment: bad scale range");
        if (morph_kernel < 3 || morph_kernel % 2 == 0) throw std::invalid_argument("augment: kernel must be odd >= 3");
        if (translate_px < 0 || elastic_sigma < 0 || projective_jitter < 0 || slant_max < 0)
            throw std::invalid_argument("augment: magnitudes must be nonnegative");
    }
};

// Control-point grid displaced by Gaussian(0, sigma) per axis; displacements
// interpolated bilinearly between grid nodes, image resampled through them.
inline GrayImage elastic_distort(const GrayImage& img, size_t spacing, double sigma, Rng& rng) {
    if (spacing < 4) throw std::invalid_argument("elastic: spacing must be >= 4");
    if (sigma < 0) throw std::invalid_argument("elastic: sigma must be >= 0");
    if (img.width == 0 || img.height == 0) return img;
    size_t nx = static_cast<size_t>(img.width - 1) / spacing + 2;
    size_t ny = static_cast<size_t>(img.height - 1) / spacing + 2;
    std::vector<double> dx(nx * ny), dy(nx * ny);
    for (size_t j = 0; j < ny; ++j)
        for (size_t i = 0; i < nx; ++i) {
            dx[j * nx + i] = rng.normal(0.0, sigma);
            dy[j * nx + i] = rng.normal(0.0, sigma);
        }
    GrayImage out(img.width, img.height);
    double sp = static_cast<double>(spacing);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            size_t i = static_cast<size_t>(x) / spacing;
            size_t j = static_cast<size_t>(y) / spacing;
            double tx = (x - i * sp) / sp, ty = (y - j * sp) / sp;
            auto node = [&](size_t ii, size_t jj, const std::vector<double>& d) { return d[jj * nx + ii]; };
            double ddx = (1 - ty) * ((1 - tx) * node(i, j, dx) + tx * node(i + 1, j, dx)) +
                         ty * ((1 - tx) * node(i, j + 1, dx) + tx * node(i + 1, j + 1, dx));
            double ddy = (1 - ty) * ((1 - tx) * node(i, j, dy) + tx * node(i + 1, j, dy)) +
                         ty * ((1 - tx) * node(i, j + 1, dy) + tx * node(i + 1, j + 1, dy));
            out.at(x, y) = sample_bilinear(img, x + ddx, y + ddy, 1.0);
        }
    return out;
}

namespace detail {

// Solve the 8x8 system mapping the four src corners onto dst under a
// homography; returns false if near-singular.
inline bool solve_homography(const double src[4][2], const double dst[4][2], double H[9]) {
    double A[8][9] = {};
    for (int i = 0; i < 4; ++i) {
        double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
        double r0[9] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
        double r1[9] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
        std::copy(r0, r0 + 9, A[2 * i]);
        std::copy(r1, r1 + 9, A[2 * i + 1]);
    }
    for (int col = 0; col < 8; ++col) {
        int piv = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
        if (std::fabs(A[piv][col]) < 1e-9) return false;
        if (piv != col)
            for (int c = 0; c < 9; ++c) std::swap(A[piv][c], A[col][c]);
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            double f = A[r][col] / A[col][col];
            for (int c = col; c < 9; ++c) A[r][c] -= f * A[col][c];
        }
    }
    for (int i = 0; i < 8; ++i) H[i] = A[i][8] / A[i][i];
    H[8] = 1.0;
    return true;
}

}  // namespace detail

// Four corners jittered uniformly within ±jitter; pixels pulled back through
// the dst→src homography with background fill.
inline GrayImage projective_warp(const GrayImage& img, double jitter, Rng& rng) {
    if (img.width < 2 || img.height < 2) return img;
    if (jitter < 0 || jitter >= std::min(img.width, img.height) / 4.0)
        throw std::invalid_argument("projective: jitter must be in [0, min(w,h)/4)");
    if (jitter == 0) return img;
    double w1 = img.width - 1.0, h1 = img.height - 1.0;
    const double src[4][2] = {{0, 0}, {w1, 0}, {w1, h1}, {0, h1}};
    double dst[4][2];
    double H[9];
    for (int attempt = 0; attempt < 100; ++attempt) {
        for (int i = 0; i < 4; ++i) {
            dst[i][0] = src[i][0] + rng.uniform(-jitter, jitter);
            dst[i][1] = src[i][1] + rng.uniform(-jitter, jitter);
        }
        if (detail::solve_homography(dst, src, H)) {  // dst→src pullback
            GrayImage out(img.width, img.height);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) {
                    double d = H[6] * x + H[7] * y + H[8];
                    double sx = (H[0] * x + H[1] * y + H[2]) / d;
                    double sy = (H[3] * x + H[4] * y + H[5]) / d;
                    out.at(x, y) = sample_bilinear(img, sx, sy, 1.0);
                }
            return out;
        }
    }
    return img;  // pathological rng range; keep the sample
}

enum class Morph { erode, dilate };

// Ink-is-dark convention: eroding ink thins strokes (neighbourhood max),
// dilating grows them (neighbourhood min).
inline GrayImage morph(const GrayImage& img, Morph mode, size_t kernel) {
    if (kernel < 3 || kernel % 2 == 0) throw std::invalid_argument("morph: kernel must be odd >= 3");
    int half = static_cast<int>(kernel) / 2;
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double v = img.at(x, y);
            for (int j = -half; j <= half; ++j)
                for (int i = -half; i <= half; ++i) {
                    int xx = x + i, yy = y + j;
                    if (!img.inside(xx, yy)) continue;
                    double p = img.at(xx, yy);
                    v = mode == Morph::dilate ? std::min(v, p) : std::max(v, p);
                }
            out.at(x, y) = v;
        }
    return out;
}

namespace detail {

inline GrayImage translate_img(const GrayImage& img, int dx, int dy) {
    GrayImage out(img.width, img.height, 1.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int sx = x - dx, sy = y - dy;
            if (img.inside(sx, sy)) out.at(x, y) = img.at(sx, sy);
        }
    return out;
}

// scale then center-crop/pad back to the original canvas
inline GrayImage rescale_keep_canvas(const GrayImage& img, double s) {
    int nw = std::max(1, static_cast<int>(std::lround(img.width * s)));
    int nh = std::max(1, static_cast<int>(std::lround(img.height * s)));
    GrayImage r = resize(img, nh, nw);
    GrayImage out(img.width, img.height, 1.0);
    int ox = (img.width - nw) / 2, oy = (img.height - nh) / 2;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int sx = x - ox, sy = y - oy;
            if (r.inside(sx, sy)) out.at(x, y) = r.at(sx, sy);
        }
    return out;
}

}  // namespace detail

// The chain, smoothest first: translate, resize, slant, elastic, projective,
// erode/dilate. Each stage fires independently with its probability; canvas
// dims never change.
inline GrayImage augment(const GrayImage& img, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    if (img.width == 0 || img.height == 0) return img;
    GrayImage x = img;
    if (rng.bernoulli(cfg.p_translate)) {
        int span = 2 * cfg.translate_px + 1;
        int dx = static_cast<int>(rng.uniform_int(static_cast<size_t>(span))) - cfg.translate_px;
        int dy = static_cast<int>(rng.uniform_int(static_cast<size_t>(span))) - cfg.translate_px;
        x = detail::translate_img(x, dx, dy);
    }
    if (rng.bernoulli(cfg.p_resize)) x = detail::rescale_keep_canvas(x, rng.uniform(cfg.resize_lo, cfg.resize_hi));
    if (rng.bernoulli(cfg.p_slant)) {
        double alpha = rng.uniform(-cfg.slant_max, cfg.slant_max);
        AffineMatrix m{1, -alpha, 0.5 * x.width * alpha, 0, 1, 0};
        x = affine_warp(x, m, x.width, x.height, 1.0);
    }
    if (rng.bernoulli(cfg.p_elastic)) x = elastic_distort(x, cfg.elastic_spacing, cfg.elastic_sigma, rng);
    if (rng.bernoulli(cfg.p_projective) && cfg.projective_jitter > 0 &&
        cfg.projective_jitter < std::min(x.width, x.height) / 4.0)
        x = projective_warp(x, cfg.projective_jitter, rng);
    if (rng.bernoulli(cfg.p_morph))
        x = morph(x, rng.bernoulli(0.5) ? Morph::erode : Morph::dilate, cfg.morph_kernel);
    return x;
}

// per-sample, per-epoch stream
inline uint64_t augment_seed(uint64_t base, size_t sample, size_t epoch) { return mix64(base, sample, epoch); }

}  // namespace inkline
