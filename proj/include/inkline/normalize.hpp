#pragma once

#include "inkline/image.hpp"
#include "inkline/rng.hpp"

namespace inkline {

struct NormalizeConfig {
    size_t target_height = 48;
    size_t target_width = 192;
    enum class Pad { left, right };
    Pad pad_side = Pad::left;
    size_t contrast_window = 25;  // odd
    double contrast_k = 0.2;
    double contrast_range = 0.5;  // dynamic-range constant R
    size_t ransac_iterations = 200;
    double ransac_tolerance = 2.0;  // pixels
    double fg_threshold = 0.5;
    uint64_t seed = 1;

    void validate() const {
        if (target_height < 8 || target_width < 8) throw std::invalid_argument("normalize: target dims must be >= 8");
        if (!(contrast_k > 0 && contrast_k < 1)) throw std::invalid_argument("normalize: k must be in (0,1)");
        if (contrast_window < 3 || contrast_window % 2 == 0)
            throw std::invalid_argument("normalize: window must be odd and >= 3");
        if (ransac_iterations < 1) throw std::invalid_argument("normalize: need at least 1 ransac iteration");
        if (contrast_range <= 0) throw std::invalid_argument("normalize: R must be positive");
    }
};

struct ZoneLines {
    int baseline_y = 0;
    int upperline_y = 0;
};

struct SlantEstimate {
    double alpha = 0.0;
    size_t evidence_left = 0, evidence_center = 0, evidence_right = 0;
};

// Local adaptive contrast: threshold t = m·(1 + k·(s/R − 1)) from the boxed
// mean/stddev, then a linear ramp over [t−s, t+s]. Flat windows (s = 0) are
// background. Integral images keep it O(pixels).
inline GrayImage enhance_contrast(const GrayImage& img, const NormalizeConfig& cfg) {
    cfg.validate();
    int w = img.width, h = img.height;
    GrayImage out(w, h);
    if (w == 0 || h == 0) return out;

    // (w+1)x(h+1) prefix sums
    std::vector<double> s1(static_cast<size_t>(w + 1) * (h + 1), 0.0);
    std::vector<double> s2(static_cast<size_t>(w + 1) * (h + 1), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double p = img.at(x, y);
            size_t i = static_cast<size_t>(y + 1) * (w + 1) + (x + 1);
            size_t up = i - (w + 1);
            s1[i] = p + s1[i - 1] + s1[up] - s1[up - 1];
            s2[i] = p * p + s2[i - 1] + s2[up] - s2[up - 1];
        }
    auto box = [&](const std::vector<double>& s, int x0, int y0, int x1, int y1) {
        size_t a = static_cast<size_t>(y0) * (w + 1) + x0;
        size_t b = static_cast<size_t>(y1 + 1) * (w + 1) + (x1 + 1);
        size_t c = static_cast<size_t>(y0) * (w + 1) + (x1 + 1);
        size_t d = static_cast<size_t>(y1 + 1) * (w + 1) + x0;
        return s[b] + s[a] - s[c] - s[d];
    };

    int half = static_cast<int>(cfg.contrast_window) / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int x0 = std::max(0, x - half), x1 = std::min(w - 1, x + half);
            int y0 = std::max(0, y - half), y1 = std::min(h - 1, y + half);
            double n = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
            double m = box(s1, x0, y0, x1, y1) / n;
            double var = box(s2, x0, y0, x1, y1) / n - m * m;
            double sd = var > 0 ? std::sqrt(var) : 0.0;
            if (sd < 1e-12) {
                out.at(x, y) = 1.0;
                continue;
            }
            double t = m * (1.0 + cfg.contrast_k * (sd / cfg.contrast_range - 1.0));
            double v = (img.at(x, y) - (t - sd)) / (2.0 * sd);
            out.at(x, y) = std::clamp(v, 0.0, 1.0);
        }
    return out;
}

namespace detail {

// RANSAC line fit y = a·x + b; returns false with fewer than 2 points.
inline bool ransac_line(const std::vector<std::pair<int, int>>& pts, size_t iterations, double tolerance, Rng& rng,
                        double& a_out, double& b_out) {
    if (pts.size() < 2) return false;
    size_t best_count = 0;
    double best_a = 0, best_b = 0;
    for (size_t it = 0; it < iterations; ++it) {
        size_t i = rng.uniform_int(pts.size());
        size_t j = rng.uniform_int(pts.size());
        if (i == j || pts[i].first == pts[j].first) continue;
        double a = static_cast<double>(pts[j].second - pts[i].second) / (pts[j].first - pts[i].first);
        double b = pts[i].second - a * pts[i].first;
        size_t count = 0;
        for (const auto& [x, y] : pts)
            if (std::fabs(y - (a * x + b)) <= tolerance) ++count;
        if (count > best_count) {
            best_count = count;
            best_a = a;
            best_b = b;
        }
    }
    if (best_count < 2) return false;
    // least-squares refit over the winning consensus set
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t n = 0;
    for (const auto& [x, y] : pts)
        if (std::fabs(y - (best_a * x + best_b)) <= tolerance) {
            sx += x;
            sy += y;
            sxx += static_cast<double>(x) * x;
            sxy += static_cast<double>(x) * y;
            ++n;
        }
    double den = n * sxx - sx * sx;
    if (n < 2 || std::fabs(den) < 1e-9) {
        a_out = best_a;
        b_out = best_b;
    } else {
        a_out = (n * sxy - sx * sy) / den;
        b_out = (sy - a_out * sx) / n;
    }
    return true;
}

// RANSAC fit of a horizontal line y = y0 (intercept only).
inline bool ransac_intercept(const std::vector<std::pair<int, int>>& pts, size_t iterations, double tolerance,
                             Rng& rng, int& y_out) {
    if (pts.size() < 2) return false;
    size_t best_count = 0;
    double best_y = 0;
    for (size_t it = 0; it < iterations; ++it) {
        double y0 = pts[rng.uniform_int(pts.size())].second;
        size_t count = 0;
        for (const auto& [x, y] : pts) {
            (void)x;
            if (std::fabs(y - y0) <= tolerance) ++count;
        }
        if (count > best_count) {
            best_count = count;
            best_y = y0;
        }
    }
    if (best_count < 2) return false;
    double sum = 0;
    size_t n = 0;
    for (const auto& [x, y] : pts) {
        (void)x;
        if (std::fabs(y - best_y) <= tolerance) {
            sum += y;
            ++n;
        }
    }
    y_out = static_cast<int>(std::lround(sum / n));
    return true;
}

}  // namespace detail

inline double estimate_slope(const GrayImage& img, const NormalizeConfig& cfg) {
    auto pts = column_extrema(img, cfg.fg_threshold, Extreme::bottom);
    Rng rng(mix64(cfg.seed, 0x510b));
    double a = 0, b = 0;
    if (!detail::ransac_line(pts, cfg.ransac_iterations, cfg.ransac_tolerance, rng, a, b)) return 0.0;
    return std::atan(a);
}

// Rotation by −angle about the centre, canvas grown to the rotated bounds.
inline GrayImage correct_slope(const GrayImage& img, double angle) {
    if (img.width == 0 || img.height == 0) return img;
    if (angle == 0.0) return img;
    double c = std::cos(-angle), s = std::sin(-angle);
    double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    AffineMatrix rot{c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy};
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (double px : {-0.5, img.width - 0.5})
        for (double py : {-0.5, img.height - 0.5}) {
            auto [qx, qy] = rot.apply(px, py);
            xmin = std::min(xmin, qx);
            xmax = std::max(xmax, qx);
            ymin = std::min(ymin, qy);
            ymax = std::max(ymax, qy);
        }
    int out_w = static_cast<int>(std::ceil(xmax - xmin));
    int out_h = static_cast<int>(std::ceil(ymax - ymin));
    AffineMatrix shift{1, 0, -xmin - 0.5, 0, 1, -ymin - 0.5};
    return affine_warp(img, shift.compose(rot), out_w, out_h, 1.0);
}

// Slant evidence: each right-boundary ink pixel votes by which of the three
// neighbours in the next row continues the stroke. Rows grow downward here,
// so "next row" is the row below; with that orientation the recovered alpha
// is exactly the tangent the correction matrix removes.
inline SlantEstimate estimate_slant(const GrayImage& img, const NormalizeConfig& cfg) {
    SlantEstimate e;
    for (int y = 0; y + 1 < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (img.at(x, y) >= cfg.fg_threshold) continue;  // not ink
            bool right_bg = x + 1 >= img.width || img.at(x + 1, y) >= cfg.fg_threshold;
            if (!right_bg) continue;
            auto ink = [&](int xx, int yy) { return img.inside(xx, yy) && img.at(xx, yy) < cfg.fg_threshold; };
            if (ink(x - 1, y + 1)) ++e.evidence_left;
            if (ink(x, y + 1)) ++e.evidence_center;
            if (ink(x + 1, y + 1)) ++e.evidence_right;
        }
    size_t total = e.evidence_left + e.evidence_center + e.evidence_right;
    e.alpha = total ? static_cast<double>(e.evidence_right) - static_cast<double>(e.evidence_left) : 0.0;
    if (total) e.alpha /= static_cast<double>(total);
    return e;
}

// Shear (1, −α, 0.5·w·α; 0, 1, 0); same canvas, background fill.
inline GrayImage correct_slant(const GrayImage& img, double alpha) {
    if (img.width == 0 || img.height == 0) return img;
    if (alpha == 0.0) return img;
    AffineMatrix m{1, -alpha, 0.5 * img.width * alpha, 0, 1, 0};
    return affine_warp(img, m, img.width, img.height, 1.0);
}

inline ZoneLines detect_zones(const GrayImage& img, const NormalizeConfig& cfg) {
    ZoneLines z{img.height - 1, 0};
    auto bottoms = column_extrema(img, cfg.fg_threshold, Extreme::bottom);
    auto tops = column_extrema(img, cfg.fg_threshold, Extreme::top);
    Rng rng(mix64(cfg.seed, 0x20e5));
    int base = 0, upper = 0;
    bool ok_b = detail::ransac_intercept(bottoms, cfg.ransac_iterations, cfg.ransac_tolerance, rng, base);
    bool ok_u = detail::ransac_intercept(tops, cfg.ransac_iterations, cfg.ransac_tolerance, rng, upper);
    if (!ok_b || !ok_u || upper >= base) return z;  // degenerate: full image is core
    z.baseline_y = std::clamp(base, 0, img.height - 1);
    z.upperline_y = std::clamp(upper, 0, img.height - 1);
    if (z.upperline_y >= z.baseline_y) return {img.height - 1, 0};
    return z;
}

// Rescale ascender (above upperline) and descender (below baseline) regions
// by r = h_cr/h_r when they are taller than the core; the core rows are
// copied untouched.
inline GrayImage normalize_zones(const GrayImage& img, const ZoneLines& zones) {
    if (img.width == 0 || img.height == 0) return img;
    if (!(0 <= zones.upperline_y && zones.upperline_y < zones.baseline_y && zones.baseline_y < img.height))
        throw std::invalid_argument("normalize_zones: bad zone lines");
    int h_cr = zones.baseline_y - zones.upperline_y;
    auto region = [&](int y0, int rows) {
        GrayImage r(img.width, rows);
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < img.width; ++x) r.at(x, y) = img.at(x, y0 + y);
        return r;
    };
    auto scaled_rows = [&](int h_r) {
        if (h_r <= h_cr) return h_r;  // r = 1
        double r = static_cast<double>(h_cr) / h_r;
        int nh = static_cast<int>(std::lround(h_r * r));
        return std::max(1, nh);
    };

    int asc_rows = zones.upperline_y;
    int desc_rows = img.height - 1 - zones.baseline_y;
    int core_rows = h_cr + 1;  // rows upperline..baseline inclusive
    int na = asc_rows > 0 ? scaled_rows(asc_rows) : 0;
    int nd = desc_rows > 0 ? scaled_rows(desc_rows) : 0;

    GrayImage out(img.width, na + core_rows + nd, 1.0);
    int oy = 0;
    if (asc_rows > 0) {
        GrayImage a = region(0, asc_rows);
        if (na != asc_rows) a = resize(a, na, img.width);
        for (int y = 0; y < na; ++y)
            for (int x = 0; x < img.width; ++x) out.at(x, oy + y) = a.at(x, y);
        oy += na;
    }
    for (int y = 0; y < core_rows; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, oy + y) = img.at(x, zones.upperline_y + y);
    oy += core_rows;
    if (desc_rows > 0) {
        GrayImage d = region(zones.baseline_y + 1, desc_rows);
        if (nd != desc_rows) d = resize(d, nd, img.width);
        for (int y = 0; y < nd; ++y)
            for (int x = 0; x < img.width; ++x) out.at(x, oy + y) = d.at(x, y);
    }
    return out;
}

// Trim empty side borders (top/bottom kept), scale to target height keeping
// aspect, pad with background columns to target width. Wider-than-target
// words are squeezed to fit and flagged.
inline GrayImage crop_resize(const GrayImage& img, const NormalizeConfig& cfg, bool* aspect_broken = nullptr) {
    cfg.validate();
    if (aspect_broken) *aspect_broken = false;
    int th = static_cast<int>(cfg.target_height), tw = static_cast<int>(cfg.target_width);

    int first = -1, last = -1;
    for (int x = 0; x < img.width; ++x) {
        bool ink = false;
        for (int y = 0; y < img.height && !ink; ++y) ink = img.at(x, y) < cfg.fg_threshold;
        if (ink) {
            if (first < 0) first = x;
            last = x;
        }
    }
    if (first < 0) return GrayImage(tw, th, 1.0);

    GrayImage cropped(last - first + 1, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < cropped.width; ++x) cropped.at(x, y) = img.at(first + x, y);

    GrayImage scaled = resize_height(cropped, th);
    if (scaled.width > tw) {
        if (aspect_broken) *aspect_broken = true;
        return resize(scaled, th, tw);
    }
    if (scaled.width == tw) return scaled;

    GrayImage out(tw, th, 1.0);
    int off = cfg.pad_side == NormalizeConfig::Pad::left ? tw - scaled.width : 0;
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < scaled.width; ++x) out.at(off + x, y) = scaled.at(x, y);
    return out;
}

constexpr double kMaxSlopeAngle = 0.78;  // just under π/4; larger fits are treated as degenerate

inline GrayImage normalize_pipeline(const GrayImage& img, const NormalizeConfig& cfg, bool* aspect_broken = nullptr) {
    cfg.validate();
    GrayImage x = enhance_contrast(img, cfg);
    double angle = estimate_slope(x, cfg);
    if (std::fabs(angle) < kMaxSlopeAngle) x = correct_slope(x, angle);
    x = correct_slant(x, estimate_slant(x, cfg).alpha);
    ZoneLines z = detect_zones(x, cfg);
    if (z.upperline_y < z.baseline_y && !(z.upperline_y == 0 && z.baseline_y == x.height - 1))
        x = normalize_zones(x, z);
    x = crop_resize(x, cfg, aspect_broken);
    return invert(x);
}

}  // namespace inkline
