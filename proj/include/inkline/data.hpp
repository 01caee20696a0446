#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "inkline/image.hpp"
#include "inkline/rng.hpp"

namespace inkline {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Partition { train, validation, test };

inline const char* partition_name(Partition p) {
    switch (p) {
        case Partition::train: return "train";
        case Partition::validation: return "validation";
        default: return "test";
    }
}

inline Partition parse_partition(const std::string& s) {
    if (s == "train") return Partition::train;
    if (s == "validation") return Partition::validation;
    if (s == "test") return Partition::test;
    throw DataError("unknown partition: " + s);
}

struct ManifestEntry {
    std::string path;
    std::string transcription;
    Partition partition = Partition::train;
    bool ok = true;
};

// TSV, header `path<TAB>transcription<TAB>partition<TAB>ok`
inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != "path\ttranscription\tpartition\tok")
                throw DataError(path + ":1: bad manifest header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cols;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() != 4)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 columns, got " +
                            std::to_string(cols.size()));
        ManifestEntry e;
        e.path = cols[0];
        e.transcription = cols[1];
        try {
            e.partition = parse_partition(cols[2]);
        } catch (const DataError&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": unknown partition '" + cols[2] + "'");
        }
        if (cols[3] == "1" || cols[3] == "true") e.ok = true;
        else if (cols[3] == "0" || cols[3] == "false") e.ok = false;
        else throw DataError(path + ":" + std::to_string(lineno) + ": bad ok flag '" + cols[3] + "'");
        if (!seen.insert(e.path).second)
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate path '" + e.path + "'");
        out.push_back(std::move(e));
    }
    return out;
}

inline void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write manifest: " + path);
    f << "path\ttranscription\tpartition\tok\n";
    for (const auto& e : entries) {
        if (e.path.find_first_of("\t\n") != std::string::npos ||
            e.transcription.find_first_of("\t\n") != std::string::npos)
            throw DataError("manifest fields must not contain tabs or newlines: " + e.path);
        f << e.path << '\t' << e.transcription << '\t' << partition_name(e.partition) << '\t' << (e.ok ? '1' : '0')
          << '\n';
    }
    if (!f) throw DataError("write failed: " + path);
}

// drop segmentation failures and crossed-out ('#') words
inline std::vector<ManifestEntry> filter_iam_style(const std::vector<ManifestEntry>& entries) {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.ok && e.transcription != "#") out.push_back(e);
    return out;
}

struct Sample {
    GrayImage image;
    std::string text;
};

inline std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                                        Partition part) {
    std::vector<Sample> out;
    for (const auto& e : entries) {
        if (e.partition != part) continue;
        std::filesystem::path p(e.path);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        out.push_back({load_png(p.string()), e.transcription});
    }
    return out;
}

// filenames carrying their transcription as hex byte pairs
inline std::string encode_hex_filename(const std::string& text) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned char c : text) {
        out += digits[c >> 4];
        out += digits[c & 15];
    }
    return out;
}

inline std::optional<std::string> decode_hex_filename(const std::string& stem) {
    if (stem.empty() || stem.size() % 2) return std::nullopt;
    std::string out;
    for (size_t i = 0; i < stem.size(); i += 2) {
        int hi = -1, lo = -1;
        auto hex = [](char c) {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            return -1;
        };
        hi = hex(stem[i]);
        lo = hex(stem[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out += static_cast<char>(hi * 16 + lo);
    }
    return out;
}

enum class VClass { ascender, descender, core };

inline const char* vclass_name(VClass v) {
    switch (v) {
        case VClass::ascender: return "ascender";
        case VClass::descender: return "descender";
        default: return "core";
    }
}

inline VClass parse_vclass(const std::string& s) {
    if (s == "ascender") return VClass::ascender;
    if (s == "descender") return VClass::descender;
    if (s == "core") return VClass::core;
    throw DataError("unknown vertical class: " + s);
}

// Exemplar images all share one vertical band layout: ascender zone on top,
// core, then descender zone; pasting them bottom-aligned lines their
// baselines up automatically.
struct GlyphSet {
    std::map<uint32_t, std::vector<GrayImage>> glyphs;
    std::map<uint32_t, VClass> classes;
    int ascender_px = 12, core_px = 24, descender_px = 12;

    int band_height() const { return ascender_px + core_px + descender_px; }
    int baseline_row() const { return ascender_px + core_px; }

    bool has_word(const std::string& word) const;
};

namespace detail {

struct Seg {
    double x1, y1, x2, y2;
};

constexpr double kPi = 3.14159265358979323846;

inline void add_circle(std::vector<Seg>& s, double cx, double cy, double r, int n = 12) {
    double px = cx + r, py = cy;
    for (int i = 1; i <= n; ++i) {
        double a = 2 * kPi * i / n;
        double qx = cx + r * std::cos(a), qy = cy + r * std::sin(a);
        s.push_back({px, py, qx, qy});
        px = qx;
        py = qy;
    }
}

inline void add_arc(std::vector<Seg>& s, double cx, double cy, double r, double a0, double a1, int n = 8) {
    double px = cx + r * std::cos(a0), py = cy + r * std::sin(a0);
    for (int i = 1; i <= n; ++i) {
        double a = a0 + (a1 - a0) * i / n;
        double qx = cx + r * std::cos(a), qy = cy + r * std::sin(a);
        s.push_back({px, py, qx, qy});
        px = qx;
        py = qy;
    }
}

// seven-segment digit bars: top/mid/bottom horizontals, four verticals
inline std::vector<Seg> seven_seg(const char* mask) {
    const double xl = 0.15, xr = 0.85, yt = -0.45, ym = 0.25, yb = 0.95;
    const Seg bars[7] = {
        {xl, yt, xr, yt},  // A top
        {xr, yt, xr, ym},  // B top-right
        {xr, ym, xr, yb},  // C bottom-right
        {xl, yb, xr, yb},  // D bottom
        {xl, ym, xl, yb},  // E bottom-left
        {xl, yt, xl, ym},  // F top-left
        {xl, ym, xr, ym},  // G middle
    };
    std::vector<Seg> out;
    for (int i = 0; i < 7; ++i)
        if (mask[i] == '1') out.push_back(bars[i]);
    return out;
}

// glyph-local coordinates: x in [0,1]; y = 0 at the upperline, 1 at the
// baseline, ascenders reach toward -0.5 and descenders toward 1.5
inline const std::map<uint32_t, std::vector<Seg>>& glyph_strokes() {
    static const std::map<uint32_t, std::vector<Seg>> table = [] {
        std::map<uint32_t, std::vector<Seg>> t;
        auto& a = t['a'];
        add_circle(a, 0.45, 0.52, 0.36);
        a.push_back({0.81, 0.12, 0.81, 1.0});
        auto& b = t['b'];
        b.push_back({0.16, -0.5, 0.16, 1.0});
        add_circle(b, 0.5, 0.55, 0.34);
        auto& c = t['c'];
        add_arc(c, 0.55, 0.5, 0.4, kPi / 4, 7 * kPi / 4);
        auto& d = t['d'];
        d.push_back({0.84, -0.5, 0.84, 1.0});
        add_circle(d, 0.5, 0.55, 0.34);
        auto& e = t['e'];
        add_circle(e, 0.5, 0.5, 0.38);
        e.push_back({0.12, 0.5, 0.88, 0.5});
        auto& f = t['f'];
        f.push_back({0.5, -0.32, 0.5, 1.0});
        f.push_back({0.5, -0.32, 0.78, -0.48});
        f.push_back({0.18, 0.08, 0.8, 0.08});
        auto& g = t['g'];
        add_circle(g, 0.48, 0.45, 0.33);
        g.push_back({0.81, 0.12, 0.81, 1.25});
        g.push_back({0.81, 1.25, 0.4, 1.45});
        auto& h = t['h'];
        h.push_back({0.16, -0.5, 0.16, 1.0});
        h.push_back({0.16, 0.5, 0.45, 0.08});
        h.push_back({0.45, 0.08, 0.84, 0.45});
        h.push_back({0.84, 0.45, 0.84, 1.0});
        auto& i = t['i'];
        i.push_back({0.5, 0.15, 0.5, 1.0});
        i.push_back({0.5, -0.25, 0.5, -0.15});
        auto& j = t['j'];
        j.push_back({0.6, 0.15, 0.6, 1.25});
        j.push_back({0.6, 1.25, 0.3, 1.45});
        j.push_back({0.6, -0.25, 0.6, -0.15});
        auto& k = t['k'];
        k.push_back({0.16, -0.5, 0.16, 1.0});
        k.push_back({0.8, 0.08, 0.16, 0.55});
        k.push_back({0.42, 0.42, 0.84, 1.0});
        auto& l = t['l'];
        l.push_back({0.5, -0.5, 0.5, 1.0});
        auto& m = t['m'];
        m.push_back({0.1, 0.08, 0.1, 1.0});
        m.push_back({0.1, 0.32, 0.3, 0.05});
        m.push_back({0.3, 0.05, 0.5, 0.32});
        m.push_back({0.5, 0.32, 0.5, 1.0});
        m.push_back({0.5, 0.32, 0.7, 0.05});
        m.push_back({0.7, 0.05, 0.9, 0.32});
        m.push_back({0.9, 0.32, 0.9, 1.0});
        auto& n = t['n'];
        n.push_back({0.16, 0.08, 0.16, 1.0});
        n.push_back({0.16, 0.35, 0.5, 0.05});
        n.push_back({0.5, 0.05, 0.84, 0.35});
        n.push_back({0.84, 0.35, 0.84, 1.0});
        auto& o = t['o'];
        add_circle(o, 0.5, 0.52, 0.37);
        auto& p = t['p'];
        p.push_back({0.16, 0.08, 0.16, 1.5});
        add_circle(p, 0.52, 0.5, 0.33);
        auto& q = t['q'];
        q.push_back({0.84, 0.08, 0.84, 1.5});
        add_circle(q, 0.48, 0.5, 0.33);
        auto& r = t['r'];
        r.push_back({0.2, 0.08, 0.2, 1.0});
        r.push_back({0.2, 0.4, 0.5, 0.08});
        r.push_back({0.5, 0.08, 0.8, 0.22});
        auto& sgl = t['s'];
        sgl.push_back({0.8, 0.14, 0.32, 0.05});
        sgl.push_back({0.32, 0.05, 0.2, 0.3});
        sgl.push_back({0.2, 0.3, 0.8, 0.65});
        sgl.push_back({0.8, 0.65, 0.68, 0.95});
        sgl.push_back({0.68, 0.95, 0.2, 0.88});
        auto& tt = t['t'];
        tt.push_back({0.45, -0.3, 0.45, 0.88});
        tt.push_back({0.45, 0.88, 0.72, 1.0});
        tt.push_back({0.15, 0.08, 0.8, 0.08});
        auto& u = t['u'];
        u.push_back({0.15, 0.05, 0.15, 0.7});
        u.push_back({0.15, 0.7, 0.5, 1.0});
        u.push_back({0.5, 1.0, 0.85, 0.7});
        u.push_back({0.85, 0.05, 0.85, 1.0});
        auto& v = t['v'];
        v.push_back({0.15, 0.05, 0.5, 1.0});
        v.push_back({0.5, 1.0, 0.85, 0.05});
        auto& w = t['w'];
        w.push_back({0.08, 0.05, 0.3, 1.0});
        w.push_back({0.3, 1.0, 0.5, 0.25});
        w.push_back({0.5, 0.25, 0.7, 1.0});
        w.push_back({0.7, 1.0, 0.92, 0.05});
        auto& x = t['x'];
        x.push_back({0.15, 0.05, 0.85, 1.0});
        x.push_back({0.85, 0.05, 0.15, 1.0});
        auto& y = t['y'];
        y.push_back({0.15, 0.05, 0.52, 0.95});
        y.push_back({0.85, 0.05, 0.28, 1.45});
        auto& z = t['z'];
        z.push_back({0.15, 0.08, 0.85, 0.08});
        z.push_back({0.85, 0.08, 0.15, 0.92});
        z.push_back({0.15, 0.92, 0.85, 0.92});

        t['0'] = seven_seg("1111110");
        t['1'] = seven_seg("0110000");
        t['2'] = seven_seg("1101101");
        t['3'] = seven_seg("1111001");
        t['4'] = seven_seg("0110011");
        t['5'] = seven_seg("1011011");
        t['6'] = seven_seg("1011111");
        t['7'] = seven_seg("1110000");
        t['8'] = seven_seg("1111111");
        t['9'] = seven_seg("1111011");

        t['.'].push_back({0.45, 0.92, 0.55, 0.92});
        t[','].push_back({0.52, 0.9, 0.38, 1.25});
        t['-'].push_back({0.2, 0.45, 0.8, 0.45});
        t['\''].push_back({0.52, -0.45, 0.44, -0.18});
        return t;
    }();
    return table;
}

inline const std::map<uint32_t, VClass>& glyph_classes() {
    static const std::map<uint32_t, VClass> table = [] {
        std::map<uint32_t, VClass> t;
        for (char c : std::string("aceimnorsuvwxz")) t[static_cast<uint32_t>(c)] = VClass::core;
        for (char c : std::string("bdfhklt")) t[static_cast<uint32_t>(c)] = VClass::ascender;
        for (char c : std::string("gjpqy")) t[static_cast<uint32_t>(c)] = VClass::descender;
        for (char c : std::string("0123456789'")) t[static_cast<uint32_t>(c)] = VClass::ascender;
        t['.'] = VClass::core;
        t['-'] = VClass::core;
        t[','] = VClass::descender;
        return t;
    }();
    return table;
}

inline double seg_distance(double px, double py, const Seg& s) {
    double vx = s.x2 - s.x1, vy = s.y2 - s.y1;
    double wx = px - s.x1, wy = py - s.y1;
    double len2 = vx * vx + vy * vy;
    double u = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
    double dx = wx - u * vx, dy = wy - u * vy;
    return std::sqrt(dx * dx + dy * dy);
}

// Soft-edged stroke rasterizer over the shared band (ink dark on white).
inline GrayImage rasterize_glyph(const std::vector<Seg>& segs, int core_px, int asc_px, int desc_px, double aspect,
                                 double thickness, double jitter, Rng& rng) {
    int w = std::max(6, static_cast<int>(std::lround(core_px * aspect))) + 4;
    int h = asc_px + core_px + desc_px;
    std::vector<Seg> placed;
    placed.reserve(segs.size());
    for (const Seg& s : segs) {
        Seg p;
        p.x1 = (s.x1 + rng.normal(0, jitter)) * (w - 4) + 2;
        p.y1 = (s.y1 + rng.normal(0, jitter)) * core_px + asc_px;
        p.x2 = (s.x2 + rng.normal(0, jitter)) * (w - 4) + 2;
        p.y2 = (s.y2 + rng.normal(0, jitter)) * core_px + asc_px;
        placed.push_back(p);
    }
    GrayImage img(w, h, 1.0);
    double r = thickness / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d = 1e30;
            for (const Seg& s : placed) d = std::min(d, seg_distance(x, y, s));
            double ink = std::clamp(r + 0.6 - d, 0.0, 1.0);  // soft 1px-ish edge
            if (ink > 0) img.at(x, y) = 1.0 - ink * 0.95;    // darkest ink ~0.05
        }
    return img;
}

}  // namespace detail

// Procedurally drawn 40-character set (a-z, 0-9, ".,-'"); several jittered
// exemplars per character so synthetic writers differ.
inline GlyphSet builtin_glyphs(size_t exemplars_per_char = 5, uint64_t seed = 7) {
    GlyphSet set;
    set.classes = detail::glyph_classes();
    for (const auto& [cp, segs] : detail::glyph_strokes()) {
        auto& list = set.glyphs[cp];
        for (size_t e = 0; e < exemplars_per_char; ++e) {
            Rng rng(mix64(seed, cp, e));
            double aspect = rng.uniform(0.6, 0.78);
            double thick = rng.uniform(1.7, 2.7);
            list.push_back(detail::rasterize_glyph(segs, set.core_px, set.ascender_px, set.descender_px, aspect, thick,
                                                   0.018, rng));
        }
    }
    return set;
}

inline bool GlyphSet::has_word(const std::string& word) const {
    for (unsigned char c : word) {
        auto it = glyphs.find(static_cast<uint32_t>(c));
        if (it == glyphs.end() || it->second.empty()) return false;
    }
    return true;
}

// Shrinks a character crop to 75%, re-places it vertically per its class, and
// pastes short 3px-thick neighbour-stroke fragments at the free edges; the
// fragments never touch the character's own ink.
inline GrayImage cout_transform(const GrayImage& char_img, VClass vclass, Rng& rng) {
    if (char_img.width < 4 || char_img.height < 4) return char_img;
    int nw = std::max(1, static_cast<int>(std::lround(char_img.width * 0.75)));
    int nh = std::max(1, static_cast<int>(std::lround(char_img.height * 0.75)));
    GrayImage small = resize(char_img, nh, nw);

    GrayImage out(char_img.width, char_img.height, 1.0);
    int slack = out.height - nh;
    // slots: 0 = up, 1 = centered, 2 = down; class restricts the draw
    int slot;
    switch (vclass) {
        case VClass::ascender: slot = rng.bernoulli(0.5) ? 0 : 1; break;
        case VClass::descender: slot = rng.bernoulli(0.5) ? 1 : 2; break;
        default: slot = static_cast<int>(rng.uniform_int(3)); break;
    }
    int oy = slot == 0 ? 0 : (slot == 1 ? slack / 2 : slack);
    int ox = (out.width - nw) / 2;
    for (int y = 0; y < nh; ++y)
        for (int x = 0; x < nw; ++x) out.at(ox + x, oy + y) = small.at(x, y);

    // ink bounding columns of the placed character
    int first = out.width, last = -1;
    double orig_mass = 0, thresh = 0.5;
    for (int y = 0; y < char_img.height; ++y)
        for (int x = 0; x < char_img.width; ++x)
            if (char_img.at(x, y) < thresh) orig_mass += 1;
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            if (out.at(x, y) < thresh) {
                first = std::min(first, x);
                last = std::max(last, x);
            }

    double budget = orig_mass * 0.3;  // keep total mass under the original
    auto paste_fragment = [&](bool left_side) {
        int fw = 3;
        int x0 = left_side ? 0 : out.width - fw;
        // require a clear gap to the character's ink
        if (left_side ? first < fw + 1 : last >= x0 - 1) return;
        int flen = 4 + static_cast<int>(rng.uniform_int(static_cast<size_t>(std::max(4, out.height / 2))));
        flen = std::min(flen, out.height);
        if (static_cast<double>(flen) * fw > budget) return;
        int fy = static_cast<int>(rng.uniform_int(static_cast<size_t>(out.height - flen + 1)));
        for (int y = fy; y < fy + flen; ++y)
            for (int x = x0; x < x0 + fw; ++x)
                if (out.at(x, y) >= thresh) out.at(x, y) = 0.08;
        budget -= static_cast<double>(flen) * fw;
    };
    if (rng.bernoulli(0.7)) paste_fragment(true);
    if (rng.bernoulli(0.7)) paste_fragment(false);
    return out;
}

struct SynthStyle {
    int spacing_min = 1;
    int spacing_max = 4;
    int jitter = 2;  // vertical per-glyph wobble in pixels
};

// Glyph exemplars pasted left-to-right on the shared band; the image width is
// exactly the glyph widths plus the drawn spacings.
inline GrayImage synth_word(const GlyphSet& glyphs, const std::string& word, Rng& rng,
                            const SynthStyle& style = {}) {
    if (word.empty()) throw DataError("synth_word: empty word");
    std::vector<const GrayImage*> picks;
    for (unsigned char c : word) {
        auto it = glyphs.glyphs.find(static_cast<uint32_t>(c));
        if (it == glyphs.glyphs.end() || it->second.empty())
            throw DataError(std::string("no glyph for character '") + static_cast<char>(c) + "'");
        picks.push_back(&it->second[rng.uniform_int(it->second.size())]);
    }
    int span = style.spacing_max - style.spacing_min + 1;
    std::vector<int> spacings;
    int width = 0;
    for (size_t i = 0; i < picks.size(); ++i) {
        width += picks[i]->width;
        if (i + 1 < picks.size()) {
            int s = style.spacing_min + static_cast<int>(rng.uniform_int(static_cast<size_t>(span)));
            spacings.push_back(s);
            width += s;
        }
    }
    int height = glyphs.band_height() + 2 * style.jitter;
    GrayImage out(width, height, 1.0);
    int x0 = 0;
    for (size_t i = 0; i < picks.size(); ++i) {
        const GrayImage& g = *picks[i];
        int jy = style.jitter ? static_cast<int>(rng.uniform_int(static_cast<size_t>(2 * style.jitter + 1))) : 0;
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) out.at(x0 + x, jy + y) = std::min(out.at(x0 + x, jy + y), g.at(x, y));
        x0 += g.width;
        if (i < spacings.size()) x0 += spacings[i];
    }
    return out;
}

struct SynthSizes {
    size_t train = 32, validation = 8, test = 8;
};

// Partitions draw from disjoint exemplar pools when every character has at
// least 3 exemplars (train keeps all but two, validation and test get one
// apiece) — a small-scale analogue of writer-disjoint splits.
inline GlyphSet partition_glyphs(const GlyphSet& full, Partition part) {
    bool splittable = !full.glyphs.empty();
    for (const auto& [cp, list] : full.glyphs) splittable = splittable && list.size() >= 3;
    if (!splittable) return full;
    GlyphSet out;
    out.classes = full.classes;
    out.ascender_px = full.ascender_px;
    out.core_px = full.core_px;
    out.descender_px = full.descender_px;
    for (const auto& [cp, list] : full.glyphs) {
        auto& dst = out.glyphs[cp];
        size_t n = list.size();
        if (part == Partition::train)
            for (size_t i = 0; i + 2 < n; ++i) dst.push_back(list[i]);
        else if (part == Partition::validation) dst.push_back(list[n - 2]);
        else dst.push_back(list[n - 1]);
    }
    return out;
}

inline std::vector<ManifestEntry> generate_synth_dataset(const GlyphSet& glyphs, const std::vector<std::string>& words,
                                                         const SynthSizes& sizes, uint64_t seed,
                                                         const std::string& out_dir, const SynthStyle& style = {}) {
    if (words.empty()) throw DataError("generate_synth_dataset: empty word list");
    for (const auto& w : words)
        if (!glyphs.has_word(w)) throw DataError("word not coverable by glyph set: " + w);
    std::filesystem::create_directories(std::filesystem::path(out_dir) / "images");

    std::vector<ManifestEntry> entries;
    const std::pair<Partition, size_t> parts[3] = {{Partition::train, sizes.train},
                                                   {Partition::validation, sizes.validation},
                                                   {Partition::test, sizes.test}};
    for (int pi = 0; pi < 3; ++pi) {
        auto [part, count] = parts[pi];
        GlyphSet pool = partition_glyphs(glyphs, part);
        for (size_t i = 0; i < count; ++i) {
            Rng rng(mix64(seed, static_cast<uint64_t>(pi), i));
            const std::string& word = words[rng.uniform_int(words.size())];
            GrayImage img = synth_word(pool, word, rng, style);
            char name[64];
            std::snprintf(name, sizeof(name), "images/%s_%04zu.png", partition_name(part), i);
            save_png(img, (std::filesystem::path(out_dir) / name).string());
            entries.push_back({name, word, part, true});
        }
    }
    save_manifest((std::filesystem::path(out_dir) / "manifest.tsv").string(), entries);
    return entries;
}

inline const std::vector<std::string>& builtin_words() {
    static const std::vector<std::string> words = {
        "the",  "and",  "of",   "to",   "in",   "is",   "on",   "at",   "as",   "by",   "an",   "or",   "it",
        "be",   "are",  "was",  "for",  "not",  "with", "his",  "her",  "they", "this", "that", "from", "had",
        "have", "but",  "all",  "one",  "out",  "up",   "so",   "no",   "we",   "he",   "she",  "you",  "can",
        "will", "do",   "if",   "my",   "me",   "us",   "our",  "day",  "way",  "man",  "men",  "old",  "new",
        "see",  "now",  "two",  "who",  "its",  "did",  "get",  "has",  "him",  "how",  "time", "word"};
    return words;
}

// glyph directory layout: <dir>/<hex codepoint>/<n>.png + <dir>/classes.tsv
inline void save_glyphs(const std::string& dir, const GlyphSet& set) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream cf(fs::path(dir) / "classes.tsv", std::ios::trunc);
    if (!cf) throw DataError("cannot write glyph class file in " + dir);
    cf << "codepoint\tclass\tascender_px\tcore_px\tdescender_px\n";
    for (const auto& [cp, vclass] : set.classes) {
        if (!set.glyphs.count(cp)) continue;
        char hex[16];
        std::snprintf(hex, sizeof(hex), "%04x", cp);
        cf << hex << '\t' << vclass_name(vclass) << '\t' << set.ascender_px << '\t' << set.core_px << '\t'
           << set.descender_px << '\n';
        fs::create_directories(fs::path(dir) / hex);
        const auto& list = set.glyphs.at(cp);
        for (size_t i = 0; i < list.size(); ++i)
            save_png(list[i], (fs::path(dir) / hex / (std::to_string(i) + ".png")).string());
    }
}

inline GlyphSet load_glyphs(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream cf(fs::path(dir) / "classes.tsv");
    if (!cf) throw DataError("cannot open glyph class file in " + dir);
    GlyphSet set;
    std::string line;
    size_t lineno = 0;
    while (std::getline(cf, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;
        std::istringstream ss(line);
        std::string hex, cls;
        int a = 0, c = 0, d = 0;
        if (!(ss >> hex >> cls >> a >> c >> d)) throw DataError("bad glyph class row at line " + std::to_string(lineno));
        uint32_t cp = static_cast<uint32_t>(std::stoul(hex, nullptr, 16));
        set.classes[cp] = parse_vclass(cls);
        set.ascender_px = a;
        set.core_px = c;
        set.descender_px = d;
        auto& list = set.glyphs[cp];
        for (size_t i = 0;; ++i) {
            fs::path p = fs::path(dir) / hex / (std::to_string(i) + ".png");
            if (!fs::exists(p)) break;
            list.push_back(load_png(p.string()));
        }
        if (list.empty()) throw DataError("glyph directory has no exemplars for " + hex);
    }
    if (set.glyphs.empty()) throw DataError("empty glyph set in " + dir);
    return set;
}

}  // namespace inkline
