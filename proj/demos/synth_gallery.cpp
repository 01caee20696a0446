// Render a few synthetic words, then show what the normalization pipeline
// and the augmentation stack do to them. Writes PNGs under gallery_out/.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "inkline/inkline.hpp"

using namespace inkline;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
    fs::path out = argc > 1 ? argv[1] : "gallery_out";
    fs::create_directories(out);

    GlyphSet glyphs = builtin_glyphs(4, 11);
    std::vector<std::string> words{"mind", "quartz", "fog", "jumble"};

    Rng rng(3);
    NormalizeConfig nc;
    nc.target_height = 48;
    nc.target_width = 192;
    AugmentConfig ac;

    for (const std::string& w : words) {
        GrayImage raw = synth_word(glyphs, w, rng);
        // make it look like a casual scan: slanted, tilted, off-baseline
        raw = correct_slant(raw, -rng.uniform(-0.3, 0.3));
        raw = correct_slope(raw, -rng.uniform(-0.06, 0.06));
        save_png(raw, (out / (w + "_raw.png")).string());

        GrayImage norm = normalize_pipeline(raw, nc);
        save_png(norm, (out / (w + "_norm.png")).string());

        for (int k = 0; k < 3; ++k) {
            Rng lane(augment_seed(ac.rng_seed, 0, k));
            save_png(augment(norm, ac, lane), (out / (w + "_aug" + std::to_string(k) + ".png")).string());
        }
    }

    std::printf("wrote %zu images to %s\n", words.size() * 5, out.string().c_str());
    return 0;
}
