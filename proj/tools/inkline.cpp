#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <inkline/inkline.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace inkline;

namespace {

constexpr const char* kVersion = "0.1.0";

// exit code 1; data problems (DataError, ImageError, ...) exit with 2
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- run config

struct TrainSettings {
    OptimizerConfig opt;
    size_t epochs = 100, batch = 128, patience = 20;
    double dropout = 0.5, l2 = 1e-4;
    size_t max_decode_len = 32;
    bool stop_at_zero_wer = false;
    bool normalize = false;  // run the image pipeline on every sample up front
    bool augment = false;    // fresh augmentation per (sample, epoch)
};

struct SynthSettings {
    size_t exemplars = 5;
    SynthSizes sizes;
    SynthStyle style;
    std::vector<std::string> words;  // empty -> built-in list
};

struct RunConfig {
    uint64_t seed = 0;
    NormalizeConfig norm;
    AugmentConfig aug;
    ModelConfig model;
    TrainSettings train;
    SynthSettings synth;
    std::string lexicon;
};

void expect_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw UsageError("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) throw UsageError("config: unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void fetch(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw UsageError(std::string("config: bad value for '") + key + "'");
    }
}

void apply_normalize(const json& j, NormalizeConfig& c) {
    expect_keys(j, "normalize",
                {"target_height", "target_width", "pad_side", "contrast_window", "contrast_k", "contrast_range",
                 "ransac_iterations", "ransac_tolerance", "fg_threshold"});
    fetch(j, "target_height", c.target_height);
    fetch(j, "target_width", c.target_width);
    std::string pad = c.pad_side == NormalizeConfig::Pad::left ? "left" : "right";
    fetch(j, "pad_side", pad);
    if (pad == "left") c.pad_side = NormalizeConfig::Pad::left;
    else if (pad == "right") c.pad_side = NormalizeConfig::Pad::right;
    else throw UsageError("config: pad_side must be left or right");
    fetch(j, "contrast_window", c.contrast_window);
    fetch(j, "contrast_k", c.contrast_k);
    fetch(j, "contrast_range", c.contrast_range);
    fetch(j, "ransac_iterations", c.ransac_iterations);
    fetch(j, "ransac_tolerance", c.ransac_tolerance);
    fetch(j, "fg_threshold", c.fg_threshold);
}

json normalize_json(const NormalizeConfig& c) {
    return json{{"target_height", c.target_height},
                {"target_width", c.target_width},
                {"pad_side", c.pad_side == NormalizeConfig::Pad::left ? "left" : "right"},
                {"contrast_window", c.contrast_window},
                {"contrast_k", c.contrast_k},
                {"contrast_range", c.contrast_range},
                {"ransac_iterations", c.ransac_iterations},
                {"ransac_tolerance", c.ransac_tolerance},
                {"fg_threshold", c.fg_threshold}};
}

void apply_augment(const json& j, AugmentConfig& c) {
    expect_keys(j, "augment",
                {"p_translate", "p_resize", "p_slant", "p_elastic", "p_projective", "p_morph", "translate_px",
                 "resize_lo", "resize_hi", "slant_max", "elastic_spacing", "elastic_sigma", "projective_jitter",
                 "morph_kernel"});
    fetch(j, "p_translate", c.p_translate);
    fetch(j, "p_resize", c.p_resize);
    fetch(j, "p_slant", c.p_slant);
    fetch(j, "p_elastic", c.p_elastic);
    fetch(j, "p_projective", c.p_projective);
    fetch(j, "p_morph", c.p_morph);
    fetch(j, "translate_px", c.translate_px);
    fetch(j, "resize_lo", c.resize_lo);
    fetch(j, "resize_hi", c.resize_hi);
    fetch(j, "slant_max", c.slant_max);
    fetch(j, "elastic_spacing", c.elastic_spacing);
    fetch(j, "elastic_sigma", c.elastic_sigma);
    fetch(j, "projective_jitter", c.projective_jitter);
    fetch(j, "morph_kernel", c.morph_kernel);
}

json augment_json(const AugmentConfig& c) {
    return json{{"p_translate", c.p_translate},
                {"p_resize", c.p_resize},
                {"p_slant", c.p_slant},
                {"p_elastic", c.p_elastic},
                {"p_projective", c.p_projective},
                {"p_morph", c.p_morph},
                {"translate_px", c.translate_px},
                {"resize_lo", c.resize_lo},
                {"resize_hi", c.resize_hi},
                {"slant_max", c.slant_max},
                {"elastic_spacing", c.elastic_spacing},
                {"elastic_sigma", c.elastic_sigma},
                {"projective_jitter", c.projective_jitter},
                {"morph_kernel", c.morph_kernel}};
}

void apply_model(const json& j, ModelConfig& m) {
    expect_keys(j, "model",
                {"reader", "fullimage", "vgg_blocks", "height", "patch_width", "patch_step", "cell", "encoder_size",
                 "encoder_layers", "bidirectional", "attention_size"});
    fetch(j, "reader", m.reader_family);
    if (m.reader_family != "lenet" && m.reader_family != "vgg")
        throw UsageError("config: reader must be lenet or vgg");
    fetch(j, "fullimage", m.fullimage);
    fetch(j, "vgg_blocks", m.vgg_blocks);
    fetch(j, "height", m.height);
    fetch(j, "patch_width", m.patch.width);
    fetch(j, "patch_step", m.patch.step);
    std::string cell = m.enc.cell == CellKind::lstm ? "lstm" : "gru";
    fetch(j, "cell", cell);
    if (cell == "lstm") m.enc.cell = CellKind::lstm;
    else if (cell == "gru") m.enc.cell = CellKind::gru;
    else throw UsageError("config: cell must be lstm or gru");
    fetch(j, "encoder_size", m.enc.size);
    fetch(j, "encoder_layers", m.enc.layers);
    fetch(j, "bidirectional", m.enc.bidirectional);
    fetch(j, "attention_size", m.attn_dim);
}

void apply_train(const json& j, TrainSettings& t) {
    expect_keys(j, "train",
                {"optimizer", "lr", "decay", "beta1", "beta2", "eps", "rho", "epochs", "batch", "patience", "dropout",
                 "l2", "max_decode_len", "stop_at_zero_wer", "normalize", "augment"});
    fetch(j, "optimizer", t.opt.kind);
    fetch(j, "lr", t.opt.lr);
    fetch(j, "decay", t.opt.decay);
    fetch(j, "beta1", t.opt.beta1);
    fetch(j, "beta2", t.opt.beta2);
    fetch(j, "eps", t.opt.eps);
    fetch(j, "rho", t.opt.rho);
    fetch(j, "epochs", t.epochs);
    fetch(j, "batch", t.batch);
    fetch(j, "patience", t.patience);
    fetch(j, "dropout", t.dropout);
    fetch(j, "l2", t.l2);
    fetch(j, "max_decode_len", t.max_decode_len);
    fetch(j, "stop_at_zero_wer", t.stop_at_zero_wer);
    fetch(j, "normalize", t.normalize);
    fetch(j, "augment", t.augment);
}

json train_json(const TrainSettings& t) {
    return json{{"optimizer", t.opt.kind},
                {"lr", t.opt.lr},
                {"decay", t.opt.decay},
                {"beta1", t.opt.beta1},
                {"beta2", t.opt.beta2},
                {"eps", t.opt.eps},
                {"rho", t.opt.rho},
                {"epochs", t.epochs},
                {"batch", t.batch},
                {"patience", t.patience},
                {"dropout", t.dropout},
                {"l2", t.l2},
                {"max_decode_len", t.max_decode_len},
                {"stop_at_zero_wer", t.stop_at_zero_wer},
                {"normalize", t.normalize},
                {"augment", t.augment}};
}

void apply_synth(const json& j, SynthSettings& s) {
    expect_keys(j, "synth",
                {"exemplars", "train", "validation", "test", "spacing_min", "spacing_max", "jitter", "words"});
    fetch(j, "exemplars", s.exemplars);
    fetch(j, "train", s.sizes.train);
    fetch(j, "validation", s.sizes.validation);
    fetch(j, "test", s.sizes.test);
    fetch(j, "spacing_min", s.style.spacing_min);
    fetch(j, "spacing_max", s.style.spacing_max);
    fetch(j, "jitter", s.style.jitter);
    fetch(j, "words", s.words);
}

json synth_json(const SynthSettings& s) {
    return json{{"exemplars", s.exemplars},
                {"train", s.sizes.train},
                {"validation", s.sizes.validation},
                {"test", s.sizes.test},
                {"spacing_min", s.style.spacing_min},
                {"spacing_max", s.style.spacing_max},
                {"jitter", s.style.jitter},
                {"words", s.words}};
}

RunConfig parse_config_json(const json& j) {
    expect_keys(j, "the top level", {"seed", "normalize", "augment", "model", "train", "synth", "lexicon"});
    RunConfig rc;
    fetch(j, "seed", rc.seed);
    if (j.contains("normalize")) apply_normalize(j.at("normalize"), rc.norm);
    if (j.contains("augment")) apply_augment(j.at("augment"), rc.aug);
    if (j.contains("model")) apply_model(j.at("model"), rc.model);
    if (j.contains("train")) apply_train(j.at("train"), rc.train);
    if (j.contains("synth")) apply_synth(j.at("synth"), rc.synth);
    fetch(j, "lexicon", rc.lexicon);
    return rc;
}

json build_config_json(const RunConfig& rc) {
    return json{{"seed", rc.seed},          {"normalize", normalize_json(rc.norm)},
                {"augment", augment_json(rc.aug)}, {"model", model_config_json(rc.model)},
                {"train", train_json(rc.train)},   {"synth", synth_json(rc.synth)},
                {"lexicon", rc.lexicon}};
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw UsageError(std::string("bad config json: ") + e.what());
    }
    return parse_config_json(j);
}

void validate_train(const TrainSettings& t) {
    if (t.opt.kind != "adam" && t.opt.kind != "rmsprop")
        throw UsageError("config: optimizer must be adam or rmsprop");
    if (t.epochs < 1) throw UsageError("config: epochs must be >= 1");
    if (t.batch < 1) throw UsageError("config: batch must be >= 1");
    if (t.patience < 1) throw UsageError("config: patience must be >= 1");
    if (!(t.opt.lr > 0)) throw UsageError("config: lr must be positive");
    if (t.opt.decay < 0 || t.opt.decay >= 1) throw UsageError("config: decay must be in [0,1)");
    if (t.dropout < 0 || t.dropout >= 1) throw UsageError("config: dropout must be in [0,1)");
    if (t.l2 < 0) throw UsageError("config: l2 must be nonnegative");
}

void log_config(const json& j) { std::cerr << "config " << j.dump() << '\n'; }

// --------------------------------------------------------------- small utils

std::string with_commas(size_t n) {
    std::string s = std::to_string(n);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<size_t>(i), ",");
    return s;
}

void parallel_for(size_t n, unsigned jobs, const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    size_t lanes = std::min<size_t>(jobs, n);
    std::vector<std::thread> pool;
    for (size_t t = 0; t < lanes; ++t)
        pool.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

struct PredFile {
    std::vector<std::string> ids, preds, refs;
};

void write_predictions(const std::string& path, const PredFile& p) {
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!path.empty()) {
        file.open(path, std::ios::trunc);
        if (!file) throw DataError("cannot write predictions: " + path);
        os = &file;
    }
    (*os) << "id\tprediction\treference\n";
    for (size_t i = 0; i < p.ids.size(); ++i)
        (*os) << p.ids[i] << '\t' << p.preds[i] << '\t' << p.refs[i] << '\n';
    if (!*os) throw DataError("write failed: " + path);
}

PredFile read_predictions(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open predictions: " + path);
    PredFile p;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != "id\tprediction\treference") throw DataError(path + ":1: bad predictions header");
            continue;
        }
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 columns");
        p.ids.push_back(line.substr(0, t1));
        p.preds.push_back(line.substr(t1 + 1, t2 - t1 - 1));
        p.refs.push_back(line.substr(t2 + 1));
    }
    return p;
}

std::vector<std::string> read_word_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open lexicon: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    if (words.empty()) throw DataError("empty lexicon: " + path);
    return words;
}

double safe_corpus_cer(const std::vector<std::string>& preds, const std::vector<std::string>& refs) {
    size_t len = 0;
    for (const auto& r : refs) len += utf8_decode(r).size();
    if (len == 0) throw DataError("references are empty, cannot score");
    return corpus_cer(preds, refs);
}

// images enter the model at its training height; narrow ones are padded with
// background so at least one patch fits
GrayImage prep_for_model(GrayImage img, const RunConfig& rc) {
    if (rc.train.normalize) img = normalize_pipeline(img, rc.norm);
    if (static_cast<size_t>(img.height) != rc.model.height)
        img = resize_height(img, static_cast<int>(rc.model.height));
    size_t min_w = rc.model.fullimage ? 8 : rc.model.patch.width;
    if (static_cast<size_t>(img.width) < min_w) {
        GrayImage padded(static_cast<int>(min_w), img.height, 1.0);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) padded.at(x, y) = img.at(x, y);
        img = padded;
    }
    return img;
}

fs::path manifest_base(const std::string& manifest, const std::string& base) {
    if (!base.empty()) return base;
    fs::path parent = fs::path(manifest).parent_path();
    return parent.empty() ? fs::path(".") : parent;
}

// ------------------------------------------------------------------ commands

struct NormalizeOpts {
    std::string config, in, out, manifest, base, out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = 1;
};

void run_normalize(const NormalizeOpts& o) {
    RunConfig rc = load_run_config(o.config);
    if (o.seed_set) rc.seed = o.seed;
    rc.norm.seed = rc.seed;
    rc.norm.validate();
    log_config(build_config_json(rc));

    if (!o.in.empty()) {
        if (o.out.empty()) throw UsageError("--in needs --out");
        bool squeezed = false;
        GrayImage img = load_png(o.in);
        save_png(normalize_pipeline(img, rc.norm, &squeezed), o.out);
        std::cout << "normalized 1 image (" << (squeezed ? 1 : 0) << " squeezed)\n";
        return;
    }
    if (o.manifest.empty() || o.out_dir.empty()) throw UsageError("need --in/--out or --manifest/--out-dir");

    auto entries = load_manifest(o.manifest);
    fs::path base = manifest_base(o.manifest, o.base);
    std::atomic<size_t> squeezed{0};
    parallel_for(entries.size(), o.jobs, [&](size_t i) {
        const ManifestEntry& e = entries[i];
        fs::path src = fs::path(e.path).is_relative() ? base / e.path : fs::path(e.path);
        bool flag = false;
        GrayImage out = normalize_pipeline(load_png(src.string()), rc.norm, &flag);
        if (flag) ++squeezed;
        fs::path dst = fs::path(o.out_dir) / e.path;
        fs::create_directories(dst.parent_path());
        save_png(out, dst.string());
    });
    save_manifest((fs::path(o.out_dir) / "manifest.tsv").string(), entries);
    std::cout << "normalized " << entries.size() << " images (" << squeezed.load() << " squeezed)\n";
}

struct AugmentOpts {
    std::string config, in, out, manifest, base, out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    unsigned jobs = 1;
    size_t copies = 1;
};

void run_augment(const AugmentOpts& o) {
    RunConfig rc = load_run_config(o.config);
    if (o.seed_set) rc.seed = o.seed;
    rc.aug.rng_seed = rc.seed;
    rc.aug.validate();
    log_config(build_config_json(rc));

    if (!o.in.empty()) {
        if (o.out.empty()) throw UsageError("--in needs --out");
        Rng rng(rc.seed);
        save_png(augment(load_png(o.in), rc.aug, rng), o.out);
        std::cout << "augmented 1 image\n";
        return;
    }
    if (o.manifest.empty() || o.out_dir.empty()) throw UsageError("need --in/--out or --manifest/--out-dir");
    if (o.copies < 1) throw UsageError("--copies must be >= 1");

    auto entries = load_manifest(o.manifest);
    fs::path base = manifest_base(o.manifest, o.base);
    std::vector<ManifestEntry> out_entries(entries.size() * o.copies);
    parallel_for(entries.size(), o.jobs, [&](size_t i) {
        const ManifestEntry& e = entries[i];
        fs::path src = fs::path(e.path).is_relative() ? base / e.path : fs::path(e.path);
        GrayImage img = load_png(src.string());
        for (size_t k = 0; k < o.copies; ++k) {
            Rng rng(augment_seed(rc.seed, i, k));
            GrayImage out = augment(img, rc.aug, rng);
            fs::path rel(e.path);
            fs::path rel_out = rel.parent_path() / (rel.stem().string() + "_a" + std::to_string(k) + ".png");
            fs::path dst = fs::path(o.out_dir) / rel_out;
            fs::create_directories(dst.parent_path());
            save_png(out, dst.string());
            out_entries[i * o.copies + k] = {rel_out.generic_string(), e.transcription, e.partition, e.ok};
        }
    });
    save_manifest((fs::path(o.out_dir) / "manifest.tsv").string(), out_entries);
    std::cout << "augmented " << entries.size() << " images x" << o.copies << "\n";
}

struct SynthOpts {
    std::string config, out_dir, glyphs, dump_glyphs;
    uint64_t seed = 0;
    bool seed_set = false;
};

void run_synth(const SynthOpts& o) {
    RunConfig rc = load_run_config(o.config);
    if (o.seed_set) rc.seed = o.seed;
    if (rc.synth.exemplars < 1) throw UsageError("config: exemplars must be >= 1");
    log_config(build_config_json(rc));

    GlyphSet glyphs = o.glyphs.empty() ? builtin_glyphs(rc.synth.exemplars, mix64(rc.seed, 0x517b))
                                       : load_glyphs(o.glyphs);
    if (!o.dump_glyphs.empty()) save_glyphs(o.dump_glyphs, glyphs);

    const std::vector<std::string>& words = rc.synth.words.empty() ? builtin_words() : rc.synth.words;
    auto entries = generate_synth_dataset(glyphs, words, rc.synth.sizes, rc.seed, o.out_dir, rc.synth.style);
    size_t counts[3] = {0, 0, 0};
    for (const auto& e : entries) counts[static_cast<int>(e.partition)]++;
    std::cout << "wrote " << entries.size() << " word images to " << o.out_dir << " (train " << counts[0]
              << ", validation " << counts[1] << ", test " << counts[2] << ")\n";
}

struct TrainOpts {
    std::string config, data, manifest, base, out, stats;
    uint64_t seed = 0;
    bool seed_set = false;
    long long epochs = -1;
    double lr = -1;
    long long batch = -1;
    bool verbose = false;
};

void run_train(const TrainOpts& o) {
    RunConfig rc = load_run_config(o.config);
    if (o.seed_set) rc.seed = o.seed;
    if (o.epochs >= 0) rc.train.epochs = static_cast<size_t>(o.epochs);
    if (o.lr > 0) rc.train.opt.lr = o.lr;
    if (o.batch >= 0) rc.train.batch = static_cast<size_t>(o.batch);
    validate_train(rc.train);
    if (rc.train.normalize) {
        rc.norm.seed = rc.seed;
        rc.norm.validate();
    }
    if (rc.train.augment) rc.aug.validate();
    json resolved = build_config_json(rc);
    log_config(resolved);

    std::string manifest = o.manifest;
    std::string base = o.base;
    if (!o.data.empty()) {
        manifest = (fs::path(o.data) / "manifest.tsv").string();
        base = o.data;
    }
    if (manifest.empty()) throw UsageError("need --data or --manifest");
    if (o.out.empty()) throw UsageError("need --out for the model checkpoint");

    auto entries = filter_iam_style(load_manifest(manifest));
    fs::path base_dir = manifest_base(manifest, base);
    std::vector<Sample> train_set, val_set;
    std::vector<std::string> texts;
    for (const auto& e : entries) {
        if (e.partition == Partition::test) continue;
        fs::path src = fs::path(e.path).is_relative() ? base_dir / e.path : fs::path(e.path);
        Sample s{prep_for_model(load_png(src.string()), rc), e.transcription};
        texts.push_back(e.transcription);
        (e.partition == Partition::train ? train_set : val_set).push_back(std::move(s));
    }
    if (train_set.empty()) throw DataError("no training samples in " + manifest);
    if (val_set.empty()) throw DataError("no validation samples in " + manifest);

    CharVocab vocab = CharVocab::from_strings(texts);
    Seq2SeqModel model = make_seq2seq(rc.model, vocab);

    TrainConfig tc;
    tc.opt = rc.train.opt;
    tc.epochs = rc.train.epochs;
    tc.batch = rc.train.batch;
    tc.patience = rc.train.patience;
    tc.dropout = rc.train.dropout;
    tc.l2 = rc.train.l2;
    tc.seed = rc.seed;
    tc.max_decode_len = rc.train.max_decode_len;
    tc.stop_at_zero_wer = rc.train.stop_at_zero_wer;
    tc.checkpoint_path = o.out;
    tc.stats_path = o.stats;

    SampleTransform transform = nullptr;
    if (rc.train.augment)
        transform = [rc](const GrayImage& img, size_t sample, size_t epoch) {
            Rng rng(augment_seed(rc.seed, sample, epoch));
            return augment(img, rc.aug, rng);
        };

    TrainResult r = train_loop(model, train_set, val_set, tc, transform, o.verbose ? &std::cerr : nullptr, resolved);

    std::cout << "trained on " << train_set.size() << " samples, validated on " << val_set.size() << "\n"
              << "epochs_run " << r.history.size() << (r.stopped_early ? " (stopped early)" : "") << "\n"
              << "best_epoch " << r.best_epoch << "\n"
              << std::fixed << std::setprecision(6) << "best_val_cer " << r.best_val_cer << "\n"
              << "best_val_wer " << r.best_val_wer << "\n"
              << "model " << o.out << "\n";
}

struct EvalOpts {
    std::string model, data, manifest, base, out, partition = "test";
    long long max_len = -1;
};

void run_evaluate(const EvalOpts& o) {
    json extra;
    Seq2SeqModel model = load_model(o.model, &extra);
    RunConfig rc = parse_config_json(extra.is_object() && !extra.empty() ? extra : json::object());
    rc.model = model.cfg;  // the checkpoint header is authoritative
    size_t max_len = o.max_len > 0 ? static_cast<size_t>(o.max_len) : rc.train.max_decode_len;
    log_config(build_config_json(rc));

    std::string manifest = o.manifest;
    std::string base = o.base;
    if (!o.data.empty()) {
        manifest = (fs::path(o.data) / "manifest.tsv").string();
        base = o.data;
    }
    if (manifest.empty()) throw UsageError("need --data or --manifest");
    Partition part = parse_partition(o.partition);

    auto entries = filter_iam_style(load_manifest(manifest));
    fs::path base_dir = manifest_base(manifest, base);
    PredFile p;
    for (const auto& e : entries) {
        if (e.partition != part) continue;
        fs::path src = fs::path(e.path).is_relative() ? base_dir / e.path : fs::path(e.path);
        GrayImage img = prep_for_model(load_png(src.string()), rc);
        p.ids.push_back(e.path);
        p.preds.push_back(model.greedy_decode(img, max_len));
        p.refs.push_back(e.transcription);
    }
    if (p.ids.empty()) throw DataError("no samples in partition '" + o.partition + "'");

    write_predictions(o.out, p);
    std::ostream& ms = o.out.empty() ? std::cerr : std::cout;
    ms << "samples " << p.ids.size() << "\n"
       << std::fixed << std::setprecision(6) << "cer " << safe_corpus_cer(p.preds, p.refs) << "\n"
       << "wer " << wer(p.preds, p.refs) << "\n";
}

struct DecodeOpts {
    std::string pred, lexicon, out;
};

void run_decode(const DecodeOpts& o) {
    log_config(json{{"pred", o.pred}, {"lexicon", o.lexicon}});
    PredFile p = read_predictions(o.pred);
    if (p.ids.empty()) throw DataError("no predictions in " + o.pred);
    Lexicon lex(read_word_list(o.lexicon));

    auto [decoded, dists] = decode_with_lexicon(p.preds, lex);
    OovReport oov = oov_report(lex, p.refs);

    PredFile out{p.ids, decoded, p.refs};
    write_predictions(o.out, out);
    std::ostream& ms = o.out.empty() ? std::cerr : std::cout;
    ms << "samples " << p.ids.size() << "\n"
       << "lexicon_size " << lex.size() << "\n"
       << std::fixed << std::setprecision(6) << "cer_before " << safe_corpus_cer(p.preds, p.refs) << "\n"
       << "cer_after " << safe_corpus_cer(decoded, p.refs) << "\n"
       << "wer_before " << wer(p.preds, p.refs) << "\n"
       << "wer_after " << wer(decoded, p.refs) << "\n"
       << "oov_occurrences " << oov.occurrences << "\n"
       << "oov_rate " << oov.rate << "\n";
}

struct ReportOpts {
    std::string pred, json_out;
    uint64_t seed = 0;
    size_t resamples = 1000;
    double confidence = 0.95;
};

void run_report(const ReportOpts& o) {
    log_config(json{{"pred", o.pred}, {"resamples", o.resamples}, {"confidence", o.confidence}, {"seed", o.seed}});
    PredFile p = read_predictions(o.pred);
    if (p.ids.empty()) throw DataError("no predictions in " + o.pred);

    double cer_point = safe_corpus_cer(p.preds, p.refs);
    double wer_point = wer(p.preds, p.refs);
    json rep{{"samples", p.ids.size()}, {"cer", cer_point}, {"wer", wer_point}};

    std::cout << "samples " << p.ids.size() << "\n"
              << std::fixed << std::setprecision(6) << "cer " << cer_point << "\n"
              << "wer " << wer_point << "\n";
    if (p.ids.size() >= 2) {
        Rng rng(mix64(o.seed, 0xc1));
        BootstrapCI cci = bootstrap_ci_pairs(p.preds, p.refs, [](const auto& a, const auto& b) { return corpus_cer(a, b); },
                                             o.resamples, o.confidence, rng);
        BootstrapCI wci = bootstrap_ci_pairs(p.preds, p.refs, [](const auto& a, const auto& b) { return wer(a, b); },
                                             o.resamples, o.confidence, rng);
        std::cout << "cer_ci " << cci.lower << " " << cci.upper << "\n"
                  << "wer_ci " << wci.lower << " " << wci.upper << "\n"
                  << "confidence " << o.confidence << "\n"
                  << "resamples " << o.resamples << "\n";
        rep["cer_ci"] = {cci.lower, cci.upper};
        rep["wer_ci"] = {wci.lower, wci.upper};
        rep["confidence"] = o.confidence;
        rep["resamples"] = o.resamples;
    }
    if (!o.json_out.empty()) {
        std::ofstream f(o.json_out, std::ios::trunc);
        if (!f) throw DataError("cannot write report: " + o.json_out);
        f << rep.dump(2) << "\n";
    }
}

struct InspectOpts {
    std::string arch, input = "28x28", model;
    long long classes = -1;
    long long blocks = -1;
    long long dense1 = -1, dense2 = -1;
};

void print_net(ConvNet& net) {
    std::cout << "family " << net.family << "\n";
    std::cout << std::left << std::setw(24) << "input" << std::setw(16) << shape_str(net.input_shape) << "\n";
    for (const ShapeRow& row : net.shape_chain())
        std::cout << std::left << std::setw(24) << row.label << std::setw(16) << shape_str(row.shape)
                  << with_commas(row.params) << "\n";
    std::cout << "total parameters " << with_commas(net.param_count()) << "\n";
}

void run_inspect(const InspectOpts& o) {
    if (!o.model.empty()) {
        log_config(json{{"model", o.model}});
        Checkpoint cp = load_checkpoint(o.model);
        std::cout << "header " << cp.header.dump() << "\n";
        size_t total = 0;
        for (const auto& [name, t] : cp.tensors) {
            std::cout << std::left << std::setw(24) << name << std::setw(16) << shape_str(t.shape)
                      << with_commas(t.size()) << "\n";
            total += t.size();
        }
        std::cout << "total parameters " << with_commas(total) << "\n";
        return;
    }
    if (o.arch.empty()) throw UsageError("need --arch or --model");
    if (o.classes < 1) throw UsageError("--arch needs --classes");
    size_t h = 0, w = 0;
    char x = 0;
    std::istringstream ss(o.input);
    if (!(ss >> h >> x >> w) || x != 'x' || !ss.eof() || h < 1 || w < 1)
        throw UsageError("--input must look like 28x28");
    log_config(json{{"arch", o.arch}, {"input", o.input}, {"classes", o.classes}});

    size_t classes = static_cast<size_t>(o.classes);
    ConvNet net;
    if (o.arch == "lenet") {
        size_t d1 = o.dense1 > 0 ? static_cast<size_t>(o.dense1) : 256;
        size_t d2 = o.dense2 > 0 ? static_cast<size_t>(o.dense2) : 128;
        net = build_lenet_classifier(h, w, d1, d2, classes);
    } else if (o.arch == "vgg") {
        size_t blocks = o.blocks > 0 ? static_cast<size_t>(o.blocks) : 3;
        size_t d1 = o.dense1 > 0 ? static_cast<size_t>(o.dense1) : 512;
        size_t d2 = o.dense2 > 0 ? static_cast<size_t>(o.dense2) : 256;
        net = build_vgg(blocks, h, w, d1, d2, classes);
    } else if (o.arch == "resnet") {
        size_t blocks = o.blocks > 0 ? static_cast<size_t>(o.blocks) : 3;
        net = build_resnet(blocks, h, w, classes);
    } else {
        throw UsageError("unknown arch: " + o.arch + " (lenet|vgg|resnet)");
    }
    print_net(net);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline handwritten word recognition toolkit"};
    app.set_version_flag("--version", std::string("inkline ") + kVersion);
    app.require_subcommand(1);

    NormalizeOpts nop;
    auto* n = app.add_subcommand("normalize", "contrast, slope, slant and size normalization");
    n->add_option("--config", nop.config, "JSON run configuration");
    n->add_option("--in", nop.in, "single input image");
    n->add_option("--out", nop.out, "single output image");
    n->add_option("--manifest", nop.manifest, "dataset manifest (TSV)");
    n->add_option("--base", nop.base, "image base directory (default: manifest directory)");
    n->add_option("--out-dir", nop.out_dir, "output dataset directory");
    n->add_option("--jobs", nop.jobs, "parallel lanes")->check(CLI::PositiveNumber);
    n->add_option("--seed", nop.seed, "run seed")->each([&](const std::string&) { nop.seed_set = true; });
    n->callback([&] { run_normalize(nop); });

    AugmentOpts aop;
    auto* a = app.add_subcommand("augment", "randomized image distortions");
    a->add_option("--config", aop.config, "JSON run configuration");
    a->add_option("--in", aop.in, "single input image");
    a->add_option("--out", aop.out, "single output image");
    a->add_option("--manifest", aop.manifest, "dataset manifest (TSV)");
    a->add_option("--base", aop.base, "image base directory (default: manifest directory)");
    a->add_option("--out-dir", aop.out_dir, "output dataset directory");
    a->add_option("--copies", aop.copies, "augmented copies per image");
    a->add_option("--jobs", aop.jobs, "parallel lanes")->check(CLI::PositiveNumber);
    a->add_option("--seed", aop.seed, "run seed")->each([&](const std::string&) { aop.seed_set = true; });
    a->callback([&] { run_augment(aop); });

    SynthOpts sop;
    auto* s = app.add_subcommand("synth", "generate a synthetic word dataset");
    s->add_option("--config", sop.config, "JSON run configuration");
    s->add_option("--out-dir", sop.out_dir, "output dataset directory")->required();
    s->add_option("--glyphs", sop.glyphs, "load glyphs from a directory instead of the built-in set");
    s->add_option("--dump-glyphs", sop.dump_glyphs, "also write the glyph set to this directory");
    s->add_option("--seed", sop.seed, "run seed")->each([&](const std::string&) { sop.seed_set = true; });
    s->callback([&] { run_synth(sop); });

    TrainOpts top;
    auto* t = app.add_subcommand("train", "train a word recognition model");
    t->add_option("--config", top.config, "JSON run configuration");
    t->add_option("--data", top.data, "dataset directory containing manifest.tsv");
    t->add_option("--manifest", top.manifest, "dataset manifest (TSV)");
    t->add_option("--base", top.base, "image base directory (default: manifest directory)");
    t->add_option("--out", top.out, "checkpoint path for the best model")->required();
    t->add_option("--stats", top.stats, "per-epoch CSV");
    t->add_option("--epochs", top.epochs, "override epoch budget");
    t->add_option("--lr", top.lr, "override learning rate");
    t->add_option("--batch", top.batch, "override batch size");
    t->add_flag("--log", top.verbose, "stream per-epoch lines to stderr");
    t->add_option("--seed", top.seed, "run seed")->each([&](const std::string&) { top.seed_set = true; });
    t->callback([&] { run_train(top); });

    EvalOpts eop;
    auto* e = app.add_subcommand("evaluate", "decode a dataset partition and score it");
    e->add_option("--model", eop.model, "model checkpoint")->required();
    e->add_option("--data", eop.data, "dataset directory containing manifest.tsv");
    e->add_option("--manifest", eop.manifest, "dataset manifest (TSV)");
    e->add_option("--base", eop.base, "image base directory (default: manifest directory)");
    e->add_option("--partition", eop.partition, "train|validation|test")->capture_default_str();
    e->add_option("--out", eop.out, "predictions TSV (default: stdout)");
    e->add_option("--max-len", eop.max_len, "decode length cap");
    e->callback([&] { run_evaluate(eop); });

    DecodeOpts dop;
    auto* d = app.add_subcommand("decode", "snap predictions to a closed lexicon");
    d->add_option("--pred", dop.pred, "predictions TSV from evaluate")->required();
    d->add_option("--lexicon", dop.lexicon, "word list, one per line")->required();
    d->add_option("--out", dop.out, "decoded TSV (default: stdout)");
    d->callback([&] { run_decode(dop); });

    ReportOpts rop;
    auto* r = app.add_subcommand("report", "error rates with bootstrap confidence intervals");
    r->add_option("--pred", rop.pred, "predictions TSV")->required();
    r->add_option("--resamples", rop.resamples, "bootstrap resamples")->capture_default_str();
    r->add_option("--confidence", rop.confidence, "interval mass")->capture_default_str();
    r->add_option("--json", rop.json_out, "also write the report as JSON");
    r->add_option("--seed", rop.seed, "run seed");
    r->callback([&] { run_report(rop); });

    InspectOpts iop;
    auto* i = app.add_subcommand("inspect-model", "layer shapes and parameter totals");
    i->add_option("--arch", iop.arch, "lenet|vgg|resnet");
    i->add_option("--input", iop.input, "input size HxW")->capture_default_str();
    i->add_option("--classes", iop.classes, "output classes");
    i->add_option("--blocks", iop.blocks, "block count (vgg, resnet)");
    i->add_option("--dense1", iop.dense1, "first dense width");
    i->add_option("--dense2", iop.dense2, "second dense width");
    i->add_option("--model", iop.model, "inspect a saved checkpoint instead");
    i->callback([&] { run_inspect(iop); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const ImageError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const CheckpointError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const EncodeError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    }
    return 0;
}
