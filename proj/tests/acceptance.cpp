// Acceptance gate. Runs every criterion, prints one PASS/FAIL line each, and
// exits nonzero if any failed. argv[1] must point at the inkline CLI binary
// (used by the byte-determinism criterion; everything else is library-level).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <inkline/inkline.hpp>

#include "unit/helpers.hpp"

namespace fs = std::filesystem;
using namespace inkline;

namespace {

int g_failures = 0;

void report(int n, const std::string& label, bool ok, const std::string& detail = "") {
    if (!ok) ++g_failures;
    std::printf("criterion %2d: %s  %s%s%s\n", n, ok ? "PASS" : "FAIL", label.c_str(), detail.empty() ? "" : " — ",
                detail.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

// ------------------------------------------------------------- shared pieces

GrayImage pad_min_width(GrayImage img, int min_w) {
    if (img.width >= min_w) return img;
    GrayImage out(min_w, img.height, 1.0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(x, y);
    return out;
}

std::vector<int> targets_of(const CharVocab& vocab, const std::string& text) {
    auto enc = vocab.encode(text);
    return {enc.begin() + 1, enc.end()};
}

// ------------------------------------------------- 1 + 2: architecture tables

void criterion_params() {
    auto t0 = std::chrono::steady_clock::now();
    ConvNet lenet = build_lenet_classifier(28, 28, 256, 128, 10);
    ConvNet vgg = build_vgg(3, 64, 64, 512, 256, 52);
    ConvNet resnet = build_resnet(3, 64, 64, 26);
    size_t a = lenet.param_count(), b = vgg.param_count(), c = resnet.param_count();
    double secs = seconds_since(t0);
    bool ok = a == 687142 && b == 4625492 && c == 8531242 && secs < 1.0;
    std::ostringstream d;
    d << "lenet " << a << ", vgg " << b << ", resnet " << c << ", " << fmt("%.3f", secs) << "s";
    report(1, "parameter totals", ok, d.str());
}

struct RowSpec {
    std::vector<size_t> shape;
    size_t params;
};

bool chain_matches(ConvNet& net, const std::vector<size_t>& input, const std::vector<RowSpec>& want,
                   bool keep_flatten, std::string& why) {
    if (net.input_shape != input) {
        why = "input shape differs";
        return false;
    }
    std::vector<ShapeRow> rows;
    for (const ShapeRow& r : net.shape_chain())
        if (keep_flatten || r.label != "flatten") rows.push_back(r);
    if (rows.size() != want.size()) {
        why = "row count " + std::to_string(rows.size()) + " vs " + std::to_string(want.size());
        return false;
    }
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].shape != want[i].shape || rows[i].params != want[i].params) {
            why = "row " + std::to_string(i) + ": " + shape_str(rows[i].shape) + "/" +
                  std::to_string(rows[i].params) + " vs " + shape_str(want[i].shape) + "/" +
                  std::to_string(want[i].params);
            return false;
        }
    return true;
}

void criterion_shapes() {
    ConvNet lenet = build_lenet_classifier(28, 28, 256, 128, 10);
    std::vector<RowSpec> lenet_rows = {
        {{28, 28, 20}, 500}, {{14, 14, 20}, 0}, {{14, 14, 50}, 25000}, {{7, 7, 50}, 0},
        {{2450}, 0},         {{256}, 627456},   {{128}, 32896},        {{10}, 1290},
    };
    ConvNet vgg = build_vgg(3, 64, 64, 512, 256, 52);
    std::vector<RowSpec> vgg_rows = {
        {{64, 64, 32}, 288},    {{64, 64, 32}, 9216},    {{32, 32, 32}, 0},  {{32, 32, 64}, 18432},
        {{32, 32, 64}, 36864},  {{16, 16, 64}, 0},       {{16, 16, 128}, 73728},
        {{16, 16, 128}, 147456}, {{8, 8, 128}, 0},       {{512}, 4194816},   {{256}, 131328},
        {{52}, 13364},
    };
    std::string why;
    bool ok = chain_matches(lenet, {28, 28, 1}, lenet_rows, true, why);
    if (ok) ok = chain_matches(vgg, {64, 64, 1}, vgg_rows, false, why);
    report(2, "layer shape chains", ok, ok ? "lenet 8 rows, vgg 12 rows" : why);
}

// -------------------------------------------------------- 3: gradient checks

struct Slot {
    std::vector<Parameter> params;
    std::function<Var(Graph&)> build;

    std::vector<Parameter*> ptrs() {
        std::vector<Parameter*> ps;
        for (Parameter& p : params) ps.push_back(&p);
        return ps;
    }
};

void fill_margin(Parameter& p, Rng& rng, double margin = 0.05) {
    for (double& v : p.value.v) {
        v = rng.uniform(-0.5, 0.5);
        if (std::fabs(v) < margin) v += v < 0 ? -margin : margin;
    }
}

// distinct values so pooling windows never tie under a 1e-5 probe
void fill_distinct(Parameter& p, Rng& rng) {
    std::vector<size_t> order(p.value.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (size_t i = 0; i < order.size(); ++i) p.value[i] = 0.1 * static_cast<double>(order[i]) + rng.uniform(-0.02, 0.02);
}

using TrialFn = std::function<double(Rng&)>;

std::vector<std::pair<std::string, TrialFn>> op_trials() {
    std::vector<std::pair<std::string, TrialFn>> ops;
    auto vec = [](Rng& rng) { return 2 + rng.uniform_int(7); };

    auto binary = [&](const std::string& name, auto apply) {
        return std::make_pair(name, TrialFn([vec, apply](Rng& rng) {
            size_t n = vec(rng);
            Slot s{{Parameter("a", {n}), Parameter("b", {n})}, nullptr};
            fill_random(s.params[0], rng);
            fill_random(s.params[1], rng);
            s.build = [&s, apply](Graph& g) -> Var {
                return g.sumsq(apply(g, g.use(s.params[0]), g.use(s.params[1])));
            };
            return GradCheck{}.max_rel_error(s.ptrs(), s.build);
        }));
    };
    ops.push_back(binary("add", [](Graph& g, Var a, Var b) { return g.add(a, b); }));
    ops.push_back(binary("sub", [](Graph& g, Var a, Var b) { return g.sub(a, b); }));
    ops.push_back(binary("mul", [](Graph& g, Var a, Var b) { return g.mul(a, b); }));

    auto unary = [&](const std::string& name, bool margin, auto apply) {
        return std::make_pair(name, TrialFn([vec, margin, apply](Rng& rng) {
            size_t n = vec(rng);
            Slot s{{Parameter("a", {n})}, nullptr};
            if (margin) fill_margin(s.params[0], rng);
            else fill_random(s.params[0], rng);
            s.build = [&s, apply](Graph& g) -> Var { return g.sumsq(apply(g, g.use(s.params[0]))); };
            return GradCheck{}.max_rel_error(s.ptrs(), s.build);
        }));
    };
    ops.push_back(unary("relu", true, [](Graph& g, Var a) { return g.relu(a); }));
    ops.push_back(unary("sigmoid", false, [](Graph& g, Var a) { return g.sigmoid(a); }));
    ops.push_back(unary("tanh", false, [](Graph& g, Var a) { return g.tanh_(a); }));
    ops.push_back(unary("scale", false, [](Graph& g, Var a) { return g.scale(a, -1.7); }));
    ops.push_back(unary("add_const", false, [](Graph& g, Var a) { return g.add_const(a, 0.3); }));
    ops.push_back(unary("sum", false, [](Graph& g, Var a) { return g.sum(g.mul(a, a)); }));
    ops.push_back(unary("sumsq", false, [](Graph& g, Var a) { return g.sumsq(a); }));

    ops.emplace_back("reshape", TrialFn([](Rng& rng) {
        size_t m = 2 + rng.uniform_int(3), n = 2 + rng.uniform_int(3);
        Slot s{{Parameter("a", {m, n})}, nullptr};
        fill_random(s.params[0], rng);
        s.build = [&s, m, n](Graph& g) -> Var { return g.sumsq(g.reshape(g.use(s.params[0]), {n, m})); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("concat", TrialFn([](Rng& rng) {
        Slot s{{Parameter("a", {2 + rng.uniform_int(3)}), Parameter("b", {1 + rng.uniform_int(4)}),
                Parameter("c", {2 + rng.uniform_int(2)})},
               nullptr};
        for (auto& p : s.params) fill_random(p, rng);
        s.build = [&s](Graph& g) -> Var {
            return g.sumsq(g.concat({g.use(s.params[0]), g.use(s.params[1]), g.use(s.params[2])}));
        };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("slice", TrialFn([](Rng& rng) {
        size_t n = 5 + rng.uniform_int(4);
        size_t off = rng.uniform_int((n) - 2), len = 1 + rng.uniform_int((n) - off - 1);
        Slot s{{Parameter("a", {n})}, nullptr};
        fill_random(s.params[0], rng);
        s.build = [&s, off, len](Graph& g) -> Var { return g.sumsq(g.slice(g.use(s.params[0]), off, len)); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("stack_rows", TrialFn([](Rng& rng) {
        size_t n = 2 + rng.uniform_int(4);
        Slot s{{Parameter("a", {n}), Parameter("b", {n}), Parameter("c", {n})}, nullptr};
        for (auto& p : s.params) fill_random(p, rng);
        s.build = [&s](Graph& g) -> Var {
            return g.sumsq(g.stack_rows({g.use(s.params[0]), g.use(s.params[1]), g.use(s.params[2])}));
        };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("matmul", TrialFn([](Rng& rng) {
        size_t a = 2 + rng.uniform_int(3), b = 2 + rng.uniform_int(3), c = 2 + rng.uniform_int(3);
        Slot s{{Parameter("A", {a, b}), Parameter("B", {b, c})}, nullptr};
        for (auto& p : s.params) fill_random(p, rng);
        s.build = [&s](Graph& g) -> Var { return g.sumsq(g.matmul(g.use(s.params[0]), g.use(s.params[1]))); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("dense", TrialFn([](Rng& rng) {
        size_t n = 2 + rng.uniform_int(4), m = 2 + rng.uniform_int(4);
        Slot s{{Parameter("x", {n}), Parameter("W", {n, m}), Parameter("b", {m})}, nullptr};
        for (auto& p : s.params) fill_random(p, rng);
        s.build = [&s](Graph& g) -> Var {
            return g.sumsq(g.dense(g.use(s.params[0]), g.use(s.params[1]), g.use(s.params[2])));
        };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("add_rowvec", TrialFn([](Rng& rng) {
        size_t r = 2 + rng.uniform_int(3), c = 2 + rng.uniform_int(4);
        Slot s{{Parameter("M", {r, c}), Parameter("v", {c})}, nullptr};
        for (auto& p : s.params) fill_random(p, rng);
        s.build = [&s](Graph& g) -> Var { return g.sumsq(g.add_rowvec(g.use(s.params[0]), g.use(s.params[1]))); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("softmax", TrialFn([](Rng& rng) {
        size_t n = 3 + rng.uniform_int(4);
        Slot s{{Parameter("a", {n})}, nullptr};
        fill_random(s.params[0], rng, 1.5);
        Tensor w({n});
        for (size_t i = 0; i < n; ++i) w[i] = rng.uniform(-1, 1);
        s.build = [&s, w](Graph& g) -> Var { return g.sum(g.mul(g.softmax(g.use(s.params[0])), g.input(w))); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("dropout", TrialFn([](Rng& rng) {
        size_t n = 4 + rng.uniform_int(5);
        uint64_t mask_seed = rng.u64();
        Slot s{{Parameter("a", {n})}, nullptr};
        fill_random(s.params[0], rng);
        s.build = [&s, mask_seed](Graph& g) -> Var {
            g.training = true;
            Rng mask_rng(mask_seed);  // same mask on every rebuild
            g.rng = &mask_rng;
            Var y = g.dropout(g.use(s.params[0]), 0.3);
            g.rng = nullptr;
            return g.sumsq(y);
        };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("sequence_cross_entropy", TrialFn([](Rng& rng) {
        size_t T = 2 + rng.uniform_int(3), V = 3 + rng.uniform_int(3);
        std::vector<int> targets(T);
        std::vector<double> weights(T);
        for (size_t t = 0; t < T; ++t) {
            targets[t] = static_cast<int>(rng.uniform_int(V));
            weights[t] = rng.uniform(0.2, 1.5);
        }
        Slot s{{Parameter("logits", {T, V})}, nullptr};
        fill_random(s.params[0], rng, 1.0);
        s.build = [&s, targets, weights](Graph& g) -> Var {
            return g.weighted_sequence_cross_entropy(g.use(s.params[0]), targets, weights);
        };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    auto conv = [](size_t stride) {
        return TrialFn([stride](Rng& rng) {
            size_t h = 3 + rng.uniform_int(3), w = 3 + rng.uniform_int(3);
            size_t ci = 1 + rng.uniform_int(2), co = 1 + rng.uniform_int(2);
            Slot s{{Parameter("x", {h, w, ci}), Parameter("K", {3, 3, ci, co}), Parameter("b", {co})}, nullptr};
            for (auto& p : s.params) fill_random(p, rng);
            s.build = [&s, stride](Graph& g) -> Var {
                return g.sumsq(conv2d(g, g.use(s.params[0]), g.use(s.params[1]), g.use(s.params[2]), stride));
            };
            return GradCheck{}.max_rel_error(s.ptrs(), s.build);
        });
    };
    ops.emplace_back("conv2d_s1", conv(1));
    ops.emplace_back("conv2d_s2", conv(2));

    ops.emplace_back("maxpool2", TrialFn([](Rng& rng) {
        size_t h = 3 + rng.uniform_int(3), w = 3 + rng.uniform_int(3), c = 1 + rng.uniform_int(2);
        Slot s{{Parameter("x", {h, w, c})}, nullptr};
        fill_distinct(s.params[0], rng);
        s.build = [&s](Graph& g) -> Var { return g.sumsq(maxpool2(g, g.use(s.params[0]))); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("subsample2", TrialFn([](Rng& rng) {
        size_t h = 3 + rng.uniform_int(4), w = 3 + rng.uniform_int(4), c = 1 + rng.uniform_int(2);
        Slot s{{Parameter("x", {h, w, c})}, nullptr};
        fill_random(s.params[0], rng);
        s.build = [&s](Graph& g) -> Var { return g.sumsq(subsample2(g, g.use(s.params[0]))); };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    ops.emplace_back("batchnorm", TrialFn([](Rng& rng) {
        size_t h = 3 + rng.uniform_int(2), w = 3 + rng.uniform_int(2), c = 1 + rng.uniform_int(2);
        Slot s{{Parameter("x", {h, w, c}), Parameter("gamma", {c}), Parameter("beta", {c})}, nullptr};
        fill_random(s.params[0], rng);
        fill_margin(s.params[1], rng, 0.2);
        fill_random(s.params[2], rng);
        auto run_mean = std::make_shared<Tensor>(std::vector<size_t>{c});
        auto run_var = std::make_shared<Tensor>(std::vector<size_t>{c});
        s.build = [&s, run_mean, run_var](Graph& g) -> Var {
            g.training = true;
            return g.sumsq(batchnorm(g, g.use(s.params[0]), g.use(s.params[1]), g.use(s.params[2]), *run_mean,
                                     *run_var));
        };
        return GradCheck{}.max_rel_error(s.ptrs(), s.build);
    }));

    return ops;
}

// central differences on a random subset of parameter elements
double sampled_grad_error(std::vector<Parameter*> params, const std::function<Var(Graph&)>& build, Rng& rng,
                          size_t probes) {
    std::vector<Tensor> analytic;
    {
        Graph g;
        Var loss = build(g);
        for (Parameter* p : params) p->zero_grad();
        g.backward(loss);
        for (Parameter* p : params) analytic.push_back(p->grad);
    }
    const double eps = 1e-5;
    double worst = 0;
    for (size_t k = 0; k < probes; ++k) {
        // probe coordinates whose gradient clears the finite-difference noise
        // floor; the op-level checks cover every element of small graphs
        size_t pi = 0, j = 0;
        for (int draw = 0; draw < 200; ++draw) {
            pi = rng.uniform_int(params.size());
            j = rng.uniform_int(params[pi]->value.size());
            if (std::fabs(analytic[pi][j]) >= 1e-4) break;
        }
        Parameter* p = params[pi];
        double keep = p->value[j];
        p->value[j] = keep + eps;
        double up;
        {
            Graph g;
            up = g.val(build(g))[0];
        }
        p->value[j] = keep - eps;
        double dn;
        {
            Graph g;
            dn = g.val(build(g))[0];
        }
        p->value[j] = keep;
        double fd = (up - dn) / (2 * eps);
        double an = analytic[pi][j];
        double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
        worst = std::max(worst, std::fabs(fd - an) / denom);
    }
    return worst;
}

double model_trial(Rng& rng, bool lstm) {
    ModelConfig mc;
    mc.reader_family = "lenet";
    mc.height = 8;
    mc.patch = {5, 2};
    mc.enc.cell = lstm ? CellKind::lstm : CellKind::gru;
    mc.enc.size = 3;
    mc.enc.layers = 1;
    mc.enc.bidirectional = true;
    CharVocab vocab = CharVocab::from_text("ab");
    Seq2SeqModel model = make_seq2seq(mc, vocab);
    model.dropout = 0.0;
    auto params = model.parameters();
    for (Parameter* p : params) fill_random(*p, rng, 0.4);

    GrayImage img(14, 8);
    for (double& px : img.pixels) px = rng.uniform(0.0, 1.0);
    std::string word = rng.uniform_int(2) ? "ab" : "b";
    std::vector<int> target = targets_of(vocab, word);
    std::vector<double> weights(target.size(), 1.0);

    auto build = [&](Graph& g) -> Var {
        auto out = model.forward_train(g, img, target, true);
        return g.weighted_sequence_cross_entropy(out.logits, target, weights);
    };
    return sampled_grad_error(params, build, rng, 12);
}

void criterion_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240811);
    double worst = 0;
    std::string worst_op;
    size_t trials = 0;
    for (auto& [name, fn] : op_trials())
        for (int t = 0; t < 3; ++t) {
            double e = fn(rng);
            ++trials;
            if (e > worst) {
                worst = e;
                worst_op = name;
            }
        }
    while (trials < 100) {
        double e = model_trial(rng, trials % 2 == 0);
        ++trials;
        if (e > worst) {
            worst = e;
            worst_op = "seq2seq";
        }
    }
    double secs = seconds_since(t0);
    bool ok = worst < 1e-4 && secs < 120.0 && trials == 100;
    std::ostringstream d;
    d << trials << " trials, worst " << fmt("%.2e", worst) << " (" << worst_op << "), " << fmt("%.1f", secs) << "s";
    report(3, "finite-difference gradients", ok, d.str());
}

// ------------------------------------------------------- 4: slant round trip

GrayImage stroke_card(int w, int h) {
    GrayImage img(w, h, 1.0);
    for (int k = 0; k < 7; ++k) {
        int x = 35 + 15 * k;
        for (int y = 2; y <= h - 3; ++y) img.at(x, y) = 0.0;
    }
    return img;
}

void criterion_slant() {
    NormalizeConfig cfg;
    GrayImage card = stroke_card(160, 60);
    bool ok = true;
    std::ostringstream d;
    for (double alpha : {-0.4, -0.2, 0.0, 0.2, 0.4}) {
        GrayImage slanted = correct_slant(card, -alpha);  // shear so strokes follow x0 + alpha*y
        double est = estimate_slant(slanted, cfg).alpha;
        double rest = estimate_slant(correct_slant(slanted, est), cfg).alpha;
        if (std::fabs(est - alpha) > 0.05 || std::fabs(rest) > 0.02) {
            ok = false;
            d << "alpha " << alpha << ": est " << fmt("%.3f", est) << ", after fix " << fmt("%.3f", rest);
            break;
        }
    }
    report(4, "slant estimate round trip", ok, ok ? "5 alphas within 0.05, corrected under 0.02" : d.str());
}

// --------------------------------------------------------- 5: desk overfit

void criterion_overfit(const fs::path& ws) {
    auto t0 = std::chrono::steady_clock::now();
    std::string dir = (ws / "overfit").string();
    auto entries = generate_synth_dataset(builtin_glyphs(5, 99), builtin_words(), SynthSizes{32, 1, 1}, 99, dir);

    std::vector<Sample> train;
    for (const auto& e : entries) {
        if (e.partition != Partition::train) continue;
        GrayImage img = resize_height(load_png((fs::path(dir) / e.path).string()), 16);
        train.push_back({pad_min_width(img, 10), e.transcription});
    }
    std::vector<std::string> texts;
    for (auto& s : train) texts.push_back(s.text);
    CharVocab vocab = CharVocab::from_strings(texts);

    ModelConfig mc;
    mc.reader_family = "lenet";
    mc.height = 16;
    mc.patch = {10, 2};
    mc.enc.cell = CellKind::gru;
    mc.enc.size = 64;
    mc.enc.layers = 1;
    mc.enc.bidirectional = true;
    Seq2SeqModel model = make_seq2seq(mc, vocab);

    TrainConfig tc;
    tc.opt.kind = "adam";
    tc.opt.lr = 0.001;
    tc.opt.decay = 0.02;
    tc.epochs = 300;
    tc.batch = 2;
    tc.patience = 300;
    tc.dropout = 0.0;
    tc.l2 = 0.0;
    tc.seed = 99;
    tc.max_decode_len = 8;
    tc.stop_at_zero_wer = true;

    TrainResult r = train_loop(model, train, train, tc);
    double secs = seconds_since(t0);
    bool ok = train.size() == 32 && r.best_val_wer == 0.0 && r.history.size() <= 300 && secs < 600.0;
    std::ostringstream d;
    d << "train wer " << r.best_val_wer << " after " << r.history.size() << " epochs, " << fmt("%.1f", secs) << "s";
    report(5, "32-word overfit, patch reader + BiGRU(64) + attention", ok, d.str());
}

// -------------------------------------------------------- 6: metric oracle

size_t lev_oracle(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    std::vector<std::vector<size_t>> D(a.size() + 1, std::vector<size_t>(b.size() + 1, 0));
    for (size_t i = 0; i <= a.size(); ++i) D[i][0] = i;
    for (size_t j = 0; j <= b.size(); ++j) D[0][j] = j;
    for (size_t i = 1; i <= a.size(); ++i)
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = D[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            D[i][j] = std::min({D[i - 1][j] + 1, D[i][j - 1] + 1, sub});
        }
    return D[a.size()][b.size()];
}

std::string random_word(Rng& rng, size_t min_len, size_t max_len) {
    static const std::vector<std::string> cps = {"a", "b", "c", "\xc3\xa9"};  // includes a two-byte char
    size_t len = min_len + rng.uniform_int((max_len) - min_len + 1);
    std::string w;
    for (size_t i = 0; i < len; ++i) w += cps[rng.uniform_int(cps.size())];
    return w;
}

void criterion_metrics() {
    Rng rng(606);
    bool ok = true;
    std::string why;

    for (size_t i = 0; i < 1000 && ok; ++i) {
        std::string pred = random_word(rng, 0, 12), ref = random_word(rng, 1, 12);
        auto p = utf8_decode(pred), r = utf8_decode(ref);
        size_t want = lev_oracle(p, r);
        if (levenshtein(p, r) != want) {
            ok = false;
            why = "levenshtein mismatch on '" + pred + "' vs '" + ref + "'";
        } else if (cer(pred, ref) != static_cast<double>(want) / r.size()) {
            ok = false;
            why = "cer mismatch";
        }
    }

    // corpus metrics against direct recomputation
    for (size_t c = 0; c < 20 && ok; ++c) {
        std::vector<std::string> preds, refs;
        size_t edits = 0, len = 0, wrong = 0;
        for (size_t i = 0; i < 50; ++i) {
            preds.push_back(random_word(rng, 0, 8));
            refs.push_back(random_word(rng, 1, 8));
            auto p = utf8_decode(preds.back()), r = utf8_decode(refs.back());
            edits += lev_oracle(p, r);
            len += r.size();
            wrong += preds.back() != refs.back();
        }
        if (corpus_cer(preds, refs) != static_cast<double>(edits) / len) {
            ok = false;
            why = "corpus_cer mismatch";
        } else if (wer(preds, refs) != static_cast<double>(wrong) / preds.size()) {
            ok = false;
            why = "wer mismatch";
        }
    }

    for (size_t i = 0; i < 1000 && ok; ++i) {
        auto a = utf8_decode(random_word(rng, 0, 10));
        auto b = utf8_decode(random_word(rng, 0, 10));
        auto c = utf8_decode(random_word(rng, 0, 10));
        size_t ab = levenshtein(a, b), ba = levenshtein(b, a);
        size_t ac = levenshtein(a, c), bc = levenshtein(b, c);
        if (levenshtein(a, a) != 0 || ab != ba || ac > ab + bc || (ab == 0) != (a == b)) {
            ok = false;
            why = "axiom violated at triple " + std::to_string(i);
        }
    }
    report(6, "edit-distance metrics vs DP oracle", ok, ok ? "1000 pairs, 20 corpora, 1000 triples" : why);
}

// ------------------------------------------------- 7: lexicon decoder oracle

void criterion_lexicon() {
    Rng rng(707);
    std::set<std::string> uniq;
    while (uniq.size() < 5000) uniq.insert(random_word(rng, 1, 9));
    std::vector<std::string> words(uniq.begin(), uniq.end());
    Lexicon lex(words);

    auto scan = [&](const std::string& pred) {
        auto p = utf8_decode(pred);
        std::string best;
        size_t best_d = 0, best_len = 0;
        bool first = true;
        for (const auto& w : words) {
            auto cw = utf8_decode(w);
            size_t d = lev_oracle(p, cw);
            bool better = first || d < best_d ||
                          (d == best_d && (cw.size() < best_len || (cw.size() == best_len && w < best)));
            if (better) {
                best = w;
                best_d = d;
                best_len = cw.size();
                first = false;
            }
        }
        return std::make_pair(best, best_d);
    };

    bool ok = true;
    std::string why;
    for (size_t q = 0; q < 200 && ok; ++q) {
        std::string pred = q % 5 == 0 ? words[rng.uniform_int(words.size())] : random_word(rng, 0, 11);
        auto got = nearest_word(pred, lex);
        auto want = scan(pred);
        if (got != want) {
            ok = false;
            why = "query '" + pred + "': got (" + got.first + "," + std::to_string(got.second) + ") want (" +
                  want.first + "," + std::to_string(want.second) + ")";
        }
    }
    report(7, "indexed nearest word vs linear scan", ok, ok ? "200 queries, 5000 words, ties included" : why);
}

// --------------------------------------------- 8: attention weight simplexes

void criterion_attention() {
    Rng rng(808);
    ModelConfig mc;
    mc.reader_family = "lenet";
    mc.height = 8;
    mc.patch = {5, 2};
    mc.enc.cell = CellKind::gru;
    mc.enc.size = 4;
    mc.enc.layers = 1;
    mc.enc.bidirectional = true;
    CharVocab vocab = CharVocab::from_text("abc");
    Seq2SeqModel model = make_seq2seq(mc, vocab);
    model.dropout = 0.0;
    auto params = model.parameters();

    bool ok = true;
    size_t steps = 0;
    double worst_gap = 0;
    for (size_t pass = 0; pass < 100 && ok; ++pass) {
        for (Parameter* p : params) fill_random(*p, rng, 1.0);
        GrayImage img(12 + static_cast<int>(rng.uniform_int(14)), 8);
        for (double& px : img.pixels) px = rng.uniform(0.0, 1.0);

        std::vector<std::vector<double>> rows;
        if (pass % 2 == 0) {
            Graph g;
            std::string word;
            for (size_t i = 0, n = 1 + rng.uniform_int(3); i < n; ++i) word += "abc"[rng.uniform_int(3)];
            auto out = model.forward_train(g, img, targets_of(vocab, word), true);
            for (Var a : out.attn_weights) rows.push_back(g.val(a).v);
        } else {
            model.greedy_decode(img, 5, &rows);
        }
        for (const auto& row : rows) {
            ++steps;
            double sum = 0;
            for (double v : row) {
                if (v < 0.0) ok = false;
                sum += v;
            }
            worst_gap = std::max(worst_gap, std::fabs(sum - 1.0));
            if (worst_gap > 1e-12) ok = false;
        }
    }
    std::ostringstream d;
    d << "100 passes, " << steps << " steps, worst |sum-1| " << fmt("%.2e", worst_gap);
    report(8, "attention weights form a simplex", ok, d.str());
}

// -------------------------------------- 9: lr schedule and early stopping

void criterion_schedule() {
    bool ok = true;
    std::string why;

    for (double lr0 : {1e-3, 0.5}) {
        for (size_t e = 0; e <= 200 && ok; ++e) {
            double got = lr_at(lr0, 0.02, e);
            double want = lr0 * std::pow(0.98, static_cast<double>(e));
            if (std::fabs(got - want) > 4 * std::numeric_limits<double>::epsilon() * want) {
                ok = false;
                why = "lr_at epoch " + std::to_string(e);
            }
        }
    }

    // scripted traces: returned epoch must be the earliest strict minimum of
    // the examined prefix, and the walk must stop exactly at the patience bound
    Rng rng(909);
    for (size_t t = 0; t < 300 && ok; ++t) {
        size_t n = 1 + rng.uniform_int(40), patience = 1 + rng.uniform_int(8);
        std::vector<double> trace(n);
        for (double& v : trace) v = (rng.uniform_int(6)) / 4.0;
        size_t ran = 0;
        size_t best = best_epoch_by_patience(trace, patience, &ran);
        size_t argmin = 0;
        for (size_t i = 1; i < ran; ++i)
            if (trace[i] < trace[argmin]) argmin = i;
        bool stopped_at_bound = ran == n || (ran - 1) - best >= patience;
        if (best != argmin || ran > n || !stopped_at_bound) {
            ok = false;
            why = "trace " + std::to_string(t);
        }
    }

    // hand-scripted: improvement, plateau, tie
    if (ok) {
        auto run = [](const std::vector<double>& trace, size_t patience) {
            size_t ran = 0;
            size_t best = best_epoch_by_patience(trace, patience, &ran);
            return std::make_pair(best, ran);
        };
        ok = run({5, 4, 3, 2, 1}, 3) == std::make_pair<size_t, size_t>(4, 5) &&
             run({3, 2, 2, 2, 2, 2, 2, 2}, 4) == std::make_pair<size_t, size_t>(1, 6) &&
             run({4, 1, 3, 1, 5}, 10) == std::make_pair<size_t, size_t>(1, 5);
        if (!ok) why = "hand-scripted trace";
    }
    report(9, "lr decay and patience rule", ok, ok ? "402 schedule points, 303 traces" : why);
}

// ------------------------------------------------- 10: n-gram normalization

void criterion_ngram() {
    Rng rng(1010);
    const std::vector<std::string> toks = {"a", "b", "c", "d", "e", "f"};
    bool ok = true;
    std::string why;
    double worst = 0;

    for (size_t n : {1u, 2u, 3u}) {
        for (double delta : {0.1, 1.0}) {
            if (!ok) break;
            NGramLM lm(n, delta);
            std::vector<std::vector<std::string>> corpus;
            for (size_t s = 0; s < 30; ++s) {
                std::vector<std::string> seq(3 + rng.uniform_int(8));
                for (auto& t : seq) t = toks[rng.uniform_int(toks.size())];
                lm.add_sequence(seq);
                corpus.push_back(seq);
            }
            auto check_ctx = [&](const std::vector<std::string>& ctx) {
                double sum = 0;
                for (const auto& t : toks) sum += lm.prob(ctx, t);
                sum += lm.prob(ctx, NGramLM::kUnknown);
                worst = std::max(worst, std::fabs(sum - 1.0));
                if (worst > 1e-12) {
                    ok = false;
                    why = "order " + std::to_string(n) + " delta " + std::to_string(delta);
                }
            };
            for (size_t probe = 0; probe < 50 && ok; ++probe) {
                const auto& seq = corpus[rng.uniform_int(corpus.size())];
                size_t len = n - 1;
                if (seq.size() < len) continue;
                size_t off = len == 0 ? 0 : rng.uniform_int((seq.size()) - len + 1);
                check_ctx({seq.begin() + off, seq.begin() + off + len});
            }
            if (ok && n > 1) check_ctx(std::vector<std::string>(n - 1, "zz"));  // unseen context
        }
    }

    // counted by hand: ab, ab, aa => P(b|a) = (2+1)/(3+3) with delta 1
    if (ok) {
        NGramLM lm(2, 1.0);
        lm.add_sequence({"a", "b"});
        lm.add_sequence({"a", "b"});
        lm.add_sequence({"a", "a"});
        double pb = lm.prob({"a"}, "b");
        double pa = lm.prob({"a"}, "a");
        double pu = lm.prob({"a"}, NGramLM::kUnknown);
        if (pb != 0.5 || std::fabs(pa - 2.0 / 6.0) > 1e-15 || std::fabs(pu - 1.0 / 6.0) > 1e-15) {
            ok = false;
            why = "hand-counted bigram, P(b|a) = " + std::to_string(pb);
        }
    }
    report(10, "smoothed n-gram distributions", ok,
           ok ? "orders 1-3, two deltas, worst |sum-1| " + fmt("%.2e", worst) : why);
}

// ----------------------------------------------- 11: CLI byte determinism

int run_cli(const std::string& cli, const std::string& args) {
    std::string cmd = "'" + cli + "' " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool tree_equal(const fs::path& a, const fs::path& b, std::string& why) {
    auto list = [](const fs::path& root) {
        std::vector<fs::path> rel;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), root));
        std::sort(rel.begin(), rel.end());
        return rel;
    };
    auto la = list(a), lb = list(b);
    if (la != lb) {
        why = "file lists differ under " + a.string();
        return false;
    }
    for (const auto& r : la)
        if (slurp(a / r) != slurp(b / r)) {
            why = (a / r).string() + " differs";
            return false;
        }
    return true;
}

void criterion_determinism(const std::string& cli, const fs::path& ws) {
    fs::path root = ws / "determinism";
    fs::create_directories(root);
    fs::path cfg_path = root / "run.json";
    {
        nlohmann::json cfg = {
            {"seed", 21},
            {"synth",
             {{"exemplars", 2}, {"train", 8}, {"validation", 2}, {"test", 2},
              {"words", {"ab", "ba", "aa", "bb"}}}},
            {"model",
             {{"reader", "lenet"}, {"height", 16}, {"patch_width", 6}, {"patch_step", 3}, {"cell", "gru"},
              {"encoder_size", 8}, {"encoder_layers", 1}, {"bidirectional", true}}},
            {"train",
             {{"optimizer", "adam"}, {"lr", 0.01}, {"decay", 0.0}, {"epochs", 2}, {"batch", 4}, {"patience", 10},
              {"dropout", 0.0}, {"l2", 0.0}, {"max_decode_len", 4}}},
        };
        std::ofstream f(cfg_path);
        f << cfg.dump(2) << "\n";
    }
    auto at = [&](const char* rel) { return (root / rel).string(); };
    std::string base_args = "--config '" + cfg_path.string() + "'";

    bool ok = true;
    std::string why;
    auto step = [&](const std::string& args) {
        if (!ok) return;
        if (run_cli(cli, args) != 0) {
            ok = false;
            why = "command failed: " + args.substr(0, 40);
        }
    };

    step("synth " + base_args + " --out-dir '" + at("s1") + "'");
    step("synth " + base_args + " --out-dir '" + at("s2") + "'");
    if (ok) ok = tree_equal(root / "s1", root / "s2", why);

    std::string manifest = "--manifest '" + at("s1/manifest.tsv") + "'";
    step("normalize " + manifest + " --out-dir '" + at("n1") + "' --seed 5");
    step("normalize " + manifest + " --out-dir '" + at("n2") + "' --seed 5");
    if (ok) ok = tree_equal(root / "n1", root / "n2", why);

    step("augment " + manifest + " --out-dir '" + at("a1") + "' --copies 2 --seed 5");
    step("augment " + manifest + " --out-dir '" + at("a2") + "' --copies 2 --seed 5");
    if (ok) ok = tree_equal(root / "a1", root / "a2", why);

    step("train " + base_args + " --data '" + at("s1") + "' --out '" + at("m1.ink") + "'");
    step("train " + base_args + " --data '" + at("s1") + "' --out '" + at("m2.ink") + "'");
    if (ok && slurp(root / "m1.ink") != slurp(root / "m2.ink")) {
        ok = false;
        why = "checkpoints differ";
    }
    if (ok && slurp(root / "m1.ink").empty()) {
        ok = false;
        why = "empty checkpoint";
    }
    report(11, "normalize/augment/synth/train byte determinism", ok,
           ok ? "two runs each, identical bytes" : why);
}

// ------------------------------------------------- 12: normalization payoff

void criterion_ablation(const fs::path& ws) {
    auto t0 = std::chrono::steady_clock::now();
    std::string dir = (ws / "ablation").string();
    auto entries = generate_synth_dataset(builtin_glyphs(5, 42), builtin_words(), SynthSizes{192, 64, 0}, 1234, dir);

    // inject slope and slant noise
    std::vector<GrayImage> noisy;
    std::vector<std::string> texts;
    std::vector<Partition> parts;
    for (size_t i = 0; i < entries.size(); ++i) {
        GrayImage img = load_png((fs::path(dir) / entries[i].path).string());
        Rng noise(mix64(1234, i));
        double angle = noise.uniform(-0.07, 0.07);
        double alpha = noise.uniform(-0.35, 0.35);
        img = correct_slant(img, -alpha);
        img = correct_slope(img, -angle);
        noisy.push_back(std::move(img));
        texts.push_back(entries[i].transcription);
        parts.push_back(entries[i].partition);
    }
    CharVocab vocab = CharVocab::from_strings(texts);

    NormalizeConfig nc;
    nc.target_width = 96;
    auto build_sets = [&](bool normalized, std::vector<Sample>& tr, std::vector<Sample>& va) {
        for (size_t i = 0; i < noisy.size(); ++i) {
            GrayImage img = normalized ? normalize_pipeline(noisy[i], nc) : noisy[i];
            img = pad_min_width(resize_height(img, 16), 6);
            (parts[i] == Partition::train ? tr : va).push_back({img, texts[i]});
        }
    };
    std::vector<Sample> tr_raw, va_raw, tr_norm, va_norm;
    build_sets(false, tr_raw, va_raw);
    build_sets(true, tr_norm, va_norm);

    ModelConfig mc;
    mc.reader_family = "lenet";
    mc.height = 16;
    mc.patch = {6, 3};
    mc.enc.cell = CellKind::gru;
    mc.enc.size = 24;
    mc.enc.layers = 1;
    mc.enc.bidirectional = true;

    AugmentConfig ac;  // toned down for 16px-tall inputs
    ac.translate_px = 1;
    ac.p_morph = 0.0;
    ac.slant_max = 0.1;
    ac.p_elastic = 0.2;

    int wins = 0;
    std::ostringstream d;
    for (uint64_t seed : {1, 2, 3}) {
        TrainConfig tc;
        tc.opt.kind = "adam";
        tc.opt.lr = 0.01;
        tc.opt.decay = 0.0;
        tc.epochs = 90;
        tc.batch = 8;
        tc.patience = 90;
        tc.dropout = 0.0;
        tc.l2 = 0.0;
        tc.seed = seed;
        tc.max_decode_len = 6;

        Seq2SeqModel raw_model = make_seq2seq(mc, vocab);
        TrainResult raw = train_loop(raw_model, tr_raw, va_raw, tc);

        SampleTransform hook = [&ac, seed](const GrayImage& img, size_t sample, size_t epoch) {
            Rng arng(augment_seed(seed, sample, epoch));
            return augment(img, ac, arng);
        };
        Seq2SeqModel norm_model = make_seq2seq(mc, vocab);
        TrainResult norm = train_loop(norm_model, tr_norm, va_norm, tc, hook);

        wins += norm.best_val_wer <= raw.best_val_wer;
        d << " s" << seed << " " << fmt("%.2f", norm.best_val_wer) << "/" << fmt("%.2f", raw.best_val_wer);
    }
    double secs = seconds_since(t0);
    bool ok = wins >= 2;
    report(12, "normalization+augmentation beats neither", ok,
           "wins " + std::to_string(wins) + "/3 (norm/raw wer:" + d.str() + "), " + fmt("%.0f", secs) + "s");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-inkline-cli>\n", argv[0]);
        return 2;
    }
    std::string cli = argv[1];
    fs::path ws = fs::current_path() / "acceptance_tmp";
    fs::remove_all(ws);
    fs::create_directories(ws);

    auto guard = [&](int n, const char* label, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(n, label, false, std::string("exception: ") + e.what());
        }
    };

    guard(1, "parameter totals", [] { criterion_params(); });
    guard(2, "layer shape chains", [] { criterion_shapes(); });
    guard(3, "finite-difference gradients", [] { criterion_gradients(); });
    guard(4, "slant estimate round trip", [] { criterion_slant(); });
    guard(5, "32-word overfit", [&] { criterion_overfit(ws); });
    guard(6, "edit-distance metrics", [] { criterion_metrics(); });
    guard(7, "lexicon decoder", [] { criterion_lexicon(); });
    guard(8, "attention simplex", [] { criterion_attention(); });
    guard(9, "schedule and stopping", [] { criterion_schedule(); });
    guard(10, "n-gram normalization", [] { criterion_ngram(); });
    guard(11, "byte determinism", [&] { criterion_determinism(cli, ws); });
    guard(12, "normalization ablation", [&] { criterion_ablation(ws); });

    fs::remove_all(ws);
    std::printf("%d/12 criteria passed\n", 12 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
