#pragma once

#include <memory>
#include <optional>

#include "inkline/image.hpp"
#include "inkline/nn.hpp"

namespace inkline {

enum class Act { none, relu, softmax };

// One stage of a feed-forward conv net. Residual modules carry their inner
// path in `path` and add a (possibly subsampled) identity skip around it.
struct Layer {
    enum class Kind { conv, pool, flatten, dense, batchnorm, residual };
    Kind kind{};
    std::string label;
    Act act = Act::none;

    std::unique_ptr<Parameter> A;  // conv kernel / dense W / bn gamma
    std::unique_ptr<Parameter> B;  // conv or dense bias / bn beta
    Tensor run_mean, run_var;      // bn
    size_t stride = 1;             // conv
    size_t skip_stride = 1;        // residual
    std::vector<Layer> path;       // residual inner layers
};

namespace detail {

inline Layer conv_layer(std::string name, size_t k, size_t ci, size_t co, bool bias, Act act, size_t stride = 1) {
    Layer l;
    l.kind = Layer::Kind::conv;
    l.label = name;
    l.act = act;
    l.A = std::make_unique<Parameter>(name + ".K", std::vector<size_t>{k, k, ci, co});
    if (bias) l.B = std::make_unique<Parameter>(name + ".b", std::vector<size_t>{co});
    l.stride = stride;
    return l;
}

inline Layer dense_layer(std::string name, size_t in, size_t out, Act act) {
    Layer l;
    l.kind = Layer::Kind::dense;
    l.label = name;
    l.act = act;
    l.A = std::make_unique<Parameter>(name + ".W", std::vector<size_t>{in, out});
    l.B = std::make_unique<Parameter>(name + ".b", std::vector<size_t>{out});
    return l;
}

inline Layer bn_layer(std::string name, size_t c, Act act = Act::none) {
    Layer l;
    l.kind = Layer::Kind::batchnorm;
    l.label = name;
    l.act = act;
    l.A = std::make_unique<Parameter>(name + ".gamma", std::vector<size_t>{c});
    l.B = std::make_unique<Parameter>(name + ".beta", std::vector<size_t>{c});
    l.A->value.fill(1.0);
    l.run_mean = Tensor({c});
    l.run_var = Tensor({c}, 1.0);
    return l;
}

inline Layer pool_layer(std::string name) {
    Layer l;
    l.kind = Layer::Kind::pool;
    l.label = name;
    return l;
}

inline Layer flatten_layer(std::string name) {
    Layer l;
    l.kind = Layer::Kind::flatten;
    l.label = name;
    return l;
}

}  // namespace detail

struct ShapeRow {
    std::string label;
    std::vector<size_t> shape;
    size_t params;
};

struct ConvNet {
    std::string family;
    std::vector<size_t> input_shape;  // {h,w,c}
    std::vector<Layer> layers;

    Var forward(Graph& g, Var x) { return forward_layers(g, x, layers); }

    // run all but any trailing flatten (full-image readers need the maps)
    Var forward_maps(Graph& g, Var x) {
        size_t n = layers.size();
        if (n && layers[n - 1].kind == Layer::Kind::flatten) --n;
        Var h = x;
        for (size_t i = 0; i < n; ++i) h = forward_one(g, h, layers[i]);
        return h;
    }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        collect(layers, ps);
        return ps;
    }

    size_t param_count() {
        size_t n = 0;
        for (Parameter* p : parameters()) n += p->size();
        // running stats count as written model state, matching the reported
        // totals (4 values per normalized channel)
        count_running(layers, n);
        return n;
    }

    // every tensor a checkpoint must carry, by name (includes bn running stats)
    std::vector<std::pair<std::string, Tensor*>> state_tensors() {
        std::vector<std::pair<std::string, Tensor*>> ts;
        collect_state(layers, ts);
        return ts;
    }

    std::vector<ShapeRow> shape_chain() const {
        std::vector<size_t> s = input_shape;
        std::vector<ShapeRow> rows;
        chain(layers, s, rows);
        return rows;
    }

    std::vector<size_t> output_shape() const {
        auto rows = shape_chain();
        return rows.empty() ? input_shape : rows.back().shape;
    }

private:
    static Var forward_layers(Graph& g, Var x, std::vector<Layer>& ls) {
        Var h = x;
        for (Layer& l : ls) h = forward_one(g, h, l);
        return h;
    }

    static Var forward_one(Graph& g, Var x, Layer& l) {
        Var h = x;
        switch (l.kind) {
            case Layer::Kind::conv:
                h = conv2d(g, h, g.use(*l.A), l.B ? g.use(*l.B) : Var{-1}, l.stride);
                break;
            case Layer::Kind::pool:
                h = maxpool2(g, h);
                break;
            case Layer::Kind::flatten:
                h = g.flatten(h);
                break;
            case Layer::Kind::dense:
                h = g.dense(h, g.use(*l.A), g.use(*l.B));
                break;
            case Layer::Kind::batchnorm:
                h = batchnorm(g, h, g.use(*l.A), g.use(*l.B), l.run_mean, l.run_var);
                break;
            case Layer::Kind::residual: {
                Var inner = forward_layers(g, h, l.path);
                Var skip = l.skip_stride == 2 ? subsample2(g, h) : h;
                h = g.add(inner, skip);
                break;
            }
        }
        if (l.act == Act::relu) h = g.relu(h);
        else if (l.act == Act::softmax) h = g.softmax(h);
        return h;
    }

    static void collect(std::vector<Layer>& ls, std::vector<Parameter*>& ps) {
        for (Layer& l : ls) {
            if (l.A) ps.push_back(l.A.get());
            if (l.B) ps.push_back(l.B.get());
            collect(l.path, ps);
        }
    }

    static void collect_state(std::vector<Layer>& ls, std::vector<std::pair<std::string, Tensor*>>& ts) {
        for (Layer& l : ls) {
            if (l.A) ts.emplace_back(l.A->name, &l.A->value);
            if (l.B) ts.emplace_back(l.B->name, &l.B->value);
            if (l.kind == Layer::Kind::batchnorm) {
                ts.emplace_back(l.label + ".run_mean", &l.run_mean);
                ts.emplace_back(l.label + ".run_var", &l.run_var);
            }
            collect_state(l.path, ts);
        }
    }

    static void count_running(const std::vector<Layer>& ls, size_t& n) {
        for (const Layer& l : ls) {
            if (l.kind == Layer::Kind::batchnorm) n += l.run_mean.size() + l.run_var.size();
            count_running(l.path, n);
        }
    }

    static void chain(const std::vector<Layer>& ls, std::vector<size_t>& s, std::vector<ShapeRow>& rows) {
        for (const Layer& l : ls) {
            size_t params = (l.A ? l.A->size() : 0) + (l.B ? l.B->size() : 0);
            switch (l.kind) {
                case Layer::Kind::conv:
                    s = {conv_out_dim(s[0], l.stride), conv_out_dim(s[1], l.stride), l.A->value.shape[3]};
                    break;
                case Layer::Kind::pool:
                    s = {(s[0] + 1) / 2, (s[1] + 1) / 2, s[2]};
                    break;
                case Layer::Kind::flatten:
                    s = {numel(s)};
                    break;
                case Layer::Kind::dense:
                    s = {l.A->value.shape[1]};
                    break;
                case Layer::Kind::batchnorm:
                    params += l.run_mean.size() + l.run_var.size();
                    break;
                case Layer::Kind::residual: {
                    std::vector<size_t> inner = s;
                    std::vector<ShapeRow> sub;
                    chain(l.path, inner, sub);
                    for (auto& r : sub) {
                        r.label = l.label + "." + r.label;
                        rows.push_back(r);
                        params += r.params;
                    }
                    rows.push_back({l.label + ".add", inner, 0});
                    s = inner;
                    continue;
                }
            }
            rows.push_back({l.label, s, params});
        }
    }
};

// LeNet: two conv5x5+pool groups (20 then 50 maps, no conv bias), then three
// dense layers.
inline ConvNet build_lenet_classifier(size_t h, size_t w, size_t dense1, size_t dense2, size_t classes) {
    if (h < 8 || w < 8) throw std::invalid_argument("lenet: input must be at least 8x8");
    ConvNet net;
    net.family = "lenet";
    net.input_shape = {h, w, 1};
    net.layers.push_back(detail::conv_layer("conv1", 5, 1, 20, false, Act::relu));
    net.layers.push_back(detail::pool_layer("pool1"));
    net.layers.push_back(detail::conv_layer("conv2", 5, 20, 50, false, Act::relu));
    net.layers.push_back(detail::pool_layer("pool2"));
    net.layers.push_back(detail::flatten_layer("flatten"));
    size_t flat = ((h + 1) / 2 + 1) / 2 * (((w + 1) / 2 + 1) / 2) * 50;
    net.layers.push_back(detail::dense_layer("dense1", flat, dense1, Act::relu));
    net.layers.push_back(detail::dense_layer("dense2", dense1, dense2, Act::relu));
    net.layers.push_back(detail::dense_layer("dense3", dense2, classes, Act::softmax));
    return net;
}

// Classifier minus every dense layer: the feature extractor applied to
// patches (output = flattened final pool maps).
inline ConvNet build_lenet_reader(size_t patch_h, size_t patch_w) {
    if (patch_w < 5) throw std::invalid_argument("lenet reader: patch width must be >= 5");
    ConvNet net;
    net.family = "lenet";
    net.input_shape = {patch_h, patch_w, 1};
    net.layers.push_back(detail::conv_layer("conv1", 5, 1, 20, false, Act::relu));
    net.layers.push_back(detail::pool_layer("pool1"));
    net.layers.push_back(detail::conv_layer("conv2", 5, 20, 50, false, Act::relu));
    net.layers.push_back(detail::pool_layer("pool2"));
    net.layers.push_back(detail::flatten_layer("flatten"));
    return net;
}

// VGG-style: blocks of conv3x3-conv3x3-pool with maps doubling 32->64->128,
// then the dense head.
inline ConvNet build_vgg(size_t blocks, size_t h, size_t w, size_t dense1, size_t dense2, size_t classes) {
    if (blocks < 2 || blocks > 4) throw std::invalid_argument("vgg: blocks must be in {2,3,4}");
    ConvNet net;
    net.family = "vgg";
    net.input_shape = {h, w, 1};
    size_t ci = 1, maps = 32;
    size_t ch = h, cw = w;
    for (size_t b = 0; b < blocks; ++b) {
        std::string base = "block" + std::to_string(b + 1);
        net.layers.push_back(detail::conv_layer(base + ".conv1", 3, ci, maps, false, Act::relu));
        net.layers.push_back(detail::conv_layer(base + ".conv2", 3, maps, maps, false, Act::relu));
        net.layers.push_back(detail::pool_layer(base + ".pool"));
        ci = maps;
        maps *= 2;
        ch = (ch + 1) / 2;
        cw = (cw + 1) / 2;
        if (ch < 1 || cw < 1) throw std::invalid_argument("vgg: input too small for the pools");
    }
    net.layers.push_back(detail::flatten_layer("flatten"));
    size_t flat = ch * cw * ci;
    net.layers.push_back(detail::dense_layer("dense1", flat, dense1, Act::relu));
    net.layers.push_back(detail::dense_layer("dense2", dense1, dense2, Act::relu));
    net.layers.push_back(detail::dense_layer("dense3", dense2, classes, Act::softmax));
    return net;
}

inline ConvNet build_vgg_reader(size_t blocks, size_t patch_h, size_t patch_w) {
    ConvNet net = build_vgg(blocks, patch_h, patch_w, 8, 8, 2);
    while (net.layers.back().kind == Layer::Kind::dense) net.layers.pop_back();
    return net;
}

namespace detail {

// Pre-activation bottleneck: BN-ReLU-conv1x1(8), BN-ReLU-conv3x3(8),
// BN-ReLU-conv1x1(16, with bias); identity skip (stride-2 subsample when the
// module downsamples).
inline Layer resnet_module(const std::string& name, size_t stride) {
    Layer l;
    l.kind = Layer::Kind::residual;
    l.label = name;
    l.skip_stride = stride;
    l.path.push_back(bn_layer(name + ".bn1", 16, Act::relu));
    l.path.push_back(conv_layer(name + ".conv1", 1, 16, 8, false, Act::none, stride));
    l.path.push_back(bn_layer(name + ".bn2", 8, Act::relu));
    l.path.push_back(conv_layer(name + ".conv2", 3, 8, 8, false, Act::none));
    l.path.push_back(bn_layer(name + ".bn3", 8, Act::relu));
    l.path.push_back(conv_layer(name + ".conv3", 1, 8, 16, true, Act::none));
    return l;
}

}  // namespace detail

// Stem conv(16), a downsampling module, `blocks` identity modules, final BN,
// dense head 512/256/classes.
inline ConvNet build_resnet(size_t blocks, size_t h, size_t w, size_t classes) {
    if (blocks < 1) throw std::invalid_argument("resnet: need at least 1 block");
    ConvNet net;
    net.family = "resnet";
    net.input_shape = {h, w, 1};
    net.layers.push_back(detail::conv_layer("conv0", 3, 1, 16, false, Act::relu));
    net.layers.push_back(detail::resnet_module("module1", 2));
    for (size_t b = 0; b < blocks; ++b)
        net.layers.push_back(detail::resnet_module("module" + std::to_string(b + 2), 1));
    net.layers.push_back(detail::bn_layer("bnF", 16));
    net.layers.push_back(detail::flatten_layer("flatten"));
    size_t flat = ((h + 1) / 2) * ((w + 1) / 2) * 16;
    net.layers.push_back(detail::dense_layer("dense1", flat, 512, Act::relu));
    net.layers.push_back(detail::dense_layer("dense2", 512, 256, Act::relu));
    net.layers.push_back(detail::dense_layer("dense3", 256, classes, Act::softmax));
    return net;
}

struct PatchSpec {
    size_t width = 10;
    size_t step = 2;
};

inline Tensor image_to_tensor(const GrayImage& img) {
    Tensor t({static_cast<size_t>(img.height), static_cast<size_t>(img.width), 1});
    std::copy(img.pixels.begin(), img.pixels.end(), t.v.begin());
    return t;
}

// Full-height strips at offsets 0, step, 2*step, ... while they fit.
inline std::vector<Tensor> extract_patches(const GrayImage& img, const PatchSpec& spec) {
    if (spec.width < 5 || spec.step < 1 || spec.step > spec.width) throw std::invalid_argument("bad patch spec");
    if (static_cast<size_t>(img.width) < spec.width) throw std::invalid_argument("image narrower than patch");
    std::vector<Tensor> out;
    for (size_t off = 0; off + spec.width <= static_cast<size_t>(img.width); off += spec.step) {
        Tensor t({static_cast<size_t>(img.height), spec.width, 1});
        for (int y = 0; y < img.height; ++y)
            for (size_t x = 0; x < spec.width; ++x) t.v[y * spec.width + x] = img.at(static_cast<int>(off + x), y);
        out.push_back(std::move(t));
    }
    return out;
}

// One feature vector per patch, shared reader parameters.
inline std::vector<Var> read_patches(Graph& g, ConvNet& reader, const std::vector<Tensor>& patches) {
    std::vector<Var> feats;
    feats.reserve(patches.size());
    for (const Tensor& p : patches) feats.push_back(reader.forward(g, g.input(p)));
    return feats;
}

// Final maps (h',w',c) read out as w' column vectors of length h'*c.
inline std::vector<Var> read_fullimage(Graph& g, ConvNet& reader, const GrayImage& img) {
    Var maps = reader.forward_maps(g, g.input(image_to_tensor(img)));
    const Tensor& t = g.val(maps);
    size_t h = t.shape[0], w = t.shape[1], c = t.shape[2];
    std::vector<Var> cols;
    cols.reserve(w);
    for (size_t x = 0; x < w; ++x) {
        // gather column x: elements (y, x, :) in row-major y, c order
        std::vector<Var> parts;
        parts.reserve(h);
        for (size_t y = 0; y < h; ++y) parts.push_back(g.slice(maps, (y * w + x) * c, c));
        cols.push_back(g.concat(parts));
    }
    return cols;
}

}  // namespace inkline
