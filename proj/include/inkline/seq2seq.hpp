#pragma once

#include <memory>
#include <set>

#include "inkline/convnets.hpp"
#include "inkline/evalkit.hpp"

namespace inkline {

struct EncodeError : std::runtime_error {
    std::string offending;  // UTF-8 of the out-of-charset character
    EncodeError(std::string ch, const std::string& msg) : std::runtime_error(msg), offending(std::move(ch)) {}
};

// Character inventory plus the three control tokens.
struct CharVocab {
    static constexpr int PAD = 0, GO = 1, END = 2;
    std::vector<uint32_t> chars;  // sorted unique code points

    static CharVocab from_strings(const std::vector<std::string>& texts) {
        std::set<uint32_t> seen;
        for (const auto& s : texts)
            for (uint32_t cp : utf8_decode(s)) seen.insert(cp);
        CharVocab v;
        v.chars.assign(seen.begin(), seen.end());
        return v;
    }

    size_t size() const { return chars.size() + 3; }

    int index_of(uint32_t cp) const {
        auto it = std::lower_bound(chars.begin(), chars.end(), cp);
        if (it == chars.end() || *it != cp) return -1;
        return static_cast<int>(it - chars.begin()) + 3;
    }

    // [GO, c1..ck, END]
    std::vector<int> encode(const std::string& s) const {
        std::vector<int> out{GO};
        for (uint32_t cp : utf8_decode(s)) {
            int idx = index_of(cp);
            if (idx < 0) throw EncodeError(utf8_encode(cp), "character not in charset: '" + utf8_encode(cp) + "'");
            out.push_back(idx);
        }
        out.push_back(END);
        return out;
    }

    std::string decode(const std::vector<int>& indices) const {
        std::string s;
        for (int i : indices) {
            if (i == END) break;
            if (i < 3) continue;  // GO/PAD never emitted
            s += utf8_encode(chars[i - 3]);
        }
        return s;
    }

    // serialization as the raw character string
    std::string text() const {
        std::string s;
        for (uint32_t cp : chars) s += utf8_encode(cp);
        return s;
    }
    static CharVocab from_text(const std::string& s) { return from_strings({s}); }
};

struct RnnState {
    Var h{-1};
    Var c{-1};  // LSTM only
};

// Gates act on the concatenation [h_{t-1}; x_t], one weight matrix and bias
// per gate.
struct LSTMCell {
    size_t in = 0, hidden = 0;
    Parameter Wf, bf, Wi, bi, Wo, bo, Wc, bc;

    LSTMCell() = default;
    LSTMCell(const std::string& name, size_t in_dim, size_t hidden_dim)
        : in(in_dim),
          hidden(hidden_dim),
          Wf(name + ".Wf", {hidden_dim + in_dim, hidden_dim}),
          bf(name + ".bf", {hidden_dim}),
          Wi(name + ".Wi", {hidden_dim + in_dim, hidden_dim}),
          bi(name + ".bi", {hidden_dim}),
          Wo(name + ".Wo", {hidden_dim + in_dim, hidden_dim}),
          bo(name + ".bo", {hidden_dim}),
          Wc(name + ".Wc", {hidden_dim + in_dim, hidden_dim}),
          bc(name + ".bc", {hidden_dim}) {}

    RnnState step(Graph& g, Var x, const RnnState& s) {
        Var hx = g.concat({s.h, x});
        Var f = g.sigmoid(g.dense(hx, g.use(Wf), g.use(bf)));
        Var i = g.sigmoid(g.dense(hx, g.use(Wi), g.use(bi)));
        Var o = g.sigmoid(g.dense(hx, g.use(Wo), g.use(bo)));
        Var ch = g.tanh_(g.dense(hx, g.use(Wc), g.use(bc)));
        Var c = g.add(g.mul(f, s.c), g.mul(i, ch));
        Var h = g.mul(o, g.tanh_(c));
        return {h, c};
    }

    void collect(std::vector<Parameter*>& ps) {
        for (Parameter* p : {&Wf, &bf, &Wi, &bi, &Wo, &bo, &Wc, &bc}) ps.push_back(p);
    }
};

// h' = (1-u)⊙h + u⊙h̃, with the reset gate applied to h before the candidate.
struct GRUCell {
    size_t in = 0, hidden = 0;
    Parameter Wu, bu, Wr, br, Wh, bh;

    GRUCell() = default;
    GRUCell(const std::string& name, size_t in_dim, size_t hidden_dim)
        : in(in_dim),
          hidden(hidden_dim),
          Wu(name + ".Wu", {hidden_dim + in_dim, hidden_dim}),
          bu(name + ".bu", {hidden_dim}),
          Wr(name + ".Wr", {hidden_dim + in_dim, hidden_dim}),
          br(name + ".br", {hidden_dim}),
          Wh(name + ".Wh", {hidden_dim + in_dim, hidden_dim}),
          bh(name + ".bh", {hidden_dim}) {}

    RnnState step(Graph& g, Var x, const RnnState& s) {
        Var hx = g.concat({s.h, x});
        Var u = g.sigmoid(g.dense(hx, g.use(Wu), g.use(bu)));
        Var r = g.sigmoid(g.dense(hx, g.use(Wr), g.use(br)));
        Var rhx = g.concat({g.mul(r, s.h), x});
        Var hh = g.tanh_(g.dense(rhx, g.use(Wh), g.use(bh)));
        Var one_minus_u = g.add_const(g.scale(u, -1.0), 1.0);
        Var h = g.add(g.mul(one_minus_u, s.h), g.mul(u, hh));
        return {h, {-1}};
    }

    void collect(std::vector<Parameter*>& ps) {
        for (Parameter* p : {&Wu, &bu, &Wr, &br, &Wh, &bh}) ps.push_back(p);
    }
};

enum class CellKind { lstm, gru };

struct RnnCell {
    CellKind kind = CellKind::gru;
    std::unique_ptr<LSTMCell> lstm;
    std::unique_ptr<GRUCell> gru;

    static RnnCell make(CellKind k, const std::string& name, size_t in, size_t hidden) {
        RnnCell c;
        c.kind = k;
        if (k == CellKind::lstm) c.lstm = std::make_unique<LSTMCell>(name, in, hidden);
        else c.gru = std::make_unique<GRUCell>(name, in, hidden);
        return c;
    }

    size_t hidden() const { return kind == CellKind::lstm ? lstm->hidden : gru->hidden; }

    RnnState zero_state(Graph& g) const {
        Tensor z({hidden()});
        RnnState s;
        s.h = g.input(z);
        if (kind == CellKind::lstm) s.c = g.input(z);
        return s;
    }

    RnnState step(Graph& g, Var x, const RnnState& s) {
        return kind == CellKind::lstm ? lstm->step(g, x, s) : gru->step(g, x, s);
    }

    void collect(std::vector<Parameter*>& ps) {
        if (lstm) lstm->collect(ps);
        if (gru) gru->collect(ps);
    }
};

struct EncoderConfig {
    CellKind cell = CellKind::gru;
    size_t size = 64;
    size_t layers = 1;
    bool bidirectional = true;
};

// Stacked (optionally bidirectional) recurrent encoder. Outputs per step are
// the forward/backward concatenation; the final state is the top layer's
// forward state. Initial states are zero. Dropout (train mode) is applied to
// every layer's output sequence, not to the recurrent connections.
struct Encoder {
    EncoderConfig cfg;
    size_t in_dim = 0;
    std::vector<RnnCell> fwd, bwd;

    Encoder() = default;
    Encoder(const std::string& name, size_t input_dim, const EncoderConfig& c) : cfg(c), in_dim(input_dim) {
        if (cfg.size < 1 || cfg.layers < 1) throw std::invalid_argument("encoder: size and layers must be >= 1");
        size_t d = input_dim;
        for (size_t l = 0; l < cfg.layers; ++l) {
            std::string base = name + ".l" + std::to_string(l);
            fwd.push_back(RnnCell::make(cfg.cell, base + ".fwd", d, cfg.size));
            if (cfg.bidirectional) bwd.push_back(RnnCell::make(cfg.cell, base + ".bwd", d, cfg.size));
            d = cfg.size * (cfg.bidirectional ? 2 : 1);
        }
    }

    size_t out_dim() const { return cfg.size * (cfg.bidirectional ? 2 : 1); }

    struct Out {
        std::vector<Var> H;
        RnnState last;  // forward direction, top layer
    };

    Out run(Graph& g, const std::vector<Var>& xs, double dropout_rate = 0.0) {
        if (xs.empty()) throw std::invalid_argument("encoder: empty sequence");
        std::vector<Var> seq = xs;
        RnnState top_last;
        for (size_t l = 0; l < cfg.layers; ++l) {
            std::vector<Var> fh(seq.size());
            RnnState s = fwd[l].zero_state(g);
            for (size_t t = 0; t < seq.size(); ++t) {
                s = fwd[l].step(g, seq[t], s);
                fh[t] = s.h;
            }
            top_last = s;
            if (cfg.bidirectional) {
                std::vector<Var> bh(seq.size());
                RnnState sb = bwd[l].zero_state(g);
                for (size_t t = seq.size(); t-- > 0;) {
                    sb = bwd[l].step(g, seq[t], sb);
                    bh[t] = sb.h;
                }
                for (size_t t = 0; t < seq.size(); ++t) seq[t] = g.concat({fh[t], bh[t]});
            } else {
                seq = fh;
            }
            if (dropout_rate > 0)
                for (Var& v : seq) v = g.dropout(v, dropout_rate);
        }
        return {seq, top_last};
    }

    void collect(std::vector<Parameter*>& ps) {
        for (auto& c : fwd) c.collect(ps);
        for (auto& c : bwd) c.collect(ps);
    }
};

// Content attention: e_{t,i} = wᵀ·tanh(W·h^e_i + V·h^d_{t-1} + b),
// a_t = softmax(e_t), c_t = Σ_i a_{t,i}·h^e_i.
struct Attention {
    size_t enc_dim = 0, dec_dim = 0, attn_dim = 0;
    Parameter W, V, b, w;

    Attention() = default;
    Attention(const std::string& name, size_t enc, size_t dec, size_t attn)
        : enc_dim(enc),
          dec_dim(dec),
          attn_dim(attn),
          W(name + ".W", {enc, attn}),
          V(name + ".V", {dec, attn}),
          b(name + ".b", {attn}),
          w(name + ".w", {attn}) {}

    struct Prep {
        Var Hm{-1};   // [T, enc]
        Var WHb{-1};  // [T, attn]
        size_t T = 0;
    };

    Prep prep(Graph& g, const std::vector<Var>& H) {
        if (H.empty()) throw std::invalid_argument("attention: empty encoder output");
        Prep p;
        p.T = H.size();
        p.Hm = g.stack_rows(H);
        p.WHb = g.add_rowvec(g.matmul(p.Hm, g.use(W)), g.use(b));
        return p;
    }

    // returns (context [enc], weights [T])
    std::pair<Var, Var> attend(Graph& g, const Prep& p, Var h_dec) {
        Var q = g.dense(h_dec, g.use(V));
        Var scores = g.tanh_(g.add_rowvec(p.WHb, q));
        Var e = g.reshape(g.matmul(scores, g.reshape(g.use(w), {attn_dim, 1})), {p.T});
        Var a = g.softmax(e);
        Var ctx = g.reshape(g.matmul(g.reshape(a, {1, p.T}), p.Hm), {enc_dim});
        return {ctx, a};
    }

    void collect(std::vector<Parameter*>& ps) {
        for (Parameter* p : {&W, &V, &b, &w}) ps.push_back(p);
    }
};

struct ModelConfig {
    std::string reader_family = "lenet";  // lenet | vgg
    bool fullimage = false;
    size_t vgg_blocks = 2;
    size_t height = 48;
    PatchSpec patch;
    EncoderConfig enc;
    size_t attn_dim = 0;  // 0 -> encoder size
};

struct Seq2SeqModel {
    ModelConfig cfg;
    CharVocab vocab;
    ConvNet reader;
    Encoder encoder;
    Attention attn;
    RnnCell dec;
    Parameter Wout, bout;
    double dropout = 0.0;  // train-time rate, applied per the encoder contract

    size_t feature_dim() const {
        return cfg.fullimage ? reader_map_dim() : numel(reader.output_shape());
    }

    size_t reader_map_dim() const {
        auto rows = reader.shape_chain();
        // last non-flatten shape
        for (auto it = rows.rbegin(); it != rows.rend(); ++it)
            if (it->shape.size() == 3) return it->shape[0] * it->shape[2];
        throw std::logic_error("reader has no spatial output");
    }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        for (Parameter* p : reader.parameters()) ps.push_back(p);
        encoder.collect(ps);
        attn.collect(ps);
        dec.collect(ps);
        ps.push_back(&Wout);
        ps.push_back(&bout);
        return ps;
    }

    size_t param_count() {
        size_t n = 0;
        for (Parameter* p : parameters()) n += p->size();
        return n;
    }

    std::vector<std::pair<std::string, Tensor*>> state_tensors() {
        auto ts = reader.state_tensors();
        std::vector<Parameter*> rest;
        encoder.collect(rest);
        attn.collect(rest);
        dec.collect(rest);
        rest.push_back(&Wout);
        rest.push_back(&bout);
        for (Parameter* p : rest) ts.emplace_back(p->name, &p->value);
        return ts;
    }

    std::vector<Var> read_features(Graph& g, const GrayImage& img) {
        if (cfg.fullimage) return read_fullimage(g, reader, img);
        return read_patches(g, reader, extract_patches(img, cfg.patch));
    }

    Tensor onehot(int index) const {
        Tensor t({vocab.size()});
        t[index] = 1.0;
        return t;
    }

    struct ForwardOut {
        Var logits{-1};                 // [T, V]
        std::vector<Var> step_logits;   // per step [V]
        std::vector<Var> attn_weights;  // per step [T_enc]
        Var enc_last_h{-1};             // instrumentation: decoder init state
    };

    // target = [c1..ck, END]; decoder input at step t is GO for t=0, then
    // target[t-1] (teacher forcing) or the previous argmax.
    ForwardOut forward_train(Graph& g, const GrayImage& img, const std::vector<int>& target, bool teacher_forcing) {
        if (target.empty() || target.back() != CharVocab::END)
            throw std::invalid_argument("forward_train: target must end with END");
        auto feats = read_features(g, img);
        auto enc = encoder.run(g, feats, dropout);
        auto prep = attn.prep(g, enc.H);

        ForwardOut out;
        out.enc_last_h = enc.last.h;
        RnnState state = enc.last;
        if (dec.kind == CellKind::lstm && state.c.id < 0) state.c = g.input(Tensor({dec.hidden()}));
        int prev = CharVocab::GO;
        for (size_t t = 0; t < target.size(); ++t) {
            auto [ctx, a] = attn.attend(g, prep, state.h);
            Var x = g.concat({g.input(onehot(prev)), ctx});
            state = dec.step(g, x, state);
            Var logits = g.dense(state.h, g.use(Wout), g.use(bout));
            out.step_logits.push_back(logits);
            out.attn_weights.push_back(a);
            if (teacher_forcing) {
                prev = target[t];
            } else {
                const Tensor& l = g.val(logits);
                prev = 0;
                for (size_t j = 1; j < l.size(); ++j)
                    if (l[j] > l[prev]) prev = static_cast<int>(j);
            }
        }
        out.logits = g.stack_rows(out.step_logits);
        return out;
    }

    std::string greedy_decode(const GrayImage& img, size_t max_len,
                              std::vector<std::vector<double>>* attn_out = nullptr) {
        Graph g;
        g.training = false;
        auto feats = read_features(g, img);
        auto enc = encoder.run(g, feats, 0.0);
        auto prep = attn.prep(g, enc.H);

        RnnState state = enc.last;
        if (dec.kind == CellKind::lstm && state.c.id < 0) state.c = g.input(Tensor({dec.hidden()}));
        int prev = CharVocab::GO;
        std::vector<int> emitted;
        for (size_t t = 0; t < max_len; ++t) {
            auto [ctx, a] = attn.attend(g, prep, state.h);
            Var x = g.concat({g.input(onehot(prev)), ctx});
            state = dec.step(g, x, state);
            Var logits = g.dense(state.h, g.use(Wout), g.use(bout));
            const Tensor& l = g.val(logits);
            int best = 0;
            for (size_t j = 1; j < l.size(); ++j)
                if (l[j] > l[best]) best = static_cast<int>(j);
            if (attn_out) attn_out->push_back(g.val(a).v);
            if (best == CharVocab::END) break;
            emitted.push_back(best);
            prev = best;
        }
        return vocab.decode(emitted);
    }
};

inline Seq2SeqModel make_seq2seq(const ModelConfig& cfg, const CharVocab& vocab) {
    Seq2SeqModel m;
    m.cfg = cfg;
    m.vocab = vocab;
    if (cfg.reader_family == "lenet") {
        m.reader = cfg.fullimage ? build_lenet_reader(cfg.height, 5) : build_lenet_reader(cfg.height, cfg.patch.width);
    } else if (cfg.reader_family == "vgg") {
        m.reader = build_vgg_reader(cfg.vgg_blocks, cfg.height, cfg.fullimage ? 8 : cfg.patch.width);
    } else {
        throw std::invalid_argument("unknown reader family: " + cfg.reader_family);
    }
    size_t feat = m.feature_dim();
    m.encoder = Encoder("enc", feat, cfg.enc);
    size_t attn_dim = cfg.attn_dim ? cfg.attn_dim : cfg.enc.size;
    m.attn = Attention("attn", m.encoder.out_dim(), cfg.enc.size, attn_dim);
    // decoder hidden size equals encoder size: its state is initialized from
    // the encoder's forward last state
    m.dec = RnnCell::make(cfg.enc.cell, "dec", vocab.size() + m.encoder.out_dim(), cfg.enc.size);
    m.Wout = Parameter("out.W", {cfg.enc.size, vocab.size()});
    m.bout = Parameter("out.b", {vocab.size()});
    return m;
}

}  // namespace inkline
