#pragma once

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "inkline/seq2seq.hpp"

namespace inkline {

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
inline void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
inline T get(const std::string& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace detail

// magic | u64 header length | JSON header | u64 tensor count |
// per tensor: u16 name length, name, u8 rank, u64 dims..., f64 values...
inline constexpr char kCheckpointMagic[8] = {'I', 'N', 'K', 'M', 'O', 'D', 'L', '1'};

inline void save_checkpoint(const std::string& path, const nlohmann::json& header,
                            const std::vector<std::pair<std::string, Tensor*>>& tensors) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    std::string hd = header.dump();
    detail::put<uint64_t>(out, hd.size());
    out += hd;
    detail::put<uint64_t>(out, tensors.size());
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw CheckpointError("tensor name too long: " + name);
        detail::put<uint16_t>(out, static_cast<uint16_t>(name.size()));
        out += name;
        detail::put<uint8_t>(out, static_cast<uint8_t>(t->shape.size()));
        for (size_t d : t->shape) detail::put<uint64_t>(out, d);
        for (double v : t->v) detail::put<double>(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("write failed: " + path);
}

struct Checkpoint {
    nlohmann::json header;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open: " + path);
    std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    size_t pos = 0;
    if (in.size() < sizeof(kCheckpointMagic) || std::memcmp(in.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw CheckpointError("not a model checkpoint: " + path);
    pos = sizeof(kCheckpointMagic);

    Checkpoint cp;
    uint64_t hlen = detail::get<uint64_t>(in, pos);
    if (pos + hlen > in.size()) throw CheckpointError("checkpoint truncated");
    try {
        cp.header = nlohmann::json::parse(in.substr(pos, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
    }
    pos += hlen;

    uint64_t count = detail::get<uint64_t>(in, pos);
    for (uint64_t i = 0; i < count; ++i) {
        uint16_t nlen = detail::get<uint16_t>(in, pos);
        if (pos + nlen > in.size()) throw CheckpointError("checkpoint truncated");
        std::string name = in.substr(pos, nlen);
        pos += nlen;
        uint8_t rank = detail::get<uint8_t>(in, pos);
        std::vector<size_t> shape(rank);
        for (auto& d : shape) d = static_cast<size_t>(detail::get<uint64_t>(in, pos));
        Tensor t(shape);
        for (double& v : t.v) v = detail::get<double>(in, pos);
        cp.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (pos != in.size()) throw CheckpointError("trailing bytes in checkpoint: " + path);
    return cp;
}

// strict restore: every destination tensor must exist with matching shape
inline void restore_tensors(const Checkpoint& cp, const std::vector<std::pair<std::string, Tensor*>>& dst) {
    for (const auto& [name, t] : dst) {
        const Tensor* src = cp.find(name);
        if (!src) throw CheckpointError("checkpoint missing tensor: " + name);
        if (src->shape != t->shape)
            throw CheckpointError("shape mismatch for " + name + ": checkpoint " + shape_str(src->shape) +
                                  " vs model " + shape_str(t->shape));
        t->v = src->v;
    }
}

inline nlohmann::json model_config_json(const ModelConfig& c) {
    return nlohmann::json{{"reader", c.reader_family},
                          {"fullimage", c.fullimage},
                          {"vgg_blocks", c.vgg_blocks},
                          {"height", c.height},
                          {"patch_width", c.patch.width},
                          {"patch_step", c.patch.step},
                          {"cell", c.enc.cell == CellKind::lstm ? "lstm" : "gru"},
                          {"encoder_size", c.enc.size},
                          {"encoder_layers", c.enc.layers},
                          {"bidirectional", c.enc.bidirectional},
                          {"attention_size", c.attn_dim}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.reader_family = j.at("reader").get<std::string>();
    c.fullimage = j.at("fullimage").get<bool>();
    c.vgg_blocks = j.at("vgg_blocks").get<size_t>();
    c.height = j.at("height").get<size_t>();
    c.patch.width = j.at("patch_width").get<size_t>();
    c.patch.step = j.at("patch_step").get<size_t>();
    std::string cell = j.at("cell").get<std::string>();
    if (cell != "lstm" && cell != "gru") throw CheckpointError("unknown cell kind: " + cell);
    c.enc.cell = cell == "lstm" ? CellKind::lstm : CellKind::gru;
    c.enc.size = j.at("encoder_size").get<size_t>();
    c.enc.layers = j.at("encoder_layers").get<size_t>();
    c.enc.bidirectional = j.at("bidirectional").get<bool>();
    c.attn_dim = j.at("attention_size").get<size_t>();
    return c;
}

// extra: free-form passthrough (e.g. the normalization settings used in training)
inline void save_model(const std::string& path, Seq2SeqModel& m, const nlohmann::json& extra = {}) {
    nlohmann::json header{{"format", 1},
                          {"kind", "seq2seq"},
                          {"model", model_config_json(m.cfg)},
                          {"charset", m.vocab.text()}};
    if (!extra.is_null() && !extra.empty()) header["extra"] = extra;
    save_checkpoint(path, header, m.state_tensors());
}

inline Seq2SeqModel load_model(const std::string& path, nlohmann::json* extra = nullptr) {
    Checkpoint cp = load_checkpoint(path);
    try {
        if (cp.header.at("kind").get<std::string>() != "seq2seq") throw CheckpointError("not a seq2seq checkpoint");
        ModelConfig cfg = model_config_from_json(cp.header.at("model"));
        CharVocab vocab = CharVocab::from_text(cp.header.at("charset").get<std::string>());
        Seq2SeqModel m = make_seq2seq(cfg, vocab);
        restore_tensors(cp, m.state_tensors());
        if (extra) *extra = cp.header.value("extra", nlohmann::json::object());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
    }
}

}  // namespace inkline
