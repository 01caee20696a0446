#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "inkline/checkpoint.hpp"
#include "inkline/rng.hpp"
#include "helpers.hpp"

using namespace inkline;

namespace {

void write_raw(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void append_u64(std::string& out, uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.reader_family = "lenet";
    cfg.height = 16;
    cfg.patch = {5, 2};
    cfg.enc.cell = CellKind::gru;
    cfg.enc.size = 6;
    cfg.enc.layers = 1;
    cfg.enc.bidirectional = true;
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint round trip preserves header, order, and exact bits") {
    TempDir dir("ckpt_rt");
    std::string path = dir.str("m.inkmodel");

    Tensor a({2, 3});
    a.v = {0.0, -0.0, 5e-324, 1e308, -3.5, 0.1 + 0.2};
    Tensor b({4});
    b.v = {1.0, -1.0, 2.5, -2.5};
    Tensor c({1, 2, 1, 2});
    c.v = {9.0, 8.0, 7.0, 6.0};
    nlohmann::json header{{"format", 1}, {"kind", "test"}, {"note", "héllo"}};

    save_checkpoint(path, header, {{"w", &a}, {"bias", &b}, {"conv.k", &c}});

    // the file is recognizable by its magic
    std::ifstream f(path, std::ios::binary);
    char magic[8];
    f.read(magic, 8);
    REQUIRE(std::memcmp(magic, "INKMODL1", 8) == 0);

    Checkpoint cp = load_checkpoint(path);
    REQUIRE(cp.header == header);
    REQUIRE(cp.tensors.size() == 3);
    REQUIRE(cp.tensors[0].first == "w");
    REQUIRE(cp.tensors[1].first == "bias");
    REQUIRE(cp.tensors[2].first == "conv.k");
    REQUIRE(cp.tensors[0].second.shape == std::vector<size_t>{2, 3});
    REQUIRE(cp.tensors[2].second.shape == std::vector<size_t>{1, 2, 1, 2});
    REQUIRE(cp.tensors[0].second.v == a.v);
    REQUIRE(cp.tensors[1].second.v == b.v);
    REQUIRE(cp.tensors[2].second.v == c.v);
    REQUIRE(std::signbit(cp.tensors[0].second[1]));

    const Tensor* found = cp.find("bias");
    REQUIRE(found != nullptr);
    REQUIRE(found->v == b.v);
    REQUIRE(cp.find("nope") == nullptr);

    // rewriting a smaller checkpoint over the same path truncates cleanly
    save_checkpoint(path, {{"format", 1}}, {{"only", &b}});
    Checkpoint cp2 = load_checkpoint(path);
    REQUIRE(cp2.tensors.size() == 1);
}

TEST_CASE("checkpoint loader rejects damaged files") {
    TempDir dir("ckpt_bad");
    std::string path = dir.str("m.inkmodel");
    Tensor t({3});
    t.v = {1, 2, 3};
    save_checkpoint(path, {{"format", 1}}, {{"t", &t}});
    auto full = std::filesystem::file_size(path);

    SECTION("wrong magic") {
        write_raw(path, "NOTAMODL" + std::string(64, '\0'));
        REQUIRE_THROWS_AS(load_checkpoint(path), CheckpointError);
        REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("not a model checkpoint"));
    }
    SECTION("shorter than the magic") {
        write_raw(path, "INK");
        REQUIRE_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
    SECTION("cut inside the header length") {
        std::filesystem::resize_file(path, 12);
        REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("truncated"));
    }
    SECTION("cut inside the tensor payload") {
        std::filesystem::resize_file(path, full - 5);
        REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("truncated"));
    }
    SECTION("trailing garbage") {
        std::ofstream f(path, std::ios::binary | std::ios::app);
        f.put('x');
        f.close();
        REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("trailing"));
    }
    SECTION("unparsable header") {
        std::string raw(kCheckpointMagic, 8);
        append_u64(raw, 5);
        raw += "{oops";
        append_u64(raw, 0);
        write_raw(path, raw);
        REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("bad checkpoint header"));
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_checkpoint(dir.str("absent.inkmodel")), CheckpointError);
    }
    SECTION("unwritable destination") {
        REQUIRE_THROWS_AS(save_checkpoint(dir.str("no_dir/x.inkmodel"), {}, {}), CheckpointError);
    }
    SECTION("oversized tensor name") {
        std::string name(70000, 'n');
        REQUIRE_THROWS_AS(save_checkpoint(path, {}, {{name, &t}}), CheckpointError);
    }
}

TEST_CASE("restore is strict about names and shapes") {
    TempDir dir("ckpt_restore");
    std::string path = dir.str("m.inkmodel");
    Tensor a({2, 2});
    a.v = {1, 2, 3, 4};
    Tensor b({3});
    b.v = {5, 6, 7};
    save_checkpoint(path, {{"format", 1}}, {{"a", &a}, {"b", &b}});
    Checkpoint cp = load_checkpoint(path);

    SECTION("matching destinations receive the stored values") {
        Tensor a2({2, 2}), b2({3});
        restore_tensors(cp, {{"a", &a2}, {"b", &b2}});
        REQUIRE(a2.v == a.v);
        REQUIRE(b2.v == b.v);
    }
    SECTION("a missing name fails") {
        Tensor x({2, 2});
        REQUIRE_THROWS_WITH(restore_tensors(cp, {{"missing", &x}}),
                            Catch::Matchers::ContainsSubstring("missing tensor"));
    }
    SECTION("a shape mismatch names the tensor and both shapes") {
        Tensor wrong({4});
        try {
            restore_tensors(cp, {{"a", &wrong}});
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            std::string msg = e.what();
            REQUIRE(msg.find("a") != std::string::npos);
            REQUIRE(msg.find("(2,2)") != std::string::npos);
            REQUIRE(msg.find("(4)") != std::string::npos);
        }
    }
}

TEST_CASE("model settings survive the json codec") {
    ModelConfig c;
    c.reader_family = "vgg";
    c.fullimage = true;
    c.vgg_blocks = 3;
    c.height = 32;
    c.patch = {8, 3};
    c.enc.cell = CellKind::lstm;
    c.enc.size = 16;
    c.enc.layers = 2;
    c.enc.bidirectional = false;
    c.attn_dim = 12;

    ModelConfig back = model_config_from_json(model_config_json(c));
    REQUIRE(back.reader_family == "vgg");
    REQUIRE(back.fullimage);
    REQUIRE(back.vgg_blocks == 3);
    REQUIRE(back.height == 32);
    REQUIRE(back.patch.width == 8);
    REQUIRE(back.patch.step == 3);
    REQUIRE(back.enc.cell == CellKind::lstm);
    REQUIRE(back.enc.size == 16);
    REQUIRE(back.enc.layers == 2);
    REQUIRE_FALSE(back.enc.bidirectional);
    REQUIRE(back.attn_dim == 12);

    nlohmann::json j = model_config_json(c);
    j["cell"] = "elman";
    REQUIRE_THROWS_AS(model_config_from_json(j), CheckpointError);
}

TEST_CASE("a saved model loads back with identical behavior") {
    TempDir dir("ckpt_model");
    std::string path = dir.str("m.inkmodel");
    CharVocab v = CharVocab::from_strings({"ab\xc3\xa9"});
    Seq2SeqModel m = make_seq2seq(small_config(), v);
    Rng rng(31);
    for (Parameter* p : m.parameters()) fill_random(*p, rng, 0.4);

    GrayImage img(20, 16);
    Rng irng(8);
    for (double& px : img.pixels) px = irng.uniform(0, 1);
    std::string before = m.greedy_decode(img, 6);

    save_model(path, m, {{"normalize", {{"height", 48}}}});

    nlohmann::json extra;
    Seq2SeqModel back = load_model(path, &extra);
    REQUIRE(back.cfg.reader_family == m.cfg.reader_family);
    REQUIRE(back.cfg.height == m.cfg.height);
    REQUIRE(back.cfg.enc.size == m.cfg.enc.size);
    REQUIRE(back.vocab.text() == v.text());
    REQUIRE(back.vocab.size() == v.size());
    REQUIRE(extra.at("normalize").at("height") == 48);

    auto got = back.state_tensors();
    auto want = m.state_tensors();
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
        REQUIRE(got[i].first == want[i].first);
        REQUIRE(got[i].second->v == want[i].second->v);
    }
    REQUIRE(back.greedy_decode(img, 6) == before);

    SECTION("extra defaults to an empty object") {
        save_model(path, m);
        nlohmann::json e2;
        load_model(path, &e2);
        REQUIRE(e2.is_object());
        REQUIRE(e2.empty());
    }
    SECTION("headers from other kinds are refused") {
        save_checkpoint(path, {{"kind", "lexicon"}}, {});
        REQUIRE_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("not a seq2seq"));
        save_checkpoint(path, {{"kind", "seq2seq"}}, {});  // no model block
        REQUIRE_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("bad checkpoint header"));
        save_checkpoint(path, {{"format", 1}}, {});  // no kind at all
        REQUIRE_THROWS_AS(load_model(path), CheckpointError);
    }
    SECTION("a checkpoint missing weights is refused") {
        nlohmann::json header{{"format", 1},
                              {"kind", "seq2seq"},
                              {"model", model_config_json(m.cfg)},
                              {"charset", m.vocab.text()}};
        save_checkpoint(path, header, {});
        REQUIRE_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("missing tensor"));
    }
}
