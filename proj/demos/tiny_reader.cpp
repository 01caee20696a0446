// End to end on a pocket-size task: synthesize a 16-word vocabulary, train a
// patch reader + BiGRU + attention model until it reads the training set
// perfectly, then decode against the word list and print the results.

#include <cstdio>
#include <string>
#include <vector>

#include "inkline/inkline.hpp"

using namespace inkline;

int main() {
    std::vector<std::string> words{"ash", "bend", "cove", "drum", "echo", "fern", "gale", "hush",
                                   "iris", "jolt", "kite", "lush", "mist", "node", "opal", "pier"};

    GlyphSet glyphs = builtin_glyphs(5, 21);
    Rng rng(21);
    std::vector<Sample> train;
    for (const std::string& w : words) {
        Sample s;
        s.image = resize_height(synth_word(glyphs, w, rng), 16);
        s.text = w;
        train.push_back(std::move(s));
    }

    ModelConfig mc;
    mc.reader_family = "lenet";
    mc.height = 16;
    mc.patch = {6, 3};
    mc.enc.cell = CellKind::gru;
    mc.enc.size = 32;
    mc.enc.bidirectional = true;

    std::vector<std::string> texts(words.begin(), words.end());
    Seq2SeqModel model = make_seq2seq(mc, CharVocab::from_strings(texts));

    TrainConfig tc;
    tc.opt.lr = 0.01;
    tc.opt.decay = 0.0;
    tc.epochs = 200;
    tc.batch = 2;
    tc.patience = 200;
    tc.dropout = 0.0;
    tc.l2 = 0.0;
    tc.seed = 21;
    tc.max_decode_len = 8;
    tc.stop_at_zero_wer = true;

    TrainResult r = train_loop(model, train, train, tc);
    for (const EpochStats& e : r.history)
        if (e.epoch % 10 == 0 || e.epoch + 1 == r.history.size())
            std::printf("epoch %3zu  loss %.4f  wer %.3f\n", e.epoch, e.train_loss, e.val_wer);
    std::printf("converged: epoch %zu, wer %.3f\n\n", r.best_epoch, r.best_val_wer);

    EvalResult ev = evaluate_model(model, train, tc.max_decode_len);
    Lexicon lex(words);
    auto [fixed, dists] = decode_with_lexicon(ev.predictions, lex);

    std::printf("%-8s %-8s %-8s\n", "truth", "greedy", "lexicon");
    for (size_t i = 0; i < train.size(); ++i)
        std::printf("%-8s %-8s %-8s\n", train[i].text.c_str(), ev.predictions[i].c_str(), fixed[i].c_str());
    return 0;
}
