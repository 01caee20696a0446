#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "inkline/evalkit.hpp"

namespace inkline {

// Closed word list. Words are kept unique and sorted; buckets by code-point
// length let nearest_word skip candidates that cannot beat the current best.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(const std::vector<std::string>& words) {
        std::set<std::string> uniq(words.begin(), words.end());
        words_.assign(uniq.begin(), uniq.end());
        for (size_t i = 0; i < words_.size(); ++i) {
            size_t len = utf8_decode(words_[i]).size();
            if (len >= buckets_.size()) buckets_.resize(len + 1);
            buckets_[len].push_back(i);
        }
    }

    const std::vector<std::string>& words() const { return words_; }
    bool empty() const { return words_.empty(); }
    size_t size() const { return words_.size(); }
    bool contains(const std::string& w) const {
        return std::binary_search(words_.begin(), words_.end(), w);
    }
    const std::vector<std::vector<size_t>>& length_buckets() const { return buckets_; }

private:
    std::vector<std::string> words_;
    std::vector<std::vector<size_t>> buckets_;
};

namespace detail {
// tie order: smaller distance, then shorter word, then lexicographic
inline bool better_candidate(size_t d, size_t len, const std::string& w,
                             size_t bd, size_t blen, const std::string& bw) {
    if (d != bd) return d < bd;
    if (len != blen) return len < blen;
    return w < bw;
}
}  // namespace detail

inline std::pair<std::string, size_t> nearest_word_scan(const std::string& pred, const Lexicon& lex) {
    if (lex.empty()) throw std::invalid_argument("nearest_word: empty lexicon");
    auto p = utf8_decode(pred);
    std::string best;
    size_t best_d = static_cast<size_t>(-1), best_len = 0;
    for (const auto& w : lex.words()) {
        auto cw = utf8_decode(w);
        size_t d = levenshtein(p, cw);
        if (best_d == static_cast<size_t>(-1) || detail::better_candidate(d, cw.size(), w, best_d, best_len, best)) {
            best = w;
            best_d = d;
            best_len = cw.size();
        }
    }
    return {best, best_d};
}

// Length-bucketed search: |len(w) - len(pred)| is a lower bound on the edit
// distance, so buckets further than the current best cannot win. Buckets at
// exactly the bound are still visited because ties matter.
inline std::pair<std::string, size_t> nearest_word(const std::string& pred, const Lexicon& lex) {
    if (lex.empty()) throw std::invalid_argument("nearest_word: empty lexicon");
    auto p = utf8_decode(pred);
    const auto& buckets = lex.length_buckets();
    size_t plen = p.size();

    std::string best;
    size_t best_d = static_cast<size_t>(-1), best_len = 0;
    auto visit = [&](size_t bucket_len) {
        if (bucket_len >= buckets.size()) return;
        for (size_t idx : buckets[bucket_len]) {
            const std::string& w = lex.words()[idx];
            auto cw = utf8_decode(w);
            size_t d = levenshtein(p, cw);
            if (best_d == static_cast<size_t>(-1) ||
                detail::better_candidate(d, cw.size(), w, best_d, best_len, best)) {
                best = w;
                best_d = d;
                best_len = cw.size();
            }
        }
    };
    visit(plen);
    for (size_t delta = 1; delta < buckets.size() + plen; ++delta) {
        if (best_d != static_cast<size_t>(-1) && delta > best_d) break;
        if (delta <= plen) visit(plen - delta);
        visit(plen + delta);
    }
    return {best, best_d};
}

inline std::pair<std::vector<std::string>, std::vector<size_t>> decode_with_lexicon(
    const std::vector<std::string>& preds, const Lexicon& lex) {
    std::vector<std::string> out;
    std::vector<size_t> dists;
    out.reserve(preds.size());
    for (const auto& p : preds) {
        auto [w, d] = nearest_word(p, lex);
        out.push_back(w);
        dists.push_back(d);
    }
    return {out, dists};
}

struct OovReport {
    std::vector<std::string> words;  // deduplicated
    size_t occurrences = 0;
    double rate = 0;  // per-occurrence
};

inline OovReport oov_report(const Lexicon& lex, const std::vector<std::string>& refs) {
    OovReport rep;
    std::set<std::string> seen;
    for (const auto& r : refs)
        if (!lex.contains(r)) {
            ++rep.occurrences;
            if (seen.insert(r).second) rep.words.push_back(r);
        }
    rep.rate = refs.empty() ? 0.0 : static_cast<double>(rep.occurrences) / refs.size();
    return rep;
}

// Additively smoothed n-gram model over string tokens. The vocabulary is the
// observed token set plus one unknown token; every conditional distribution
// sums to 1 by construction.
class NGramLM {
public:
    static constexpr const char* kUnknown = "<unk>";

    NGramLM() = default;
    NGramLM(size_t n, double delta) : n_(n), delta_(delta) {
        if (n_ < 1) throw std::invalid_argument("ngram: order must be >= 1");
        if (delta_ <= 0) throw std::invalid_argument("ngram: smoothing must be > 0");
        vocab_.insert(kUnknown);
    }

    void add_sequence(const std::vector<std::string>& toks) {
        for (const auto& t : toks) vocab_.insert(t);
        if (toks.size() < n_) return;
        for (size_t i = 0; i + n_ <= toks.size(); ++i) {
            std::string ctx = join(toks, i, n_ - 1);
            auto& row = counts_[ctx];
            row[toks[i + n_ - 1]]++;
            totals_[ctx]++;
        }
    }

    size_t order() const { return n_; }
    double smoothing() const { return delta_; }
    size_t vocab_size() const { return vocab_.size(); }
    bool trained() const { return vocab_.size() > 1; }

    double prob(const std::vector<std::string>& context, const std::string& next) const {
        size_t v = vocab_.size();
        std::string ctx = tail_context(context);
        auto it = counts_.find(ctx);
        if (it == counts_.end()) return 1.0 / v;
        const std::string& tok = vocab_.count(next) ? next : std::string(kUnknown);
        auto jt = it->second.find(tok);
        double c = jt == it->second.end() ? 0.0 : static_cast<double>(jt->second);
        double total = static_cast<double>(totals_.at(ctx));
        return (c + delta_) / (total + delta_ * v);
    }

    double sequence_logprob(const std::vector<std::string>& toks) const {
        double lp = 0;
        for (size_t i = 0; i + n_ <= toks.size(); ++i) {
            std::vector<std::string> ctx(toks.begin() + i, toks.begin() + i + n_ - 1);
            lp += std::log(prob(ctx, toks[i + n_ - 1]));
        }
        return lp;
    }

    const std::set<std::string>& vocab() const { return vocab_; }

private:
    static std::string join(const std::vector<std::string>& toks, size_t off, size_t len) {
        std::string s;
        for (size_t i = 0; i < len; ++i) {
            if (i) s += '\x1f';
            s += toks[off + i];
        }
        return s;
    }
    std::string tail_context(const std::vector<std::string>& context) const {
        size_t need = n_ - 1;
        size_t start = context.size() > need ? context.size() - need : 0;
        if (context.size() < need) return join(context, 0, context.size());  // never matches a trained key unless n==1
        std::vector<std::string> t(context.begin() + start, context.end());
        return join(t, 0, t.size());
    }

    size_t n_ = 1;
    double delta_ = 1.0;
    std::map<std::string, std::map<std::string, size_t>> counts_;
    std::map<std::string, size_t> totals_;
    std::set<std::string> vocab_;
};

inline NGramLM ngram_train(const std::vector<std::vector<std::string>>& corpus, size_t n, double delta) {
    if (corpus.empty()) throw std::invalid_argument("ngram_train: empty corpus");
    NGramLM lm(n, delta);
    for (const auto& seq : corpus) lm.add_sequence(seq);
    return lm;
}

}  // namespace inkline
